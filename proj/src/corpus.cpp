#include "pclkit/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

using nlohmann::json;

namespace {

const std::set<std::string_view> kDocumentFields = {
    "id", "text", "language", "source", "group_tag", "interference", "split", "collected_at"};
const std::set<std::string_view> kLabelFields = {
    "doc_id", "annotator_id", "round", "pcl", "subcategories", "group", "intensity", "dpm_level"};

void reject_unknown_fields(const json& j, const std::set<std::string_view>& allowed) {
  if (!j.is_object()) throw ValidationError("record is not an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError("unknown field '" + key + "'");
  }
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool require_bool(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_boolean()) throw ValidationError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

template <typename E>
E require_enum(const json& j, const char* key) {
  return parse_enum<E>(require_string(j, key));
}

template <typename E>
std::optional<E> optional_enum(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return parse_enum<E>(it->get<std::string>());
}

std::string join_errors(const std::vector<FieldError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e.field + ": " + e.reason;
  }
  return out;
}

template <typename Record, typename KeyFn>
std::vector<Record> load_records(const std::filesystem::path& path, KeyFn key_of) {
  std::vector<Record> out;
  std::unordered_map<std::string, std::size_t> first_line;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    Record record;
    try {
      record = json::parse(line).get<Record>();
      validate(record);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
    auto [it, inserted] = first_line.emplace(key_of(record), number);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id '" + it->first + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(number));
    }
    out.push_back(std::move(record));
  });
  return out;
}

template <typename Record>
std::string serialize_records(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    validate(r);
    out += json(r).dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::vector<FieldError> check(const Document& doc) {
  std::vector<FieldError> errors;
  if (doc.id.empty()) errors.push_back({"id", "must be non-empty"});
  if (utf8::trim(doc.text).empty()) errors.push_back({"text", "must be non-empty after trimming"});
  if (!utf8::is_valid(doc.text)) errors.push_back({"text", "must be valid UTF-8"});
  if (doc.interference && doc.split != Split::TEST) {
    errors.push_back({"interference", "only permitted when split is TEST"});
  }
  if (doc.collected_at && !doc.collected_at->ok()) {
    errors.push_back({"collected_at", "not a calendar date"});
  }
  return errors;
}

std::vector<FieldError> check(const LabelRecord& label) {
  std::vector<FieldError> errors;
  if (label.doc_id.empty()) errors.push_back({"doc_id", "must be non-empty"});
  if (label.annotator_id.empty()) errors.push_back({"annotator_id", "must be non-empty"});
  if (!label.pcl) {
    if (!label.subcategories.empty()) {
      errors.push_back({"subcategories", "must be empty when pcl is false"});
    }
    if (label.intensity != Intensity::NONE) {
      errors.push_back({"intensity", "must be NONE when pcl is false"});
    }
  } else if (label.subcategories.empty()) {
    errors.push_back({"subcategories", "must be non-empty when pcl is true"});
  }
  if (label.dpm_level && (*label.dpm_level < 0 || *label.dpm_level > 4)) {
    errors.push_back({"dpm_level", "must be in 0..4"});
  }
  return errors;
}

void validate(const Document& doc) {
  if (auto errors = check(doc); !errors.empty()) {
    throw ValidationError("document '" + doc.id + "': " + join_errors(errors));
  }
}

void validate(const LabelRecord& label) {
  if (auto errors = check(label); !errors.empty()) {
    throw ValidationError("label for '" + label.doc_id + "': " + join_errors(errors));
  }
}

std::string format_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::chrono::year_month_day parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(text);
  if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw ValidationError("date '" + s + "' is not YYYY-MM-DD");
  }
  std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m},
                                   std::chrono::day{d}};
  if (!date.ok()) throw ValidationError("date '" + s + "' is not a calendar date");
  return date;
}

void to_json(json& j, const Document& doc) {
  j = json::object();
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["language"] = to_string(doc.language);
  j["source"] = to_string(doc.source);
  j["group_tag"] = doc.group_tag ? json(to_string(*doc.group_tag)) : json(nullptr);
  j["interference"] = doc.interference;
  j["split"] = to_string(doc.split);
  j["collected_at"] = doc.collected_at ? json(format_date(*doc.collected_at)) : json(nullptr);
}

void from_json(const json& j, Document& doc) {
  reject_unknown_fields(j, kDocumentFields);
  doc.id = require_string(j, "id");
  doc.text = require_string(j, "text");
  doc.language = require_enum<Language>(j, "language");
  doc.source = require_enum<Source>(j, "source");
  doc.group_tag = optional_enum<GroupTag>(j, "group_tag");
  doc.interference = j.contains("interference") ? require_bool(j, "interference") : false;
  doc.split = j.contains("split") ? require_enum<Split>(j, "split") : Split::UNSPLIT;
  doc.collected_at.reset();
  if (auto it = j.find("collected_at"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("field 'collected_at' must be a string");
    doc.collected_at = parse_date(it->get<std::string>());
  }
}

void to_json(json& j, const LabelRecord& label) {
  j = json::object();
  j["doc_id"] = label.doc_id;
  j["annotator_id"] = label.annotator_id;
  j["round"] = to_string(label.round);
  j["pcl"] = label.pcl;
  json subs = json::array();
  for (auto s : label.subcategories) subs.push_back(to_string(s));
  j["subcategories"] = std::move(subs);
  j["group"] = label.group ? json(to_string(*label.group)) : json(nullptr);
  j["intensity"] = to_string(label.intensity);
  j["dpm_level"] = label.dpm_level ? json(*label.dpm_level) : json(nullptr);
}

void from_json(const json& j, LabelRecord& label) {
  reject_unknown_fields(j, kLabelFields);
  label.doc_id = require_string(j, "doc_id");
  label.annotator_id = require_string(j, "annotator_id");
  label.round = j.contains("round") ? require_enum<Round>(j, "round") : Round::PRIMARY;
  label.pcl = require_bool(j, "pcl");
  label.subcategories.clear();
  if (auto it = j.find("subcategories"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("field 'subcategories' must be an array");
    for (const auto& s : *it) {
      if (!s.is_string()) throw ValidationError("subcategory values must be strings");
      if (!label.subcategories.insert(parse_enum<Subcategory>(s.get<std::string>())).second) {
        throw ValidationError("subcategory '" + s.get<std::string>() + "' listed twice");
      }
    }
  }
  label.group = optional_enum<GroupTag>(j, "group");
  label.intensity = j.contains("intensity") ? require_enum<Intensity>(j, "intensity")
                                            : Intensity::NONE;
  label.dpm_level.reset();
  if (auto it = j.find("dpm_level"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ValidationError("field 'dpm_level' must be an integer");
    label.dpm_level = it->get<int>();
  }
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"name", m.name},
           {"stage", to_string(m.stage)},
           {"language", m.language ? json(to_string(*m.language)) : json(nullptr)},
           {"doc_count", m.doc_count},
           {"checksum", m.checksum}};
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  return load_records<Document>(path, [](const Document& d) { return d.id; });
}

std::vector<LabelRecord> load_labels(const std::filesystem::path& path) {
  return load_records<LabelRecord>(path, [](const LabelRecord& l) {
    return l.doc_id + "/" + l.annotator_id + "/" + std::string(to_string(l.round));
  });
}

std::string serialize_documents(const std::vector<Document>& docs) {
  return serialize_records(docs);
}

std::string serialize_labels(const std::vector<LabelRecord>& labels) {
  return serialize_records(labels);
}

DatasetManifest save_documents(const std::vector<Document>& docs,
                               const std::filesystem::path& path, std::string name,
                               Stage stage) {
  std::set<std::string_view> ids;
  for (const auto& d : docs) {
    if (!ids.insert(d.id).second) throw ValidationError("duplicate document id '" + d.id + "'");
  }
  const std::string bytes = serialize_documents(docs);
  write_file_atomic(path, bytes);

  DatasetManifest m;
  m.name = name.empty() ? path.stem().string() : std::move(name);
  m.stage = stage;
  if (!docs.empty() && std::all_of(docs.begin(), docs.end(), [&](const Document& d) {
        return d.language == docs.front().language;
      })) {
    m.language = docs.front().language;
  }
  m.doc_count = docs.size();
  m.checksum = sha256_hex(bytes);
  return m;
}

DatasetManifest save_labels(const std::vector<LabelRecord>& labels,
                            const std::filesystem::path& path, std::string name, Stage stage) {
  const std::string bytes = serialize_labels(labels);
  write_file_atomic(path, bytes);
  DatasetManifest m;
  m.name = name.empty() ? path.stem().string() : std::move(name);
  m.stage = stage;
  m.doc_count = labels.size();
  m.checksum = sha256_hex(bytes);
  return m;
}

std::map<std::string, LabelRecord> resolve_final_labels(const std::vector<LabelRecord>& labels) {
  std::map<std::string, LabelRecord> out;
  for (const auto& l : labels) {
    auto it = out.find(l.doc_id);
    if (it == out.end()) {
      out.emplace(l.doc_id, l);
    } else if (l.round == Round::PROOFREAD && it->second.round != Round::PROOFREAD) {
      it->second = l;
    }
  }
  return out;
}

std::optional<std::int64_t> proportion_tenths(std::size_t positives, std::size_t total) {
  if (total == 0) return std::nullopt;
  // round_half_up(1000 * p / t) computed exactly in integers.
  const auto p = static_cast<std::int64_t>(positives);
  const auto t = static_cast<std::int64_t>(total);
  return (2000 * p + t) / (2 * t);
}

std::string format_tenths(std::int64_t tenths) {
  const bool negative = tenths < 0;
  const std::int64_t mag = negative ? -tenths : tenths;
  return (negative ? "-" : "") + std::to_string(mag / 10) + "." + std::to_string(mag % 10);
}

std::string StatsCell::proportion_text() const {
  auto p = proportion();
  return p ? format_tenths(*p) : std::string(kUndefinedMarker);
}

StatsCell PlatformStats::cell(Source source, GroupKey group) const {
  auto row = cells.find(source);
  if (row == cells.end()) return {};
  auto it = row->second.find(group);
  return it == row->second.end() ? StatsCell{} : it->second;
}

std::string PlatformStats::render() const {
  std::vector<GroupKey> columns;
  for (const auto& [g, _] : group_totals) columns.push_back(g);

  std::ostringstream out;
  auto label = [](const GroupKey& g) {
    return g ? std::string(to_string(*g)) : std::string("UNTAGGED");
  };
  out << std::left << std::setw(16) << "";
  for (const auto& g : columns) out << std::right << std::setw(15) << label(g);
  out << std::setw(15) << "TOTAL" << "\n";

  for (const auto& [source, row] : cells) {
    const std::string name(to_string(source));
    const StatsCell& total = platform_totals.at(source);
    out << std::left << std::setw(16) << name;
    for (const auto& g : columns) out << std::right << std::setw(15) << cell(source, g).total;
    out << std::setw(15) << total.total << "\n";
    out << std::left << std::setw(16) << (name + "_p");
    for (const auto& g : columns) out << std::right << std::setw(15) << cell(source, g).positives;
    out << std::setw(15) << total.positives << "\n";
    out << std::left << std::setw(16) << "prop.(%)";
    for (const auto& g : columns) {
      out << std::right << std::setw(15) << cell(source, g).proportion_text();
    }
    out << std::setw(15) << total.proportion_text() << "\n";
  }
  out << std::left << std::setw(16) << "TOTAL";
  for (const auto& g : columns) out << std::right << std::setw(15) << group_totals.at(g).total;
  out << std::setw(15) << grand_total.total << "\n";
  return out.str();
}

PlatformStats compute_platform_stats(const std::vector<Document>& docs,
                                     const std::vector<LabelRecord>& labels) {
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);

  PlatformStats stats;
  for (const auto& [doc_id, label] : resolve_final_labels(labels)) {
    auto it = by_id.find(doc_id);
    if (it == by_id.end()) {
      throw ValidationError("label references unknown document '" + doc_id + "'");
    }
    const Document& doc = *it->second;
    const std::size_t positive = label.pcl ? 1 : 0;
    const auto group = label.group ? label.group : doc.group_tag;
    for (StatsCell* c : {&stats.cells[doc.source][group], &stats.platform_totals[doc.source],
                         &stats.group_totals[group], &stats.grand_total}) {
      c->total += 1;
      c->positives += positive;
    }
  }
  return stats;
}

}  // namespace pclkit
