#include "pclkit/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"

namespace pclkit {

using nlohmann::json;

const Annotator* SessionState::find_annotator(const std::string& id) const {
  for (const auto& a : annotators) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

bool SessionState::is_assigned(const std::string& doc_id, const std::string& annotator_id) const {
  auto it = assignment.find(doc_id);
  return it != assignment.end() &&
         (it->second[0] == annotator_id || it->second[1] == annotator_id);
}

TaskStatus SessionState::status(const std::string& doc_id, const std::string& annotator_id) const {
  return submissions.contains({doc_id, annotator_id}) ? TaskStatus::SUBMITTED : TaskStatus::PENDING;
}

std::size_t SessionState::workload(const std::string& annotator_id) const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [&](const auto& kv) {
        return kv.second[0] == annotator_id || kv.second[1] == annotator_id;
      }));
}

std::optional<std::array<LabelRecord, 2>> SessionState::pair_for(const std::string& doc_id) const {
  auto it = assignment.find(doc_id);
  if (it == assignment.end()) return std::nullopt;
  auto a = submissions.find({doc_id, it->second[0]});
  auto b = submissions.find({doc_id, it->second[1]});
  if (a == submissions.end() || b == submissions.end()) return std::nullopt;
  return std::array<LabelRecord, 2>{a->second, b->second};
}

bool SessionState::is_complete() const {
  return std::all_of(docs.begin(), docs.end(),
                     [&](const Document& d) { return final_labels.contains(d.id); });
}

SessionState create_session(std::string session_id, std::vector<Document> docs,
                            std::vector<Annotator> annotators, std::uint64_t seed) {
  std::vector<std::string> primaries;
  std::set<std::string> ids;
  for (const auto& a : annotators) {
    if (a.id.empty()) throw ValidationError("annotator id must be non-empty");
    if (!ids.insert(a.id).second) throw ValidationError("duplicate annotator '" + a.id + "'");
    if (a.role == AnnotatorRole::PRIMARY) primaries.push_back(a.id);
  }
  if (primaries.size() < 2) {
    throw ValidationError("a session needs at least two primary annotators");
  }
  std::set<std::string> doc_ids;
  for (const auto& d : docs) {
    validate(d);
    if (!doc_ids.insert(d.id).second) throw ValidationError("duplicate document '" + d.id + "'");
  }

  std::stable_sort(primaries.begin(), primaries.end(), [&](const auto& a, const auto& b) {
    return std::pair(keyed_uniform(seed, a), a) < std::pair(keyed_uniform(seed, b), b);
  });

  SessionState state;
  state.session_id = std::move(session_id);
  const std::size_t k = primaries.size();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    state.assignment[docs[i].id] = {primaries[(2 * i) % k], primaries[(2 * i + 1) % k]};
  }
  state.docs = std::move(docs);
  state.annotators = std::move(annotators);
  return state;
}

std::optional<std::string> next_task(const SessionState& state, const std::string& annotator_id) {
  if (!state.find_annotator(annotator_id)) {
    throw SessionError(SessionError::Kind::UNKNOWN_ANNOTATOR,
                       "unknown annotator '" + annotator_id + "'");
  }
  for (const auto& doc : state.docs) {
    if (state.is_assigned(doc.id, annotator_id) &&
        state.status(doc.id, annotator_id) == TaskStatus::PENDING) {
      return doc.id;
    }
  }
  return std::nullopt;
}

std::vector<std::string> conflict_fields(const LabelRecord& a, const LabelRecord& b) {
  std::vector<std::string> out;
  if (a.pcl != b.pcl) out.emplace_back("pcl");
  if (a.subcategories != b.subcategories) out.emplace_back("subcategories");
  if (a.group != b.group) out.emplace_back("group");
  if (a.intensity != b.intensity) out.emplace_back("intensity");
  return out;
}

std::vector<AdjudicationItem> adjudication_queue(const SessionState& state) {
  std::vector<AdjudicationItem> out;
  for (const auto& doc : state.docs) {
    if (state.resolved.contains(doc.id)) continue;
    auto pair = state.pair_for(doc.id);
    if (!pair) continue;
    auto fields = conflict_fields((*pair)[0], (*pair)[1]);
    if (!fields.empty()) out.push_back({doc.id, *pair, std::move(fields)});
  }
  return out;
}

void to_json(json& j, const AdjudicationItem& item) {
  j = json{{"doc_id", item.doc_id},
           {"submissions", {item.submissions[0], item.submissions[1]}},
           {"conflict_fields", item.conflict_fields}};
}

AnnotationSession::AnnotationSession(SessionState state) : state_(std::move(state)) {}

SessionState AnnotationSession::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

LabelRecord AnnotationSession::submit(const std::string& annotator_id, LabelRecord record) {
  using Kind = SessionError::Kind;
  std::unique_lock lock(mutex_);
  const Annotator* annotator = state_.find_annotator(annotator_id);
  if (!annotator) throw SessionError(Kind::UNKNOWN_ANNOTATOR, "unknown annotator '" + annotator_id + "'");
  if (annotator->role != AnnotatorRole::PRIMARY) {
    throw SessionError(Kind::FORBIDDEN, "only primary annotators submit labels");
  }
  if (record.annotator_id.empty()) record.annotator_id = annotator_id;
  if (record.annotator_id != annotator_id) {
    throw SessionError(Kind::FORBIDDEN, "record annotator does not match the submitter");
  }
  if (!state_.assignment.contains(record.doc_id)) {
    throw SessionError(Kind::UNKNOWN_DOCUMENT, "unknown document '" + record.doc_id + "'");
  }
  if (!state_.is_assigned(record.doc_id, annotator_id)) {
    throw SessionError(Kind::NOT_ASSIGNED,
                       "'" + annotator_id + "' is not assigned to '" + record.doc_id + "'");
  }
  if (state_.locked || state_.resolved.contains(record.doc_id)) {
    throw SessionError(Kind::LOCKED, "document '" + record.doc_id + "' no longer accepts labels");
  }
  if (record.round != Round::PRIMARY) {
    throw SessionError(Kind::INVALID_LABEL, "primary submissions use round PRIMARY",
                       {{"round", "must be PRIMARY"}});
  }
  if (auto errors = check(record); !errors.empty()) {
    throw SessionError(Kind::INVALID_LABEL, "label violates layered gating", std::move(errors));
  }

  state_.submissions[{record.doc_id, annotator_id}] = record;
  if (auto pair = state_.pair_for(record.doc_id);
      pair && conflict_fields((*pair)[0], (*pair)[1]).empty()) {
    state_.final_labels[record.doc_id] = (*pair)[0];
  } else {
    state_.final_labels.erase(record.doc_id);
  }
  return record;
}

LabelRecord AnnotationSession::resolve(const std::string& proofreader_id, LabelRecord record) {
  using Kind = SessionError::Kind;
  std::unique_lock lock(mutex_);
  const Annotator* annotator = state_.find_annotator(proofreader_id);
  if (!annotator) throw SessionError(Kind::UNKNOWN_ANNOTATOR, "unknown annotator '" + proofreader_id + "'");
  if (annotator->role != AnnotatorRole::PROOFREADER) {
    throw SessionError(Kind::FORBIDDEN, "only proofreaders resolve disagreements");
  }
  if (!state_.assignment.contains(record.doc_id)) {
    throw SessionError(Kind::UNKNOWN_DOCUMENT, "unknown document '" + record.doc_id + "'");
  }
  if (state_.locked) throw SessionError(Kind::LOCKED, "session is locked");
  if (!state_.pair_for(record.doc_id)) {
    throw SessionError(Kind::NOT_READY,
                       "document '" + record.doc_id + "' does not have both primary labels yet");
  }
  record.annotator_id = proofreader_id;
  record.round = Round::PROOFREAD;
  if (auto errors = check(record); !errors.empty()) {
    throw SessionError(Kind::INVALID_LABEL, "label violates layered gating", std::move(errors));
  }
  state_.final_labels[record.doc_id] = record;
  state_.resolved.insert(record.doc_id);
  return record;
}

void AnnotationSession::lock() {
  std::unique_lock lock(mutex_);
  state_.locked = true;
}

void to_json(json& j, const SessionState& s) {
  json annotators = json::array();
  for (const auto& a : s.annotators) {
    annotators.push_back({{"id", a.id}, {"role", to_string(a.role)}});
  }
  json assignment = json::object();
  for (const auto& [doc, pair] : s.assignment) assignment[doc] = {pair[0], pair[1]};
  json submissions = json::array();
  for (const auto& [key, record] : s.submissions) submissions.push_back(record);
  json finals = json::array();
  for (const auto& [doc, record] : s.final_labels) finals.push_back(record);
  j = json{{"session_id", s.session_id},
           {"locked", s.locked},
           {"docs", s.docs},
           {"annotators", std::move(annotators)},
           {"assignment", std::move(assignment)},
           {"submissions", std::move(submissions)},
           {"final_labels", std::move(finals)},
           {"resolved", s.resolved}};
}

SessionState session_from_json(const json& j) {
  SessionState s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    s.locked = j.value("locked", false);
    for (const auto& d : j.at("docs")) {
      s.docs.push_back(d.get<Document>());
      validate(s.docs.back());
    }
    for (const auto& a : j.at("annotators")) {
      s.annotators.push_back({a.at("id").get<std::string>(),
                              parse_enum<AnnotatorRole>(a.at("role").get<std::string>())});
    }
    for (const auto& [doc, pair] : j.at("assignment").items()) {
      s.assignment[doc] = {pair.at(0).get<std::string>(), pair.at(1).get<std::string>()};
    }
    for (const auto& r : j.at("submissions")) {
      auto record = r.get<LabelRecord>();
      validate(record);
      s.submissions[{record.doc_id, record.annotator_id}] = record;
    }
    for (const auto& r : j.at("final_labels")) {
      auto record = r.get<LabelRecord>();
      validate(record);
      s.final_labels[record.doc_id] = record;
    }
    for (const auto& d : j.value("resolved", json::array())) s.resolved.insert(d.get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("session state: ") + e.what());
  }
  return s;
}

void save_session(const SessionState& state, const std::filesystem::path& path) {
  write_file_atomic(path, json(state).dump() + "\n");
}

SessionState load_session(const std::filesystem::path& path) {
  try {
    return session_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<LabelRecord> export_labels(const SessionState& state) {
  std::vector<LabelRecord> out;
  for (const auto& [key, record] : state.submissions) out.push_back(record);
  for (const auto& doc : state.docs) {
    if (state.resolved.contains(doc.id)) out.push_back(state.final_labels.at(doc.id));
  }
  return out;
}

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw ValidationError("kappa inputs differ in length");
  if (a.empty()) throw ValidationError("kappa needs at least one item");
  std::uint64_t agree = 0, a1 = 0, b1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    a1 += a[i];
    b1 += b[i];
  }
  const std::uint64_t n = a.size();
  const std::uint64_t chance = a1 * b1 + (n - a1) * (n - b1);  // p_e * n^2
  if (chance == n * n) throw UndefinedResult("kappa undefined: chance agreement is 1");
  // (p_o - p_e) / (1 - p_e) with both terms scaled by n^2.
  const double num = static_cast<double>(n * agree) - static_cast<double>(chance);
  const double den = static_cast<double>(n * n) - static_cast<double>(chance);
  return num / den;
}

WeakRemoved kappa_weak_removed(const std::vector<LabelPair>& pairs) {
  WeakRemoved out;
  std::vector<bool> a, b;
  for (const auto& [x, y] : pairs) {
    if (x.intensity == Intensity::MILD || y.intensity == Intensity::MILD) {
      ++out.removed;
      continue;
    }
    a.push_back(x.pcl);
    b.push_back(y.pcl);
  }
  out.remaining = a.size();
  if (a.empty()) throw ValidationError("every item was removed as weak");
  out.kappa = cohen_kappa(a, b);
  return out;
}

std::map<Subcategory, std::optional<double>> kappa_per_subcategory(
    const std::vector<LabelPair>& pairs) {
  std::map<Subcategory, std::optional<double>> out;
  for (auto sub : all_values<Subcategory>()) {
    std::vector<bool> a, b;
    for (const auto& [x, y] : pairs) {
      if (!x.pcl || !y.pcl) continue;
      a.push_back(x.subcategories.contains(sub));
      b.push_back(y.subcategories.contains(sub));
    }
    try {
      out[sub] = a.empty() ? std::nullopt : std::optional<double>(cohen_kappa(a, b));
    } catch (const UndefinedResult&) {
      out[sub] = std::nullopt;
    }
  }
  return out;
}

std::vector<LabelPair> label_pairs(const SessionState& state) {
  std::vector<LabelPair> out;
  for (const auto& doc : state.docs) {
    if (auto pair = state.pair_for(doc.id)) out.emplace_back((*pair)[0], (*pair)[1]);
  }
  return out;
}

std::vector<LabelPair> label_pairs(const std::vector<LabelRecord>& labels) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const LabelRecord*>> by_doc;
  for (const auto& l : labels) {
    if (l.round != Round::PRIMARY) continue;
    auto& list = by_doc[l.doc_id];
    if (list.empty()) order.push_back(l.doc_id);
    list.push_back(&l);
  }
  std::vector<LabelPair> out;
  for (const auto& doc : order) {
    const auto& list = by_doc[doc];
    if (list.size() > 2) {
      throw ValidationError("document '" + doc + "' has more than two primary labels");
    }
    if (list.size() == 2) out.emplace_back(*list[0], *list[1]);
  }
  return out;
}

IAAReport compute_iaa(const std::vector<LabelPair>& pairs) {
  if (pairs.empty()) {
    throw SessionError(SessionError::Kind::NOT_READY,
                       "agreement needs at least one doubly annotated item");
  }
  IAAReport r;
  r.n_items = pairs.size();
  std::vector<bool> a, b;
  bool any_mild = false;
  for (const auto& [x, y] : pairs) {
    a.push_back(x.pcl);
    b.push_back(y.pcl);
    any_mild = any_mild || x.intensity == Intensity::MILD || y.intensity == Intensity::MILD;
    r.n_multiclass_items += x.pcl && y.pcl;
  }
  try {
    r.kappa_all = cohen_kappa(a, b);
  } catch (const UndefinedResult&) {
  }
  if (any_mild) {
    std::optional<double> value;
    for (const auto& [x, y] : pairs) {
      r.n_removed_weak += x.intensity == Intensity::MILD || y.intensity == Intensity::MILD;
    }
    try {
      value = kappa_weak_removed(pairs).kappa;
    } catch (const ValidationError&) {
    }
    r.kappa_weak_removed = value;
  }
  r.kappa_per_subcategory = kappa_per_subcategory(pairs);
  return r;
}

IAAReport compute_iaa(const SessionState& state) { return compute_iaa(label_pairs(state)); }

void to_json(json& j, const IAAReport& r) {
  auto value = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j = json::object();
  j["kappa_all"] = value(r.kappa_all);
  if (r.kappa_weak_removed) j["kappa_weak_removed"] = value(*r.kappa_weak_removed);
  json subs = json::object();
  for (const auto& [sub, v] : r.kappa_per_subcategory) subs[std::string(to_string(sub))] = value(v);
  j["kappa_per_subcategory"] = std::move(subs);
  j["subcategory_method"] = "one-vs-rest over items both annotators marked PCL";
  j["n_items"] = r.n_items;
  j["n_removed_weak"] = r.n_removed_weak;
  j["n_multiclass_items"] = r.n_multiclass_items;
}

std::string iaa_summary(const IAAReport& report) { return json(report).dump(2) + "\n"; }

std::string render_iaa(const IAAReport& report) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return std::string(buf);
  };
  auto row = [](std::ostringstream& out, const std::string& name, const std::string& value) {
    out << name << std::string(name.size() < 28 ? 28 - name.size() : 1, ' ') << value << "\n";
  };
  static const std::map<Subcategory, std::string> kRowNames = {
      {Subcategory::UNBALANCED_POWER, "Unbalanced Power Rel."},
      {Subcategory::SPECTATOR, "Spectators"},
      {Subcategory::PREJUDICE, "Prejudice"},
      {Subcategory::APPEAL, "Appeal"},
      {Subcategory::COMPASSION, "Compassion"}};

  std::ostringstream out;
  row(out, "Binary-classification", "Kappa IAA");
  row(out, "All labels", fmt(report.kappa_all) + "  (n=" + std::to_string(report.n_items) + ")");
  if (report.kappa_weak_removed) {
    row(out, "Remove Weak level",
        fmt(*report.kappa_weak_removed) + "  (removed " + std::to_string(report.n_removed_weak) +
            ")");
  }
  row(out, "Multi-classification", "Kappa IAA (one-vs-rest, n=" +
                                       std::to_string(report.n_multiclass_items) + ")");
  for (const auto& [sub, v] : report.kappa_per_subcategory) row(out, kRowNames.at(sub), fmt(v));
  return out.str();
}

}  // namespace pclkit
