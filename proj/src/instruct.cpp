#include "pclkit/instruct.hpp"

#include <algorithm>

#include "pclkit/io.hpp"
#include "pclkit/toxicity.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

using nlohmann::json;

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

TemplateConfig make_default_config() {
  TemplateConfig config;
  config.version = "pcl-template-v1";

  LanguageTemplate en;
  en.description_text =
      "Task: decide whether the input text contains patronizing or condescending language "
      "(PCL).\n"
      "Definition: PCL is language in which the speaker treats a person or a community, "
      "usually a vulnerable group, as inferior. The speaker talks down to them, pities them or "
      "offers superficial help, often without any openly offensive words.\n"
      "PCL subcategories:\n"
      "1. Unbalanced Power Relations: the speaker claims authority or privilege over the "
      "target group.\n"
      "2. Spectator: the speaker comments from the sidelines and offers shallow opinions or "
      "solutions instead of engaging.\n"
      "3. Prejudice: the text relies on stereotypes or biased assumptions about the group.\n"
      "4. Appeal: the text calls on others to act on the group's behalf and frames the group "
      "as helpless.\n"
      "5. Elicit Compassion: the text dramatizes the group's situation to provoke pity.\n"
      "Answer \"Yes, PCL\" if the text contains PCL and \"No, not PCL\" otherwise.";
  en.intensity_clause = "Toxicity intensity of the input text: {level}.";
  en.positive_token = "Yes, PCL";
  en.negative_token = "No, not PCL";
  en.max_input_units = 3500;
  en.level_names = {{Intensity::MILD, "mild"},
                    {Intensity::MODERATE, "moderate"},
                    {Intensity::SEVERE, "severe"}};
  en.subcategory_names = {{Subcategory::UNBALANCED_POWER, "Unbalanced Power Relations"},
                          {Subcategory::SPECTATOR, "Spectator"},
                          {Subcategory::PREJUDICE, "Prejudice"},
                          {Subcategory::APPEAL, "Appeal"},
                          {Subcategory::COMPASSION, "Elicit Compassion"}};

  LanguageTemplate zh;
  zh.description_text =
      "任务：判断输入文本是否包含居高临下的表达（PCL）。\n"
      "定义：PCL指说话者把某个人或群体（通常是弱势群体）置于低人一等的位置，以俯视、怜悯或"
      "敷衍帮助的姿态谈论他们，往往不带明显的攻击性词汇。\n"
      "PCL子类别：\n"
      "1. 不平衡权力关系：说话者以权威或优越者自居。\n"
      "2. 旁观者：说话者置身事外，只给出肤浅的看法或建议。\n"
      "3. 偏见：文本依赖对该群体的刻板印象或偏颇假设。\n"
      "4. 呼吁：文本号召他人替该群体出面，把该群体描绘为无助者。\n"
      "5. 唤起同情：文本渲染该群体的处境以博取怜悯。\n"
      "如果文本包含PCL，请回答“是，属于PCL”；否则回答“否，不属于PCL”。";
  zh.intensity_clause = "输入文本的毒性强度：{level}。";
  zh.positive_token = "是，属于PCL";
  zh.negative_token = "否，不属于PCL";
  zh.max_input_units = 7000;
  zh.level_names = {{Intensity::MILD, "轻度"},
                    {Intensity::MODERATE, "中度"},
                    {Intensity::SEVERE, "重度"}};
  zh.subcategory_names = {{Subcategory::UNBALANCED_POWER, "不平衡权力关系"},
                          {Subcategory::SPECTATOR, "旁观者"},
                          {Subcategory::PREJUDICE, "偏见"},
                          {Subcategory::APPEAL, "呼吁"},
                          {Subcategory::COMPASSION, "唤起同情"}};

  config.languages = {{Language::EN, std::move(en)}, {Language::ZH, std::move(zh)}};
  config.validate();
  return config;
}

}  // namespace

const LanguageTemplate& TemplateConfig::language(Language lang) const {
  auto it = languages.find(lang);
  if (it == languages.end()) {
    throw ValidationError("template config has no " + std::string(to_string(lang)) + " template");
  }
  return it->second;
}

void TemplateConfig::validate() const {
  if (pair_separator.empty()) throw ValidationError("pair_separator must be non-empty");
  if (dpm_threshold < 0 || dpm_threshold > 4) throw ValidationError("dpm_threshold must be 0..4");
  for (const auto& [lang, t] : languages) {
    const std::string where = std::string(to_string(lang)) + " template: ";
    if (count_occurrences(t.intensity_clause, kLevelPlaceholder) != 1) {
      throw ValidationError(where + "intensity_clause must contain {level} exactly once");
    }
    if (t.positive_token.empty() || t.negative_token.empty() ||
        t.positive_token == t.negative_token) {
      throw ValidationError(where + "positive and negative tokens must be distinct and non-empty");
    }
    if (t.max_input_units == 0) throw ValidationError(where + "max_input_units must be > 0");
    for (auto level : {Intensity::MILD, Intensity::MODERATE, Intensity::SEVERE}) {
      if (!t.level_names.contains(level) || t.level_names.at(level).empty()) {
        throw ValidationError(where + "missing level name for " + std::string(to_string(level)));
      }
    }
    for (auto sub : all_values<Subcategory>()) {
      auto it = t.subcategory_names.find(sub);
      if (it == t.subcategory_names.end() || it->second.empty()) {
        throw ValidationError(where + "missing name for " + std::string(to_string(sub)));
      }
      if (t.description_text.find(it->second) == std::string::npos) {
        throw ValidationError(where + "description does not name subcategory '" + it->second +
                              "'");
      }
    }
  }
}

const TemplateConfig& default_template_config() {
  static const TemplateConfig config = make_default_config();
  return config;
}

void to_json(json& j, const TemplateConfig& config) {
  j = json::object();
  j["version"] = config.version;
  j["pair_separator"] = config.pair_separator;
  j["dpm_threshold"] = config.dpm_threshold;
  json langs = json::object();
  for (const auto& [lang, t] : config.languages) {
    json levels = json::object();
    for (const auto& [level, name] : t.level_names) levels[std::string(to_string(level))] = name;
    json subs = json::object();
    for (const auto& [sub, name] : t.subcategory_names) subs[std::string(to_string(sub))] = name;
    langs[std::string(to_string(lang))] = json{{"description_text", t.description_text},
                                               {"intensity_clause", t.intensity_clause},
                                               {"positive_token", t.positive_token},
                                               {"negative_token", t.negative_token},
                                               {"max_input_units", t.max_input_units},
                                               {"level_names", levels},
                                               {"subcategory_names", subs}};
  }
  j["languages"] = std::move(langs);
}

TemplateConfig template_config_from_json(const json& j) {
  TemplateConfig config;
  try {
    config.version = j.value("version", std::string("custom"));
    config.pair_separator = j.value("pair_separator", config.pair_separator);
    config.dpm_threshold = j.value("dpm_threshold", config.dpm_threshold);
    for (const auto& [lang, t] : j.at("languages").items()) {
      LanguageTemplate lt;
      lt.description_text = t.at("description_text").get<std::string>();
      lt.intensity_clause = t.at("intensity_clause").get<std::string>();
      lt.positive_token = t.at("positive_token").get<std::string>();
      lt.negative_token = t.at("negative_token").get<std::string>();
      lt.max_input_units = t.at("max_input_units").get<std::size_t>();
      for (const auto& [level, name] : t.at("level_names").items()) {
        lt.level_names[parse_enum<Intensity>(level)] = name.get<std::string>();
      }
      for (const auto& [sub, name] : t.at("subcategory_names").items()) {
        lt.subcategory_names[parse_enum<Subcategory>(sub)] = name.get<std::string>();
      }
      config.languages[parse_enum<Language>(lang)] = std::move(lt);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("template config: ") + e.what());
  }
  config.validate();
  return config;
}

TemplateConfig load_template_config(const std::filesystem::path& path) {
  try {
    return template_config_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<FieldError> check(const InstructionSample& sample, const TemplateConfig& config) {
  std::vector<FieldError> errors;
  auto it = config.languages.find(sample.language);
  if (it == config.languages.end()) {
    errors.push_back({"language", "no template for this language"});
    return errors;
  }
  const LanguageTemplate& t = it->second;
  if (sample.instruction.find(t.description_text) == std::string::npos) {
    errors.push_back({"instruction", "does not contain the description block"});
  }
  for (const auto& [sub, name] : t.subcategory_names) {
    if (sample.instruction.find(name) == std::string::npos) {
      errors.push_back({"instruction", "missing subcategory name '" + name + "'"});
    }
  }
  if (sample.output != t.positive_token && sample.output != t.negative_token) {
    errors.push_back({"output", "not a canonical label token"});
  }
  if (sample.input.empty()) errors.push_back({"input", "must be non-empty"});
  return errors;
}

void validate(const InstructionSample& sample, const TemplateConfig& config) {
  auto errors = check(sample, config);
  if (errors.empty()) return;
  std::string msg = "sample '" + sample.meta.doc_id + "':";
  for (const auto& e : errors) msg += " " + e.field + ": " + e.reason + ";";
  throw ValidationError(msg);
}

const std::string& build_description_instruction(Language language, const TemplateConfig& config) {
  return config.language(language).description_text;
}

InstructionSample build_sample(const Document& doc, const LabelRecord& label,
                               std::optional<Intensity> intensity, bool include_intensity,
                               const TemplateConfig& config, std::string source) {
  if (label.doc_id != doc.id) {
    throw ValidationError("label doc_id '" + label.doc_id + "' does not match document '" +
                          doc.id + "'");
  }
  const LanguageTemplate& t = config.language(doc.language);
  InstructionSample s;
  s.language = doc.language;
  s.instruction = t.description_text;
  if (include_intensity) {
    if (!intensity || *intensity == Intensity::NONE) {
      throw ValidationError("document '" + doc.id + "' has no intensity level");
    }
    std::string clause = t.intensity_clause;
    clause.replace(clause.find(kLevelPlaceholder), kLevelPlaceholder.size(),
                   t.level_names.at(*intensity));
    s.instruction += "\n" + clause;
    s.meta.intensity = intensity;
  }
  s.input = doc.text;
  s.output = label.pcl ? t.positive_token : t.negative_token;
  s.meta.source = std::move(source);
  s.meta.doc_id = doc.id;
  s.meta.subcategories = label.subcategories;
  return s;
}

std::string concat_pair(std::string_view comment, std::string_view reply,
                        const TemplateConfig& config) {
  if (comment.empty() || reply.empty()) throw ValidationError("pair sides must be non-empty");
  const std::string& sep = config.pair_separator;
  if (comment.find(sep) != std::string_view::npos || reply.find(sep) != std::string_view::npos) {
    throw ValidationError("pair text contains the separator " + sep);
  }
  std::string out;
  out.reserve(comment.size() + reply.size() + sep.size() + 2);
  out.append(comment).append(" ").append(sep).append(" ").append(reply);
  return out;
}

std::pair<std::string, std::string> split_pair(std::string_view joined,
                                               const TemplateConfig& config) {
  const std::string marker = " " + config.pair_separator + " ";
  const auto pos = joined.find(marker);
  if (pos == std::string_view::npos ||
      joined.find(config.pair_separator, pos + marker.size()) != std::string_view::npos) {
    throw ValidationError("text is not a joined pair");
  }
  return {std::string(joined.substr(0, pos)), std::string(joined.substr(pos + marker.size()))};
}

void to_json(json& j, const TextPair& p) {
  j = json{{"id", p.id}, {"comment", p.comment}, {"reply", p.reply}, {"label", to_string(p.label)}};
}

std::vector<TextPair> load_pairs(const std::filesystem::path& path) {
  std::vector<TextPair> out;
  std::set<std::string> ids;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    try {
      const json j = json::parse(line);
      TextPair p{j.at("id").get<std::string>(), j.at("comment").get<std::string>(),
                 j.at("reply").get<std::string>(),
                 parse_enum<PairLabel>(j.at("label").get<std::string>())};
      if (p.id.empty()) throw ValidationError("id must be non-empty");
      if (!ids.insert(p.id).second) throw ValidationError("duplicate id '" + p.id + "'");
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return out;
}

PairFilterResult filter_offensive_pairs(const std::vector<TextPair>& pairs,
                                        const Matcher& offensive) {
  PairFilterResult result;
  for (const auto& p : pairs) {
    if (offensive.contains_any(p.comment) || offensive.contains_any(p.reply)) {
      ++result.removed;
    } else {
      result.kept.push_back(p);
    }
  }
  return result;
}

std::optional<InstructionSample> enforce_length(const InstructionSample& sample,
                                                const TemplateConfig& config) {
  if (utf8::length(sample.input) <= config.language(sample.language).max_input_units) {
    return sample;
  }
  return std::nullopt;
}

bool binarize_dpm(int level, int threshold) {
  if (level < 0 || level > 4) {
    throw ValidationError("DPM level " + std::to_string(level) + " outside 0..4");
  }
  return level >= threshold;
}

void to_json(json& j, const SftReport& r) {
  j = json{{"inputs", r.inputs},
           {"unsure_dropped", r.unsure_dropped},
           {"unlabeled", r.unlabeled},
           {"offensive_removed", r.offensive_removed},
           {"length_discarded", r.length_discarded},
           {"exported", r.exported},
           {"discarded_ids", r.discarded_ids}};
}

namespace {

std::optional<Intensity> intensity_for(const std::string& id, const SftOptions& options) {
  auto it = options.scores.find(id);
  if (it == options.scores.end()) return std::nullopt;
  return bucketize(it->second);
}

void finish(SftResult& result, std::vector<InstructionSample> candidates,
            const TemplateConfig& config) {
  for (auto& s : candidates) {
    if (auto kept = enforce_length(s, config)) {
      validate(*kept, config);
      result.samples.push_back(std::move(*kept));
    } else {
      ++result.report.length_discarded;
      result.report.discarded_ids.push_back(s.meta.doc_id);
    }
  }
  std::sort(result.samples.begin(), result.samples.end(),
            [](const auto& a, const auto& b) { return a.meta.doc_id < b.meta.doc_id; });
  std::sort(result.report.discarded_ids.begin(), result.report.discarded_ids.end());
  result.report.exported = result.samples.size();
}

}  // namespace

SftResult build_sft_from_labels(const std::vector<Document>& docs,
                                const std::vector<LabelRecord>& labels, const SftOptions& options,
                                const TemplateConfig& config) {
  if (options.dataset == SftDataset::TD) {
    throw ValidationError("TD samples are built from comment/reply pairs");
  }
  const auto finals = resolve_final_labels(labels);
  const std::string source(options.dataset == SftDataset::DPM ? "dpm" : "cpcl");

  SftResult result;
  std::vector<InstructionSample> candidates;
  for (const auto& doc : docs) {
    if (doc.split == Split::TEST) continue;
    auto it = finals.find(doc.id);
    if (it == finals.end()) {
      ++result.report.unlabeled;
      continue;
    }
    ++result.report.inputs;
    LabelRecord label = it->second;
    if (options.dataset == SftDataset::DPM) {
      if (!label.dpm_level) {
        throw ValidationError("DPM label for '" + doc.id + "' has no dpm_level");
      }
      label.pcl = binarize_dpm(*label.dpm_level, config.dpm_threshold);
    }
    candidates.push_back(build_sample(doc, label, intensity_for(doc.id, options),
                                      options.with_intensity, config, source));
  }
  finish(result, std::move(candidates), config);
  return result;
}

SftResult build_sft_from_pairs(const std::vector<TextPair>& pairs, const Matcher& offensive,
                               const SftOptions& options, const TemplateConfig& config) {
  SftResult result;
  std::vector<TextPair> sure;
  for (const auto& p : pairs) {
    if (p.label == PairLabel::UNSURE) {
      ++result.report.unsure_dropped;
    } else {
      sure.push_back(p);
    }
  }
  result.report.inputs = sure.size();
  auto filtered = filter_offensive_pairs(sure, offensive);
  result.report.offensive_removed = filtered.removed;

  std::vector<InstructionSample> candidates;
  for (const auto& p : filtered.kept) {
    Document doc;
    doc.id = p.id;
    doc.text = concat_pair(p.comment, p.reply, config);
    doc.language = Language::EN;
    doc.source = Source::REDDIT;
    LabelRecord label;
    label.doc_id = p.id;
    label.pcl = p.label == PairLabel::PCL;
    candidates.push_back(build_sample(doc, label, intensity_for(p.id, options),
                                      options.with_intensity, config, "td"));
  }
  finish(result, std::move(candidates), config);
  return result;
}

void to_json(json& j, const InstructionSample& s) {
  json meta = json::object();
  meta["source"] = s.meta.source;
  meta["doc_id"] = s.meta.doc_id;
  meta["language"] = to_string(s.language);
  if (s.meta.intensity) meta["intensity"] = to_string(*s.meta.intensity);
  if (!s.meta.subcategories.empty()) {
    json subs = json::array();
    for (auto sub : s.meta.subcategories) subs.push_back(to_string(sub));
    meta["subcategories"] = std::move(subs);
  }
  j = json::object();
  j["instruction"] = s.instruction;
  j["input"] = s.input;
  j["output"] = s.output;
  j["meta"] = std::move(meta);
}

std::string serialize_samples(const std::vector<InstructionSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += json(s).dump();
    out.push_back('\n');
  }
  return out;
}

void save_samples(const std::vector<InstructionSample>& samples,
                  const std::filesystem::path& path) {
  write_file_atomic(path, serialize_samples(samples));
}

std::vector<InstructionSample> load_samples(const std::filesystem::path& path,
                                            const TemplateConfig& config) {
  std::vector<InstructionSample> out;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    try {
      const json j = json::parse(line);
      InstructionSample s;
      s.instruction = j.at("instruction").get<std::string>();
      s.input = j.at("input").get<std::string>();
      s.output = j.at("output").get<std::string>();
      const json& meta = j.at("meta");
      s.language = parse_enum<Language>(meta.at("language").get<std::string>());
      s.meta.source = meta.at("source").get<std::string>();
      s.meta.doc_id = meta.at("doc_id").get<std::string>();
      if (meta.contains("intensity")) {
        s.meta.intensity = parse_enum<Intensity>(meta.at("intensity").get<std::string>());
      }
      if (meta.contains("subcategories")) {
        for (const auto& sub : meta.at("subcategories")) {
          s.meta.subcategories.insert(parse_enum<Subcategory>(sub.get<std::string>()));
        }
      }
      validate(s, config);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return out;
}

}  // namespace pclkit
