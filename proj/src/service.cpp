#include "pclkit/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <regex>

#include "pclkit/instruct.hpp"
#include "pclkit/io.hpp"

namespace pclkit {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

struct HttpError {
  int status;
  std::string message;
  std::vector<FieldError> fields;
};

json error_body(const std::string& message, const std::vector<FieldError>& fields) {
  json errors = json::array();
  for (const auto& f : fields) errors.push_back({{"field", f.field}, {"reason", f.reason}});
  return {{"error", message}, {"errors", std::move(errors)}};
}

int status_for(SessionError::Kind kind) {
  using Kind = SessionError::Kind;
  switch (kind) {
    case Kind::UNKNOWN_ANNOTATOR:
    case Kind::UNKNOWN_DOCUMENT: return 404;
    case Kind::NOT_ASSIGNED:
    case Kind::FORBIDDEN: return 403;
    case Kind::LOCKED:
    case Kind::NOT_READY: return 409;
    case Kind::INVALID_LABEL: return 422;
  }
  return 400;
}

bool valid_id(const std::string& id) {
  static const std::regex kId("[A-Za-z0-9_.-]{1,128}");
  return std::regex_match(id, kId) && id != "." && id != "..";
}

std::string require_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) throw HttpError{400, std::string("missing query parameter '") + name + "'", {}};
  return req.get_param_value(name);
}

json parse_body(const httplib::Request& req) {
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) throw HttpError{400, "request body must be a JSON object", {}};
    return body;
  } catch (const json::exception& e) {
    throw HttpError{400, std::string("malformed JSON body: ") + e.what(), {}};
  }
}

std::string body_string(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) {
    throw HttpError{422, std::string("field '") + name + "' must be a string", {{name, "required string"}}};
  }
  return it->get<std::string>();
}

// Record from a request body. Missing identity fields default to the
// request's doc and the caller; mismatches are left for the session to reject.
LabelRecord record_from(const json& body, const std::string& doc_id, const std::string& caller) {
  auto it = body.find("record");
  if (it == body.end() || !it->is_object()) {
    throw HttpError{422, "field 'record' must be an object", {{"record", "required object"}}};
  }
  json record = *it;
  if (!record.contains("doc_id")) record["doc_id"] = doc_id;
  if (!record.contains("annotator_id")) record["annotator_id"] = caller;
  LabelRecord out;
  try {
    out = record.get<LabelRecord>();
  } catch (const ValidationError& e) {
    throw HttpError{422, e.what(), {{"record", e.what()}}};
  } catch (const json::exception& e) {
    throw HttpError{422, e.what(), {{"record", e.what()}}};
  }
  if (out.doc_id != doc_id) {
    throw HttpError{422, "record doc_id differs from request doc_id", {{"doc_id", "mismatch"}}};
  }
  return out;
}

json layer_schema(Language language) {
  const auto& tmpl = default_template_config().language(language);
  json subs = json::array();
  for (auto s : all_values<Subcategory>()) {
    subs.push_back({{"value", to_string(s)}, {"label", tmpl.subcategory_names.at(s)}});
  }
  json groups = json::array();
  for (auto g : all_values<GroupTag>()) groups.push_back(to_string(g));
  json levels = json::array();
  for (auto i : {Intensity::MILD, Intensity::MODERATE, Intensity::SEVERE}) {
    levels.push_back({{"value", to_string(i)}, {"label", tmpl.level_names.at(i)}});
  }
  return json::array({
      {{"field", "pcl"}, {"type", "boolean"}, {"label", tmpl.positive_token + " / " + tmpl.negative_token}},
      {{"field", "subcategories"}, {"type", "multi"}, {"requires", "pcl"}, {"min", 1}, {"options", subs}},
      {{"field", "group"}, {"type", "single"}, {"requires", "pcl"}, {"options", groups}},
      {{"field", "intensity"}, {"type", "single"}, {"requires", "pcl"}, {"options", levels}},
  });
}

json tips(Language language) {
  if (language == Language::ZH) {
    return {"先判断是否存在居高临下或施舍式的同情，再选择细分类别。",
            "无法确定时按字面含义标注，由校对员处理分歧。",
            "非PCL文本不需要填写类别、群体和强度。"};
  }
  return {"Decide the binary layer first; lower layers open only for PCL.",
          "Pick every subcategory that applies; at least one is required.",
          "Label what the text says, not what the author may have meant."};
}

}  // namespace

std::vector<ApiToken> load_tokens(const std::filesystem::path& path) {
  std::vector<ApiToken> out;
  std::set<std::string> seen;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (line.empty() || line.front() == '#') return;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.emplace_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      throw ParseError(path.string(), number, "expected token<TAB>annotator<TAB>role");
    }
    if (!seen.insert(cols[0]).second) throw ParseError(path.string(), number, "duplicate token");
    try {
      out.push_back({cols[0], cols[1], parse_enum<ApiRole>(cols[2])});
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return out;
}

std::filesystem::path session_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + std::string(kSessionSuffix));
}

struct AnnotationService::Entry {
  explicit Entry(SessionState state) : session(std::move(state)) {}
  std::mutex write_mutex;  // orders mutation + flush so the file never goes backwards
  AnnotationSession session;
};

AnnotationService::AnnotationService(ServiceConfig config, std::vector<ApiToken> tokens)
    : config_(std::move(config)) {
  if (config_.runs_dir.empty()) config_.runs_dir = config_.sessions_dir / "runs";
  for (auto& t : tokens) {
    auto key = t.token;
    tokens_.emplace(std::move(key), std::move(t));
  }
}

AnnotationService::~AnnotationService() = default;

std::shared_ptr<AnnotationService::Entry> AnnotationService::entry(const std::string& session_id) {
  if (!valid_id(session_id)) throw HttpError{400, "malformed session id", {}};
  std::lock_guard lock(sessions_mutex_);
  if (auto it = sessions_.find(session_id); it != sessions_.end()) return it->second;
  auto path = session_path(config_.sessions_dir, session_id);
  if (!std::filesystem::exists(path)) throw HttpError{404, "unknown session '" + session_id + "'", {}};
  auto state = load_session(path);
  if (state.session_id != session_id) {
    throw HttpError{500, "session file id does not match its name", {}};
  }
  auto e = std::make_shared<Entry>(std::move(state));
  sessions_.emplace(session_id, e);
  return e;
}

SessionState AnnotationService::snapshot(const std::string& session_id) {
  try {
    return entry(session_id)->session.snapshot();
  } catch (const HttpError& e) {
    throw ValidationError(e.message);
  }
}

void AnnotationService::attach(httplib::Server& server) {
  auto authorize = [this](const httplib::Request& req,
                          std::initializer_list<ApiRole> roles = {}) -> const ApiToken& {
    auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.rfind(kBearer, 0) != 0) throw HttpError{401, "missing bearer token", {}};
    auto it = tokens_.find(header.substr(kBearer.size()));
    if (it == tokens_.end()) throw HttpError{401, "invalid token", {}};
    if (roles.size() && std::find(roles.begin(), roles.end(), it->second.role) == roles.end()) {
      throw HttpError{403, "role " + std::string(to_string(it->second.role)) +
                               " may not use this endpoint", {}};
    }
    return it->second;
  };

  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      auto fail = [&](int status, const std::string& msg, const std::vector<FieldError>& fields) {
        res.status = status;
        res.set_content(error_body(msg, fields).dump() + "\n", kJson);
      };
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        fail(e.status, e.message, e.fields);
      } catch (const SessionError& e) {
        fail(status_for(e.kind()), e.what(), e.fields());
      } catch (const ValidationError& e) {
        fail(422, e.what(), {});
      } catch (const std::exception& e) {
        fail(500, e.what(), {});
      }
    };
  };

  // Runs a mutation and flushes the session file while still holding the
  // entry's write lock.
  auto mutate = [this](const std::string& session_id, auto&& fn) {
    auto e = entry(session_id);
    std::lock_guard lock(e->write_mutex);
    auto result = fn(e->session);
    save_session(e->session.snapshot(), session_path(config_.sessions_dir, session_id));
    return result;
  };

  server.Get("/api/tasks/next", guarded([this, authorize](const auto& req, auto& res) {
    const auto& token = authorize(req);
    auto annotator = require_param(req, "annotator");
    if (token.role != ApiRole::ADMIN && token.annotator_id != annotator) {
      throw HttpError{403, "token does not belong to annotator '" + annotator + "'", {}};
    }
    auto state = entry(require_param(req, "session"))->session.snapshot();
    auto doc_id = next_task(state, annotator);
    if (!doc_id) {
      res.status = 204;
      return;
    }
    const Document* doc = nullptr;
    std::size_t submitted = 0;
    for (const auto& d : state.docs) {
      if (!state.is_assigned(d.id, annotator)) continue;
      if (d.id == *doc_id) doc = &d;
      submitted += state.status(d.id, annotator) == TaskStatus::SUBMITTED;
    }
    const std::size_t assigned = state.workload(annotator);
    json body = {
        {"session", state.session_id},
        {"doc", {{"id", doc->id}, {"text", doc->text}, {"language", to_string(doc->language)},
                 {"source", to_string(doc->source)}}},
        {"layer_schema", layer_schema(doc->language)},
        {"tips", tips(doc->language)},
        {"batch", {{"size", config_.batch_size},
                   {"index", submitted / config_.batch_size},
                   {"position", submitted % config_.batch_size}}},
        {"progress", {{"submitted", submitted}, {"assigned", assigned}}},
    };
    res.set_content(body.dump() + "\n", kJson);
  }));

  server.Post("/api/labels", guarded([this, authorize, mutate](const auto& req, auto& res) {
    const auto& token = authorize(req, {ApiRole::PRIMARY});
    auto body = parse_body(req);
    auto session_id = body_string(body, "session");
    auto doc_id = body_string(body, "doc_id");
    auto record = record_from(body, doc_id, token.annotator_id);
    auto stored = mutate(session_id, [&](AnnotationSession& s) {
      return s.submit(token.annotator_id, record);
    });
    res.set_content(json{{"status", "SUBMITTED"}, {"record", stored}}.dump() + "\n", kJson);
  }));

  server.Post("/api/adjudication/resolve",
              guarded([this, authorize, mutate](const auto& req, auto& res) {
    const auto& token = authorize(req, {ApiRole::PROOFREADER});
    auto body = parse_body(req);
    auto session_id = body_string(body, "session");
    auto doc_id = body_string(body, "doc_id");
    auto record = record_from(body, doc_id, token.annotator_id);
    auto stored = mutate(session_id, [&](AnnotationSession& s) {
      return s.resolve(token.annotator_id, record);
    });
    res.set_content(json{{"status", "RESOLVED"}, {"record", stored}}.dump() + "\n", kJson);
  }));

  server.Post("/api/admin/lock", guarded([this, authorize, mutate](const auto& req, auto& res) {
    authorize(req, {ApiRole::ADMIN});
    auto session_id = body_string(parse_body(req), "session");
    mutate(session_id, [](AnnotationSession& s) {
      s.lock();
      return 0;
    });
    res.set_content(json{{"status", "LOCKED"}, {"session", session_id}}.dump() + "\n", kJson);
  }));

  server.Get("/api/adjudication", guarded([this, authorize](const auto& req, auto& res) {
    authorize(req, {ApiRole::PROOFREADER, ApiRole::ADMIN});
    auto queue = adjudication_queue(entry(require_param(req, "session"))->session.snapshot());
    std::size_t limit = queue.size();
    if (req.has_param("limit")) {
      try {
        limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        throw HttpError{400, "limit must be a positive integer", {}};
      }
      if (limit == 0) throw HttpError{400, "limit must be a positive integer", {}};
    }
    std::size_t begin = 0;
    if (req.has_param("cursor")) {
      auto cursor = req.get_param_value("cursor");
      auto it = std::find_if(queue.begin(), queue.end(),
                             [&](const AdjudicationItem& i) { return i.doc_id == cursor; });
      if (it == queue.end()) throw HttpError{400, "stale or unknown cursor '" + cursor + "'", {}};
      begin = static_cast<std::size_t>(it - queue.begin()) + 1;
    }
    const std::size_t end = std::min(queue.size(), begin + std::min(limit, queue.size() - begin));
    json items = json::array();
    for (std::size_t i = begin; i < end; ++i) items.push_back(queue[i]);
    json next = end < queue.size() ? json(queue[end - 1].doc_id) : json(nullptr);
    res.set_content(json{{"items", std::move(items)}, {"next_cursor", std::move(next)}}.dump() + "\n",
                    kJson);
  }));

  server.Get("/api/reports/iaa", guarded([this, authorize](const auto& req, auto& res) {
    authorize(req);
    auto state = entry(require_param(req, "session"))->session.snapshot();
    res.set_content(iaa_summary(compute_iaa(state)), kJson);
  }));

  server.Get("/api/reports/eval", guarded([this, authorize](const auto& req, auto& res) {
    authorize(req);
    auto run = require_param(req, "run");
    if (!valid_id(run)) throw HttpError{400, "malformed run id", {}};
    auto path = config_.runs_dir / run / std::string(kEvalSummaryName);
    if (!std::filesystem::exists(path)) throw HttpError{404, "unknown run '" + run + "'", {}};
    res.set_content(read_file(path), kJson);
  }));

  if (config_.static_dir) {
    if (!server.set_mount_point("/", config_.static_dir->string())) {
      throw IoError("static directory not found: " + config_.static_dir->string());
    }
  }
}

void serve(const ServiceConfig& config, std::vector<ApiToken> tokens, const std::string& host,
           int port) {
  if (!std::filesystem::is_directory(config.sessions_dir)) {
    throw IoError("sessions directory not found: " + config.sessions_dir.string());
  }
  AnnotationService service(config, std::move(tokens));
  httplib::Server server;
  service.attach(server);
  if (!server.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace pclkit
