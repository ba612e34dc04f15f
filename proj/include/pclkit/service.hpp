#pragma once

// HTTP front end over annotation sessions and run reports. Every /api
// endpoint requires `Authorization: Bearer <token>`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pclkit/annotation.hpp"

namespace httplib {
class Server;
}

namespace pclkit {

enum class ApiRole { PRIMARY, PROOFREADER, ADMIN };
template <>
struct EnumNames<ApiRole> {
  static constexpr std::string_view kType = "ApiRole";
  static constexpr auto kNames = std::to_array<std::string_view>({"PRIMARY", "PROOFREADER", "ADMIN"});
};

struct ApiToken {
  std::string token;
  std::string annotator_id;
  ApiRole role = ApiRole::PRIMARY;
};

/// `token<TAB>annotator_id<TAB>role` per line; '#' starts a comment line.
std::vector<ApiToken> load_tokens(const std::filesystem::path& path);

struct ServiceConfig {
  std::filesystem::path sessions_dir;  // <id>.session.json files
  std::filesystem::path runs_dir;      // <run>/eval_summary.json
  std::optional<std::filesystem::path> static_dir;
  std::size_t batch_size = 50;
};

inline constexpr std::string_view kSessionSuffix = ".session.json";
inline constexpr std::string_view kEvalSummaryName = "eval_summary.json";

std::filesystem::path session_path(const std::filesystem::path& dir, const std::string& id);

/// Routes and session cache. Sessions load lazily from disk and are written
/// back atomically after every accepted mutation, before the response.
class AnnotationService {
 public:
  AnnotationService(ServiceConfig config, std::vector<ApiToken> tokens);
  ~AnnotationService();

  void attach(httplib::Server& server);

  /// Current state of a session (loads it if needed). Throws
  /// ValidationError when the id is malformed or the file is missing.
  SessionState snapshot(const std::string& session_id);

 private:
  struct Entry;
  std::shared_ptr<Entry> entry(const std::string& session_id);

  ServiceConfig config_;
  std::map<std::string, ApiToken> tokens_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Blocks serving on host:port until the process is stopped.
void serve(const ServiceConfig& config, std::vector<ApiToken> tokens, const std::string& host,
           int port);

}  // namespace pclkit
