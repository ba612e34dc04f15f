// HTTP side of the toxicity client. Kept apart from toxicity.cpp so only
// this translation unit pays for cpp-httplib.

#include <atomic>
#include <thread>

#include <httplib.h>

#include "pclkit/toxicity.hpp"

namespace pclkit {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint '" + url + "' must start with http:// or https://");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("endpoint scheme must be http or https");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == scheme_end + 3) throw ValidationError("endpoint has no host");
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Spaces request start times at least 1/rate apart across all workers.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second)
      : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / per_second))) {}

  void acquire() {
    std::chrono::steady_clock::time_point slot;
    {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_{};
};

bool is_transient(int status) { return status == 429 || status >= 500; }

ScoreOutcome score_one(const ScoringInput& input, const ExternalScorerConfig& config,
                       const Endpoint& endpoint, httplib::Client& client, RateLimiter& limiter,
                       ScoreCache& cache) {
  ScoreOutcome outcome;
  outcome.doc_id = input.doc_id;
  if (auto cached = cache.lookup(input.text)) {
    outcome.score = ToxicityScore{input.doc_id, *cached, ScoreOrigin::CACHE};
    return outcome;
  }

  const std::string body = json{{"text", input.text}}.dump();
  httplib::Headers headers;
  if (!config.credential.empty()) {
    headers.emplace("Authorization", "Bearer " + config.credential);
  }

  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(config.backoff_base * (1 << (attempt - 2)));
    }
    limiter.acquire();
    outcome.attempts = attempt;
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (is_transient(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      outcome.error = "doc '" + input.doc_id + "': HTTP " + std::to_string(res->status);
      return outcome;
    }
    try {
      const double score = extract_score(json::parse(res->body), config.score_field);
      cache.store(input.text, score);
      outcome.score = ToxicityScore{input.doc_id, score, ScoreOrigin::EXTERNAL};
    } catch (const std::exception& e) {
      outcome.error = "doc '" + input.doc_id + "': malformed response: " + e.what();
    }
    return outcome;
  }
  outcome.error = "doc '" + input.doc_id + "': gave up after " +
                  std::to_string(config.max_attempts) + " attempts (" + last_error + ")";
  return outcome;
}

}  // namespace

void ExternalScorerConfig::validate() const {
  split_endpoint(endpoint);
  if (!(requests_per_second > 0.0)) throw ValidationError("requests_per_second must be > 0");
  if (max_in_flight == 0) throw ValidationError("max_in_flight must be >= 1");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  if (score_field.empty()) throw ValidationError("score_field must be non-empty");
}

std::vector<ScoreOutcome> score_external(const std::vector<ScoringInput>& inputs,
                                         const ExternalScorerConfig& config, ScoreCache& cache) {
  config.validate();
  const Endpoint endpoint = split_endpoint(config.endpoint);
  RateLimiter limiter(config.requests_per_second);
  std::vector<ScoreOutcome> outcomes(inputs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    httplib::Client client(endpoint.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      outcomes[i] = score_one(inputs[i], config, endpoint, client, limiter, cache);
    }
  };

  const std::size_t n_workers = std::min(config.max_in_flight, inputs.size());
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
  for (auto& t : workers) t.join();
  return outcomes;
}

}  // namespace pclkit
