#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <future>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/retrieval.hpp"

namespace sure {

enum class Role { Reader, Perturber, Nli, Judge, Embedder };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct ModelRef {
  std::string name;
  Role role = Role::Reader;
};

struct GenConfig {
  double temperature = 0.1;
  int max_tokens = 64;
  std::vector<std::string> stop;

  nlohmann::json to_json() const;
};

/// Natural-log probabilities of the continuation tokens only.
struct ScoredContinuation {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;

  double total() const;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One POST round-trip to an OpenAI-compatible endpoint. Implementations
/// throw GatewayError{Transport|Timeout} when no HTTP status was obtained.
class Transport {
public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body) = 0;
  /// Stable identity of the endpoint; part of every cache key.
  virtual std::string endpoint_id() const = 0;
};

std::unique_ptr<Transport> make_http_transport(const std::string& base_url, std::string api_key,
                                               std::chrono::milliseconds timeout);
/// `script` is a JSONL rule file; see README "Mock endpoint".
std::unique_ptr<Transport> make_mock_transport(const std::filesystem::path& script);
/// "mock:<script.jsonl>" or an http(s) base URL. The API key is read from the
/// named environment variable, never from files.
std::unique_ptr<Transport> make_transport(const std::string& endpoint,
                                          const std::string& api_key_env,
                                          std::chrono::milliseconds timeout);

/// Append-only (key, response) log. Loaded fully at open; every put is
/// flushed before returning.
class ResponseCache {
public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& response);
  std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
};

struct GatewayConfig {
  std::map<Role, std::string> models;
  GenConfig gen;
  std::size_t max_in_flight = 8;
  std::optional<std::filesystem::path> cache_path;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
};

struct GatewayStats {
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
};

/// Counting semaphore that also records the peak number of holders.
class InFlightLimiter {
public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();
  std::size_t peak() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t held_ = 0;
  std::size_t peak_ = 0;
};

class LlmGateway {
public:
  LlmGateway(GatewayConfig cfg, std::unique_ptr<Transport> transport);

  bool has_model(Role role) const;
  /// Throws ConfigError if the role is unbound.
  ModelRef model(Role role) const;
  const GenConfig& gen() const noexcept { return cfg_.gen; }
  const GatewayConfig& config() const noexcept { return cfg_; }
  std::string endpoint_id() const { return transport_->endpoint_id(); }

  /// `attempt` > 0 makes the request distinct for caching, so a caller
  /// retrying after an unparseable completion gets a fresh sample.
  std::string chat(const ModelRef& model, const std::string& prompt, const GenConfig& gen,
                   int attempt = 0);
  std::string chat(const ModelRef& model, const std::string& prompt, int attempt = 0) {
    return chat(model, prompt, cfg_.gen, attempt);
  }

  /// Echo-logprob scoring of `continuation` given `context`.
  ScoredContinuation score_continuation(const ModelRef& model, const std::string& context,
                                        const std::string& continuation);

  std::vector<Vector> embed(const ModelRef& model, const std::vector<std::string>& texts);

  /// Prompt token count from the endpoint's usage report, if it gives one.
  std::optional<std::size_t> count_tokens(const ModelRef& model, const std::string& text);

  GatewayStats stats() const;
  std::size_t peak_in_flight() const { return limiter_.peak(); }

  static std::string cache_key(const std::string& endpoint_id, const std::string& path,
                               const nlohmann::json& body, int attempt);

private:
  nlohmann::json request(const std::string& path, const nlohmann::json& body, int attempt);
  std::string fetch(const std::string& path, const std::string& payload);

  GatewayConfig cfg_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<ResponseCache> cache_;
  InFlightLimiter limiter_;
  // Identical requests issued concurrently share one network call.
  std::mutex flights_mutex_;
  std::unordered_map<std::string, std::shared_future<std::string>> flights_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

}  // namespace sure
