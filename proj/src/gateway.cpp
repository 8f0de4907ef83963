#include "sure/gateway.hpp"

#include <cmath>
#include <random>
#include <thread>

#include "sure/error.hpp"
#include "sure/util.hpp"

namespace sure {

using nlohmann::json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Reader: return "reader";
    case Role::Perturber: return "perturber";
    case Role::Nli: return "nli";
    case Role::Judge: return "judge";
    case Role::Embedder: return "embedder";
  }
  return "reader";
}

Role parse_role(std::string_view name) {
  for (Role r : {Role::Reader, Role::Perturber, Role::Nli, Role::Judge, Role::Embedder}) {
    if (role_name(r) == name) return r;
  }
  throw ConfigError("unknown model role: " + std::string(name));
}

json GenConfig::to_json() const {
  json j{{"temperature", temperature}, {"max_tokens", max_tokens}};
  if (!stop.empty()) j["stop"] = stop;
  return j;
}

double ScoredContinuation::total() const {
  double s = 0.0;
  for (double lp : logprobs) s += lp;
  return s;
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    std::ifstream in(*path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      // A torn final record from an interrupted run is skipped.
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("response")) continue;
      entries_[j["key"].get<std::string>()] = j["response"].get<std::string>();
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
  out_.open(*path_, std::ios::binary | std::ios::app);
  if (!out_) throw ConfigError("cannot open cache file " + path_->string());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& response) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(key, response).second) return;
  if (path_) {
    out_ << json{{"key", key}, {"response", response}}.dump() << '\n';
    out_.flush();
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// InFlightLimiter

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return held_ < limit_; });
  ++held_;
  peak_ = std::max(peak_, held_);
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --held_;
  }
  cv_.notify_one();
}

std::size_t InFlightLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

// ---------------------------------------------------------------------------
// LlmGateway

LlmGateway::LlmGateway(GatewayConfig cfg, std::unique_ptr<Transport> transport)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      cache_(cfg_.cache_path ? std::make_unique<ResponseCache>(*cfg_.cache_path)
                             : std::make_unique<ResponseCache>()),
      limiter_(cfg_.max_in_flight) {
  if (!transport_) throw ConfigError("gateway requires a transport");
}

bool LlmGateway::has_model(Role role) const {
  auto it = cfg_.models.find(role);
  return it != cfg_.models.end() && !it->second.empty();
}

ModelRef LlmGateway::model(Role role) const {
  if (!has_model(role)) {
    throw ConfigError("no model bound for role '" + std::string(role_name(role)) + "'");
  }
  return ModelRef{cfg_.models.at(role), role};
}

std::string LlmGateway::cache_key(const std::string& endpoint_id, const std::string& path,
                                  const json& body, int attempt) {
  std::string material = endpoint_id + "\n" + path + "\n" + body.dump();
  if (attempt > 0) material += "\n#attempt=" + std::to_string(attempt);
  return sha256_hex(material);
}

GatewayStats LlmGateway::stats() const {
  return GatewayStats{network_calls_.load(), cache_hits_.load(), retries_.load()};
}

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

json parse_body(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("endpoint returned a non-JSON body");
  }
  return j;
}

}  // namespace

json LlmGateway::request(const std::string& path, const json& body, int attempt) {
  const std::string key = cache_key(transport_->endpoint_id(), path, body, attempt);
  std::promise<std::string> promise;
  {
    std::unique_lock lock(flights_mutex_);
    if (auto hit = cache_->get(key)) {
      ++cache_hits_;
      lock.unlock();
      return parse_body(*hit);
    }
    if (auto it = flights_.find(key); it != flights_.end()) {
      auto shared = it->second;
      lock.unlock();
      ++cache_hits_;
      return parse_body(shared.get());
    }
    flights_.emplace(key, promise.get_future().share());
  }
  auto land = [&] {
    std::lock_guard lock(flights_mutex_);
    flights_.erase(key);
  };
  try {
    std::string resp = fetch(path, body.dump());
    json parsed = parse_body(resp);
    cache_->put(key, resp);
    promise.set_value(resp);
    land();
    return parsed;
  } catch (...) {
    promise.set_exception(std::current_exception());
    land();
    throw;
  }
}

std::string LlmGateway::fetch(const std::string& path, const std::string& payload) {
  // Jitter only shapes sleep durations; it never reaches an output.
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  GatewayError last(GatewayError::Kind::Exhausted, 0, "no attempt made");
  const int attempts = 1 + std::max(0, cfg_.max_retries);
  for (int i = 0; i < attempts; ++i) {
    if (i > 0) {
      ++retries_;
      const auto base = cfg_.backoff_base.count() * (1LL << std::min(i - 1, 16));
      const auto jitter = cfg_.backoff_base.count() > 0
                              ? static_cast<long long>(jitter_rng() %
                                                       static_cast<unsigned long long>(
                                                           cfg_.backoff_base.count()))
                              : 0LL;
      std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter));
    }
    HttpResponse resp;
    try {
      limiter_.acquire();
      ++network_calls_;
      try {
        resp = transport_->post(path, payload);
      } catch (...) {
        limiter_.release();
        throw;
      }
      limiter_.release();
    } catch (const GatewayError& e) {
      last = e;
      continue;
    }
    if (resp.status >= 200 && resp.status < 300) return resp.body;
    if (!retryable_status(resp.status)) {
      throw GatewayError(GatewayError::Kind::Http, resp.status,
                         "HTTP " + std::to_string(resp.status) + " from " + path + ": " +
                             resp.body.substr(0, 200));
    }
    last = GatewayError(GatewayError::Kind::Http, resp.status,
                        "HTTP " + std::to_string(resp.status));
  }
  throw GatewayError(GatewayError::Kind::Exhausted, last.status(),
                     "retries exhausted for " + path + ": " + last.what());
}

std::string LlmGateway::chat(const ModelRef& model, const std::string& prompt,
                             const GenConfig& gen, int attempt) {
  json body = gen.to_json();
  body["model"] = model.name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  const json resp = request("chat/completions", body, attempt);
  try {
    const auto& msg = resp.at("choices").at(0).at("message");
    if (!msg.contains("content") || msg.at("content").is_null()) return {};
    return msg.at("content").get<std::string>();
  } catch (const json::exception&) {
    throw ProtocolError("chat response lacks choices[0].message.content");
  }
}

ScoredContinuation LlmGateway::score_continuation(const ModelRef& model,
                                                  const std::string& context,
                                                  const std::string& continuation) {
  if (continuation.empty()) return {};
  const std::string full = context + continuation;
  json body{{"model", model.name}, {"prompt", full},     {"max_tokens", 1},
            {"echo", true},        {"logprobs", 0},      {"temperature", 0.0}};
  const json resp = request("completions", body, 0);
  const json* lp = nullptr;
  try {
    lp = &resp.at("choices").at(0).at("logprobs");
  } catch (const json::exception&) {
    throw UnsupportedByEndpoint("completion response carries no logprobs");
  }
  if (lp->is_null() || !lp->contains("tokens") || !lp->contains("token_logprobs") ||
      !lp->contains("text_offset")) {
    throw UnsupportedByEndpoint("endpoint does not echo prompt logprobs with offsets");
  }
  const auto& tokens = lp->at("tokens");
  const auto& logprobs = lp->at("token_logprobs");
  const auto& offsets = lp->at("text_offset");
  if (tokens.size() != logprobs.size() || tokens.size() != offsets.size()) {
    throw ProtocolError("token/logprob/offset length mismatch in scoring response");
  }
  ScoredContinuation out;
  const std::size_t ctx_len = context.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto tok = tokens[i].get<std::string>();
    const auto off = offsets[i].get<std::size_t>();
    if (off >= full.size()) break;  // generated tokens
    if (off + tok.size() <= ctx_len) continue;
    if (logprobs[i].is_null()) {
      if (off == 0) continue;
      throw ProtocolError("null logprob inside the scored continuation");
    }
    const double v = logprobs[i].get<double>();
    if (!std::isfinite(v) || v > 0.0) throw ProtocolError("invalid logprob in scoring response");
    out.tokens.push_back(tok);
    out.logprobs.push_back(v);
  }
  return out;
}

std::vector<Vector> LlmGateway::embed(const ModelRef& model, const std::vector<std::string>& texts) {
  constexpr std::size_t kBatch = 64;
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += kBatch) {
    const std::size_t end = std::min(texts.size(), start + kBatch);
    json input = json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(texts[i]);
    const json resp = request("embeddings", json{{"model", model.name}, {"input", input}}, 0);
    if (!resp.contains("data") || !resp.at("data").is_array() ||
        resp.at("data").size() != end - start) {
      throw ProtocolError("embedding response size does not match request");
    }
    std::vector<Vector> batch(end - start);
    for (const auto& item : resp.at("data")) {
      const auto idx = item.value("index", std::size_t{0});
      if (idx >= batch.size()) throw ProtocolError("embedding index out of range");
      batch[idx] = item.at("embedding").get<Vector>();
    }
    for (auto& v : batch) out.push_back(std::move(v));
  }
  return out;
}

std::optional<std::size_t> LlmGateway::count_tokens(const ModelRef& model, const std::string& text) {
  json body{{"model", model.name}, {"prompt", text}, {"max_tokens", 1}, {"temperature", 0.0}};
  const json resp = request("completions", body, 0);
  if (resp.contains("usage") && resp.at("usage").contains("prompt_tokens") &&
      resp.at("usage").at("prompt_tokens").is_number_integer()) {
    return resp.at("usage").at("prompt_tokens").get<std::size_t>();
  }
  return std::nullopt;
}

}  // namespace sure
