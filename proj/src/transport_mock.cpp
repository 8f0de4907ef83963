// Scripted stand-in for an OpenAI-compatible endpoint. Each script line is a
// rule; the first rule whose filters match a request produces the response.
//
// Filters: "fingerprint" (gateway cache key of the request), "path",
// "model", "all_contains" (substrings of the request text).
// Responses: "status" (+ "fail_times"), "text", "sequence" (one entry per
// firing, last one repeats), "hash_choice",
// "echo_after" (+ "until"), "permutation_after", "logprobs",
// "synthetic_logprobs", "embedding": "hash" (+ "dim"), "raw".
// Optional "delay_ms" sleeps before answering.

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/error.hpp"
#include "sure/gateway.hpp"
#include "sure/rng.hpp"
#include "sure/util.hpp"

namespace sure {

using nlohmann::json;

namespace {

struct Rule {
  json spec;
  std::size_t fired = 0;
};

std::uint64_t hash_u64(std::string_view s) {
  const std::string hex = sha256_hex(s);
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::string request_text(const std::string& path, const json& req) {
  if (path == "chat/completions") {
    const auto& msgs = req.at("messages");
    return msgs.empty() ? std::string() : msgs.back().value("content", std::string());
  }
  if (path == "completions") return req.value("prompt", std::string());
  if (path == "embeddings") {
    std::string joined;
    for (const auto& s : req.at("input")) joined += s.get<std::string>() + "\n";
    return joined;
  }
  return {};
}

// Splits text into tokens that carry their leading whitespace.
std::vector<std::pair<std::size_t, std::string>> whitespace_tokens(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
    out.emplace_back(start, text.substr(start, i - start));
  }
  return out;
}

json completion_with_logprobs(const std::string& model, const std::string& prompt,
                              const std::vector<std::string>& tail_tokens,
                              const std::vector<json>& tail_logprobs) {
  std::size_t tail_len = 0;
  for (const auto& t : tail_tokens) tail_len += t.size();
  json tokens = json::array();
  json lps = json::array();
  json offsets = json::array();
  std::size_t pos = 0;
  if (tail_len < prompt.size()) {
    tokens.push_back(prompt.substr(0, prompt.size() - tail_len));
    lps.push_back(nullptr);
    offsets.push_back(0);
    pos = prompt.size() - tail_len;
  }
  for (std::size_t i = 0; i < tail_tokens.size(); ++i) {
    tokens.push_back(tail_tokens[i]);
    lps.push_back(tail_logprobs[i]);
    offsets.push_back(pos);
    pos += tail_tokens[i].size();
  }
  return json{{"object", "text_completion"},
              {"model", model},
              {"choices", json::array({json{{"index", 0},
                                            {"text", prompt},
                                            {"logprobs", json{{"tokens", tokens},
                                                              {"token_logprobs", lps},
                                                              {"text_offset", offsets}}}}})},
              {"usage", json{{"prompt_tokens", (prompt.size() + 3) / 4}}}};
}

json chat_completion(const std::string& model, const std::string& content) {
  return json{{"object", "chat.completion"},
              {"model", model},
              {"choices", json::array({json{{"index", 0},
                                            {"message", json{{"role", "assistant"},
                                                             {"content", content}}},
                                            {"finish_reason", "stop"}}})}};
}

class MockTransport final : public Transport {
public:
  explicit MockTransport(const std::filesystem::path& script) {
    const std::string raw = read_file(script);
    id_ = "mock:" + sha256_hex(raw).substr(0, 16);
    for (auto& row : read_jsonl(script)) rules_.push_back(Rule{std::move(row), 0});
  }

  HttpResponse post(const std::string& path, const std::string& body) override {
    const json req = json::parse(body);
    const std::string model = req.value("model", std::string());
    const std::string text = request_text(path, req);
    const std::string fingerprint = LlmGateway::cache_key(id_, path, req, 0);

    Rule* chosen = nullptr;
    std::size_t fired = 0;
    {
      std::lock_guard lock(mutex_);
      for (auto& rule : rules_) {
        if (!matches(rule, path, model, text, fingerprint)) continue;
        const auto fail_times = rule.spec.value("fail_times", -1);
        if (rule.spec.contains("status") && fail_times >= 0 &&
            rule.fired >= static_cast<std::size_t>(fail_times)) {
          continue;
        }
        fired = ++rule.fired;
        chosen = &rule;
        break;
      }
    }
    if (!chosen) return HttpResponse{404, R"({"error":"no mock rule matched"})"};
    const json& spec = chosen->spec;
    if (spec.contains("delay_ms")) {
      std::this_thread::sleep_for(std::chrono::milliseconds(spec.at("delay_ms").get<int>()));
    }
    if (spec.contains("status")) {
      return HttpResponse{spec.at("status").get<int>(), R"({"error":"scripted failure"})"};
    }
    if (spec.contains("raw")) return HttpResponse{200, spec.at("raw").dump()};
    return HttpResponse{200, respond(spec, path, req, model, text, fired).dump()};
  }

  std::string endpoint_id() const override { return id_; }

private:
  static bool matches(const Rule& rule, const std::string& path, const std::string& model,
                      const std::string& text, const std::string& fingerprint) {
    const json& s = rule.spec;
    if (s.contains("fingerprint") && s.at("fingerprint").get<std::string>() != fingerprint) {
      return false;
    }
    if (s.contains("path") && s.at("path").get<std::string>() != path) return false;
    if (s.contains("model") && s.at("model").get<std::string>() != model) return false;
    if (s.contains("all_contains")) {
      for (const auto& needle : s.at("all_contains")) {
        if (text.find(needle.get<std::string>()) == std::string::npos) return false;
      }
    }
    return true;
  }

  static json respond(const json& spec, const std::string& path, const json& req,
                      const std::string& model, const std::string& text,
                      std::size_t fired) {
    if (path == "embeddings" || spec.contains("embedding")) {
      const auto dim = spec.value("dim", 8);
      json data = json::array();
      std::size_t idx = 0;
      for (const auto& input : req.at("input")) {
        SplitMix64 rng(hash_u64(model + "\x1f" + input.get<std::string>()));
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
        data.push_back(json{{"index", idx++}, {"embedding", v}});
      }
      return json{{"object", "list"}, {"data", data}, {"model", model}};
    }
    if (spec.contains("logprobs")) {
      const auto& lp = spec.at("logprobs");
      return completion_with_logprobs(model, text, lp.at("tokens").get<std::vector<std::string>>(),
                                      lp.at("logprobs").get<std::vector<json>>());
    }
    if (spec.contains("synthetic_logprobs")) {
      std::vector<std::string> toks;
      std::vector<json> lps;
      bool first = true;
      for (const auto& [off, tok] : whitespace_tokens(text)) {
        toks.push_back(tok);
        if (first) {
          lps.push_back(nullptr);
        } else {
          const auto h = hash_u64(model + "\x1f" + text.substr(0, off) + "\x1f" + tok);
          lps.push_back(-(0.05 + static_cast<double>(h % 1000) / 400.0));
        }
        first = false;
      }
      return completion_with_logprobs(model, text, toks, lps);
    }
    if (path == "completions") return completion_with_logprobs(model, text, {}, {});

    std::string content;
    if (spec.contains("text")) {
      content = spec.at("text").get<std::string>();
    } else if (spec.contains("sequence")) {
      const auto& seq = spec.at("sequence");
      content = seq.at(std::min(fired, seq.size()) - 1).get<std::string>();
    } else if (spec.contains("hash_choice")) {
      const auto& choices = spec.at("hash_choice");
      content = choices.at(hash_u64(model + "\n" + text) % choices.size()).get<std::string>();
    } else if (spec.contains("echo_after")) {
      const auto marker = spec.at("echo_after").get<std::string>();
      const auto pos = text.rfind(marker);
      content = pos == std::string::npos ? text : text.substr(pos + marker.size());
      if (spec.contains("until")) {
        const auto cut = content.find(spec.at("until").get<std::string>());
        if (cut != std::string::npos) content = content.substr(0, cut);
      }
    } else if (spec.contains("permutation_after")) {
      const auto marker = spec.at("permutation_after").get<std::string>();
      const auto pos = text.rfind(marker);
      std::size_t n = 0;
      if (pos != std::string::npos) {
        std::size_t i = pos + marker.size();
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
          n = n * 10 + static_cast<std::size_t>(text[i] - '0');
          ++i;
        }
      }
      content = "[";
      for (std::size_t i = 0; i < n; ++i) {
        if (i) content += ", ";
        content += std::to_string(n - 1 - i);
      }
      content += "]";
    }
    return chat_completion(model, content);
  }

  std::string id_;
  std::mutex mutex_;
  std::vector<Rule> rules_;
};

}  // namespace

std::unique_ptr<Transport> make_mock_transport(const std::filesystem::path& script) {
  return std::make_unique<MockTransport>(script);
}

}  // namespace sure
