#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/gateway.hpp"
#include "sure/util.hpp"

namespace sure::testing {

inline std::filesystem::path data_dir() { return SURE_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sure_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline std::filesystem::path write_jsonl(const std::filesystem::path& path,
                                         const std::vector<nlohmann::json>& rows) {
  write_file_atomic(path, to_jsonl(rows));
  return path;
}

inline std::map<Role, std::string> default_models() {
  return {{Role::Reader, "reader"},
          {Role::Perturber, "perturber"},
          {Role::Nli, "nli"},
          {Role::Judge, "judge"},
          {Role::Embedder, "embedder"}};
}

/// Gateway over a scripted mock endpoint written into `dir`.
inline std::unique_ptr<LlmGateway> mock_gateway(const TempDir& dir,
                                                const std::vector<nlohmann::json>& rules,
                                                GatewayConfig cfg = {}) {
  static std::atomic<int> n{0};
  const auto script = write_jsonl(dir / ("mock_" + std::to_string(n++) + ".jsonl"), rules);
  if (cfg.models.empty()) cfg.models = default_models();
  cfg.backoff_base = std::chrono::milliseconds(1);
  return std::make_unique<LlmGateway>(cfg, make_mock_transport(script));
}

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len = 8) {
  static const char* letters = "abcdefghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, 25);
  std::string w;
  const auto l = len(rng);
  for (std::size_t i = 0; i < l; ++i) w += letters[pick(rng)];
  return w;
}

}  // namespace sure::testing
