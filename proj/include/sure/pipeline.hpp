#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/evaluate.hpp"
#include "sure/gateway.hpp"
#include "sure/perturb.hpp"
#include "sure/stats.hpp"

namespace sure {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Stage {
  Ingest,
  Retrieve,
  Perturb,
  Preserve,
  Classify,
  Evaluate,
  Report,
  Distill,
  ExportTrain,
  Prelim,
};

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);
std::vector<Stage> stage_dependencies(Stage s);

struct PipelineConfig {
  // endpoint
  std::string endpoint;  // http(s) base URL or mock:<script.jsonl>
  std::string api_key_env;
  std::chrono::milliseconds timeout{120000};
  // models and decoding
  std::map<Role, std::string> models;
  GenConfig gen;
  std::size_t max_in_flight = 8;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::optional<std::filesystem::path> cache_path;
  // inputs / outputs
  std::filesystem::path queries;
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> instances;
  std::optional<std::filesystem::path> annotations;
  std::filesystem::path workdir = "work";
  std::optional<std::filesystem::path> instances_out;  // retrieve --out *.jsonl
  // behaviour
  std::uint64_t seed = 0;
  AnswerMatchPolicy policy;
  std::size_t k = 3;
  std::vector<Variant> variants;
  MetadataConfig metadata;
  std::string rank_example{kDefaultRankExample};
  int rank_retries = 3;
  int perturb_max_tokens = 1024;
  bool nli_all = false;
  JudgeMode judge = JudgeMode::String;
  std::vector<std::string> distill_models;
  std::size_t quota = 100;
  std::uint64_t distill_seed = 0;
  std::string export_mode = "both";  // sft | dpo | both
  std::vector<FeatureKind> features;
  std::uint64_t control_seed = 0;

  /// Relative paths are resolved against `base_dir`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  /// Effective settings, without paths and without secrets.
  nlohmann::json snapshot() const;
  std::string reader() const;
  /// Reader first, then distillation models, deduplicated.
  std::vector<std::string> eval_models() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

/// Comma-separated category keys (style, source, logic, format, meta) or
/// variant keys.
std::vector<Variant> parse_kinds(std::string_view csv);

struct StageOutput {
  Stage stage;
  std::vector<std::filesystem::path> files;
  GatewayStats stats;
  std::vector<std::string> notes;
};

/// Holds the workdir lock for its lifetime; one stage at a time per workdir.
class Pipeline {
public:
  explicit Pipeline(PipelineConfig cfg, std::unique_ptr<Transport> transport = nullptr);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  StageOutput run(Stage stage);
  const std::string& run_id() const noexcept { return run_id_; }
  const PipelineConfig& config() const noexcept { return cfg_; }
  LlmGateway& gateway();
  nlohmann::json manifest() const { return manifest_; }

private:
  std::filesystem::path out(std::string_view name) const { return cfg_.workdir / name; }
  void require(Stage stage) const;
  void write_output(StageOutput& so, const std::filesystem::path& path, std::string_view contents);
  void mark_complete(const StageOutput& so);
  void save_manifest();

  QuerySet load_work_queries() const;
  Corpus load_work_corpus() const;
  InstanceSet load_work_instances(const QuerySet& q, const Corpus& c) const;
  std::vector<PerturbedPair> load_pairs(const std::filesystem::path& path) const;
  std::map<std::string, std::vector<ComparisonRecord>> load_results() const;

  void ingest(StageOutput& so);
  void retrieve(StageOutput& so);
  void perturb(StageOutput& so);
  void preserve(StageOutput& so);
  void classify(StageOutput& so);
  void evaluate(StageOutput& so);
  void report(StageOutput& so);
  void distill(StageOutput& so);
  void export_train(StageOutput& so);
  void prelim(StageOutput& so);

  PipelineConfig cfg_;
  std::unique_ptr<Transport> pending_transport_;
  std::unique_ptr<LlmGateway> gateway_;
  std::string run_id_;
  nlohmann::json manifest_;
  int lock_fd_ = -1;
};

// ---- report emission -------------------------------------------------------

std::string csv_field(std::string_view s);  // RFC 4180 quoting when needed
std::string format_fixed2(double v);

struct ReportBundle {
  std::string csv;
  std::string radar_json;
  std::string markdown;
};

/// `reader` selects the model for report.csv; radar.json covers every model
/// in `results`.
ReportBundle emit_report(const std::map<std::string, std::vector<ComparisonRecord>>& results,
                         const std::string& reader);

std::string model_file_stem(std::string_view model);

}  // namespace sure
