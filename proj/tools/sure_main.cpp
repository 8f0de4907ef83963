// sure <stage> --config cfg.json [options]
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 missing
// dependency, 4 gateway retries exhausted.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "sure/error.hpp"
#include "sure/pipeline.hpp"
#include "sure/text.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::string> endpoint;
  std::optional<std::string> out;
  // retrieve
  std::optional<std::size_t> k;
  std::optional<std::string> queries, corpus, embeddings;
  // perturb
  std::optional<std::string> kinds;
  // distill
  std::optional<std::string> models;
  std::optional<std::size_t> quota;
  // export-train
  std::optional<std::string> mode;
  // prelim
  std::optional<std::string> features;
  std::optional<std::uint64_t> control_seed;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  return sure::text::split_words(t);
}

void apply(const Options& o, sure::Stage stage, sure::PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.distill_seed = *o.seed;
  }
  if (o.model) cfg.models[sure::Role::Reader] = *o.model;
  if (o.endpoint) {
    std::string e = *o.endpoint;
    if (sure::text::starts_with(e, "mock:")) e = "mock:" + fs::absolute(e.substr(5)).string();
    cfg.endpoint = e;
  }
  if (o.out) {
    if (stage == sure::Stage::Retrieve && sure::text::ends_with(*o.out, ".jsonl")) {
      cfg.instances_out = fs::absolute(*o.out);
    } else {
      cfg.workdir = fs::absolute(*o.out);
    }
  }
  if (o.k) cfg.k = *o.k;
  if (o.queries) cfg.queries = fs::absolute(*o.queries);
  if (o.corpus) cfg.corpus = fs::absolute(*o.corpus);
  if (o.embeddings) cfg.embeddings = fs::absolute(*o.embeddings);
  if (o.kinds) cfg.variants = sure::parse_kinds(*o.kinds);
  if (o.models) cfg.distill_models = split_csv(*o.models);
  if (o.quota) cfg.quota = *o.quota;
  if (o.mode) cfg.export_mode = *o.mode;
  if (o.features) {
    cfg.features.clear();
    for (const auto& f : split_csv(*o.features)) cfg.features.push_back(sure::parse_feature(f));
  }
  if (o.control_seed) cfg.control_seed = *o.control_seed;
  if (cfg.k == 0) throw sure::ConfigError("--k must be positive");
  if (cfg.export_mode != "sft" && cfg.export_mode != "dpo" && cfg.export_mode != "both") {
    throw sure::ConfigError("--mode must be sft, dpo or both");
  }
}

void report(const sure::StageOutput& so) {
  std::cerr << sure::stage_name(so.stage) << ": done (network_calls=" << so.stats.network_calls
            << " cache_hits=" << so.stats.cache_hits << " retries=" << so.stats.retries << ")\n";
  for (const auto& n : so.notes) std::cerr << "  " << n << "\n";
  for (const auto& f : so.files) std::cout << f.string() << "\n";
}

int exit_code(const sure::Error& e) {
  if (dynamic_cast<const sure::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const sure::MissingDependency*>(&e)) return 3;
  if (auto g = dynamic_cast<const sure::GatewayError*>(&e)) {
    return g->gateway_kind() == sure::GatewayError::Kind::Exhausted ? 4 : 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SURE: spurious-feature robustness evaluation for RAG readers"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->required();
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--model", o.model, "Reader model override");
    sub->add_option("--endpoint", o.endpoint, "Base URL or mock:<script.jsonl>");
    sub->add_option("--out", o.out, "Work directory (retrieve: *.jsonl names the instances file)");
  };

  std::vector<std::pair<CLI::App*, std::string>> subs;
  for (const char* name : {"ingest", "retrieve", "perturb", "preserve", "classify", "evaluate",
                           "report", "distill", "export-train", "prelim", "all"}) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " stage");
    common(sub);
    subs.emplace_back(sub, name);
  }
  auto* retrieve = app.get_subcommand("retrieve");
  retrieve->add_option("--k", o.k, "Documents per query");
  retrieve->add_option("--queries", o.queries);
  retrieve->add_option("--corpus", o.corpus);
  retrieve->add_option("--embeddings", o.embeddings);
  app.get_subcommand("perturb")->add_option("--kinds", o.kinds,
                                            "style,source,logic,format,meta or variant keys");
  auto* distill = app.get_subcommand("distill");
  distill->add_option("--models", o.models, "Comma-separated model names (at least two)");
  distill->add_option("--quota", o.quota, "Pairs per perturbation");
  app.get_subcommand("export-train")->add_option("--mode", o.mode, "sft, dpo or both");
  auto* prelim = app.get_subcommand("prelim");
  prelim->add_option("--features", o.features, "flesch,distinct1,dtd,ppl,toklen");
  prelim->add_option("--control-seed", o.control_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string name;
  for (const auto& [sub, n] : subs) {
    if (sub->parsed()) name = n;
  }

  try {
    std::vector<sure::Stage> stages;
    if (name == "all") {
      stages = {sure::Stage::Ingest,   sure::Stage::Retrieve, sure::Stage::Perturb,
                sure::Stage::Preserve, sure::Stage::Classify, sure::Stage::Evaluate,
                sure::Stage::Report};
    } else {
      stages = {sure::parse_stage(name)};
    }
    auto cfg = sure::load_config(o.config);
    apply(o, stages.front(), cfg);
    if (name == "all" && cfg.distill_models.size() >= 2) stages.push_back(sure::Stage::Distill);
    if (name == "all") stages.push_back(sure::Stage::ExportTrain);
    sure::Pipeline pipeline(std::move(cfg));
    std::cerr << "run_id " << pipeline.run_id() << "\n";
    for (auto stage : stages) report(pipeline.run(stage));
  } catch (const sure::Error& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
