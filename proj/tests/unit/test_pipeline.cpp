#include <doctest.h>

#include "sure/error.hpp"
#include "sure/pipeline.hpp"
#include "sure/util.hpp"

#include "helpers.hpp"

using namespace sure;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ComparisonRecord rec(const std::string& id, const std::string& model, Variant v, Subset s, int y,
                     int y_hat) {
  ComparisonRecord r;
  r.pair_id = id;
  r.model = model;
  r.variant = v;
  r.category = category_of(v);
  r.subset = s;
  r.y = y;
  r.y_hat = y_hat;
  r.c = compare(y, y_hat);
  return r;
}

std::vector<ComparisonRecord> cell(const std::string& model, Variant v, Subset s, int lose,
                                   int win, int same_right, int same_wrong) {
  std::vector<ComparisonRecord> out;
  int n = 0;
  auto add = [&](int count, int y, int y_hat) {
    for (int i = 0; i < count; ++i) {
      out.push_back(rec(std::string(variant_key(v)) + std::to_string(n++), model, v, s, y, y_hat));
    }
  };
  add(lose, 1, 0);
  add(win, 0, 1);
  add(same_right, 1, 1);
  add(same_wrong, 0, 0);
  return out;
}

fs::path fixture_dir() { return testing::data_dir() / "fixtures" / "e2e"; }

std::map<std::string, std::string> run_all(const fs::path& workdir,
                                           std::optional<fs::path> cache = std::nullopt,
                                           std::size_t* network_calls = nullptr) {
  auto cfg = load_config(fixture_dir() / "config.json");
  cfg.workdir = workdir;
  cfg.cache_path = cache;
  Pipeline p(cfg);
  std::size_t calls = 0;
  for (Stage s : {Stage::Ingest, Stage::Retrieve, Stage::Perturb, Stage::Preserve, Stage::Classify,
                  Stage::Evaluate, Stage::Report, Stage::Distill, Stage::ExportTrain}) {
    calls += p.run(s).stats.network_calls;
  }
  if (network_calls) *network_calls = calls;
  std::map<std::string, std::string> out;
  for (const char* f : {"report.csv", "radar.json", "sig.jsonl", "sft.jsonl", "dpo.jsonl",
                        "results.jsonl", "kept.jsonl"}) {
    out[f] = read_file(workdir / f);
  }
  return out;
}

}  // namespace

TEST_CASE("config defaults") {
  const auto c = PipelineConfig::from_json(json::object(), "/base");
  CHECK(c.k == 3);
  CHECK(c.quota == 100);
  CHECK(c.export_mode == "both");
  CHECK(c.variants.size() == kAllVariants.size());
  CHECK(c.workdir == fs::path("/base/work"));
  CHECK(c.features.size() == 4);
  CHECK(c.judge == JudgeMode::String);
  CHECK_THROWS_AS(c.reader(), ConfigError);
}

TEST_CASE("config resolves relative paths and mock endpoints") {
  const json j = {{"endpoint", {{"base_url", "mock:script.jsonl"}}},
                  {"models", {{"reader", "r"}}},
                  {"paths", {{"queries", "q.jsonl"}, {"corpus", "/abs/c.jsonl"}, {"workdir", "w"}}},
                  {"distill", {{"models", {"r", "s", "r"}}}}};
  const auto c = PipelineConfig::from_json(j, "/base/dir");
  CHECK(c.endpoint == "mock:/base/dir/script.jsonl");
  CHECK(c.queries == fs::path("/base/dir/q.jsonl"));
  CHECK(c.corpus == fs::path("/abs/c.jsonl"));
  CHECK(c.workdir == fs::path("/base/dir/w"));
  CHECK(c.eval_models() == std::vector<std::string>{"r", "s"});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"bogus", 1}}, "/"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json::array(), "/"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"retrieval", {{"k", 0}}}}, "/"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"retrieval", {{"k", "three"}}}}, "/"),
                  ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"export", {{"mode", "rl"}}}}, "/"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"evaluate", {{"judge", "human"}}}}, "/"),
                  ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"models", {{"oracle", "x"}}}}, "/"),
                  ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(json{{"perturb", {{"kinds", "style,nope"}}}}, "/"),
                  ConfigError);
  testing::TempDir dir;
  write_file_atomic(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("parse_kinds accepts categories and variant keys") {
  CHECK(parse_kinds("style") == std::vector<Variant>{Variant::Simple, Variant::Complex});
  CHECK(parse_kinds("json,format") ==
        std::vector<Variant>{Variant::Json, Variant::Html, Variant::Yaml, Variant::Markdown});
  CHECK(parse_kinds("meta").size() == 4);
  CHECK(parse_kinds("style,source,logic,format,meta").size() == 15);
  CHECK(parse_kinds("reverse, random") == std::vector<Variant>{Variant::Reverse, Variant::Random});
}

TEST_CASE("stage names round-trip") {
  for (Stage s : {Stage::Ingest, Stage::Retrieve, Stage::Perturb, Stage::Preserve,
                  Stage::Classify, Stage::Evaluate, Stage::Report, Stage::Distill,
                  Stage::ExportTrain, Stage::Prelim}) {
    CHECK(parse_stage(stage_name(s)) == s);
  }
  CHECK(stage_name(Stage::ExportTrain) == "export-train");
  CHECK_THROWS_AS(parse_stage("train"), ConfigError);
}

TEST_CASE("csv_field quotes only when needed") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("Timestamp (pre)") == "Timestamp (pre)");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_field("") == "");
}

TEST_CASE("format_fixed2 rounds and never prints negative zero") {
  CHECK(format_fixed2(7.666666) == "7.67");
  CHECK(format_fixed2(100.0) == "100.00");
  CHECK(format_fixed2(0.0) == "0.00");
  CHECK(format_fixed2(-0.0) == "0.00");
  CHECK(format_fixed2(-0.001) == "0.00");
  CHECK(format_fixed2(33.333333) == "33.33");
}

TEST_CASE("model_file_stem sanitizes model names") {
  CHECK(model_file_stem("mistral-7b-instruct-v0.2") == "mistral-7b-instruct-v0.2");
  CHECK(model_file_stem("meta-llama/Llama-3-8B") == "meta-llama_Llama-3-8B");
  CHECK(model_file_stem("a b:c") == "a_b_c");
  CHECK(model_file_stem("..") == "_..");
  CHECK(model_file_stem("") == "_");
}

TEST_CASE("emit_report marks beneficial cells by WR against LR") {
  // 300 records: LR 7.33 (22), WR 7.67 (23) -> beneficial.
  auto a = cell("m", Variant::Json, Subset::KG, 22, 23, 200, 55);
  // 10000 records: LR 7.96 (796), WR 3.51 (351) -> not beneficial.
  auto b = cell("m", Variant::Html, Subset::KG, 796, 351, 7000, 1853);
  std::vector<ComparisonRecord> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto bundle = emit_report({{"m", all}}, "m");
  CHECK(bundle.csv.find("Format,JSON,KG,300,7.33,85.00,7.67,74.00,74.33,true\n") !=
        std::string::npos);
  CHECK(bundle.csv.find("Format,HTML,KG,10000,7.96,88.53,3.51,77.96,73.51,false\n") !=
        std::string::npos);
  CHECK(bundle.markdown.find("**7.67**") != std::string::npos);
  CHECK(bundle.markdown.find("**3.51**") == std::string::npos);
}

TEST_CASE("emit_report radar averages golden subsets and omits empty ones") {
  std::vector<ComparisonRecord> r;
  for (auto& x : cell("m", Variant::Json, Subset::KG, 1, 0, 3, 0)) r.push_back(x);   // RR 75
  for (auto& x : cell("m", Variant::Html, Subset::KG, 0, 0, 4, 0)) r.push_back(x);   // RR 100
  for (auto& x : cell("m", Variant::Json, Subset::KN, 4, 0, 0, 0)) r.push_back(x);   // ignored
  for (auto& x : cell("m", Variant::Reverse, Subset::UN, 1, 0, 0, 0)) r.push_back(x);
  const auto bundle = emit_report({{"m", r}, {"empty", {}}}, "m");
  const auto radar = json::parse(bundle.radar_json);
  CHECK(radar.size() == 1);
  CHECK(radar.at("m").at("Format").get<double>() == doctest::Approx(87.5));
  CHECK_FALSE(radar.at("m").contains("Logic"));
  CHECK(bundle.csv.find(",UG,") == std::string::npos);
  CHECK_THROWS_AS(emit_report({{"m", r}}, "other"), EmptyCell);
}

TEST_CASE("report rows are rounded only at emission") {
  // 1/3 of records lost: LR 33.333..., printed 33.33; RR 66.67.
  const auto bundle = emit_report({{"m", cell("m", Variant::Yaml, Subset::UG, 1, 0, 2, 0)}}, "m");
  CHECK(bundle.csv.find("Format,YAML,UG,3,33.33,66.67,0.00,100.00,66.67,false") !=
        std::string::npos);
  CHECK(json::parse(bundle.radar_json).at("m").at("Format").get<double>() == 66.67);
}

TEST_CASE("stages refuse to run before their dependencies") {
  testing::TempDir dir;
  auto cfg = load_config(fixture_dir() / "config.json");
  cfg.workdir = dir / "work";
  Pipeline p(cfg);
  CHECK_THROWS_AS(p.run(Stage::Evaluate), MissingDependency);
  CHECK_THROWS_AS(p.run(Stage::Retrieve), MissingDependency);
  p.run(Stage::Ingest);
  CHECK_THROWS_AS(p.run(Stage::Perturb), MissingDependency);
  p.run(Stage::Retrieve);
  const auto manifest = p.manifest();
  CHECK(manifest.at("stages").at("ingest").at("completed").get<bool>());
  CHECK(manifest.at("run_id").get<std::string>() == p.run_id());
  CHECK(manifest.at("outputs").contains("instances.jsonl"));
  CHECK(fs::exists(dir / "work" / "manifest.json"));
}

TEST_CASE("a workdir admits one pipeline at a time") {
  testing::TempDir dir;
  auto cfg = load_config(fixture_dir() / "config.json");
  cfg.workdir = dir / "work";
  {
    Pipeline first(cfg);
    CHECK_THROWS_AS(Pipeline second{cfg}, Error);
  }
  CHECK_NOTHROW(Pipeline again{cfg});
}

TEST_CASE("the fixture pipeline is deterministic and replays from cache") {
  testing::TempDir dir;
  std::size_t cold = 0, warm = 0;
  const auto a = run_all(dir / "a", dir / "cache.jsonl", &cold);
  const auto b = run_all(dir / "b", dir / "cache.jsonl", &warm);
  const auto c = run_all(dir / "c");
  CHECK(cold > 0);
  CHECK(warm == 0);
  for (const auto& [name, contents] : a) {
    CAPTURE(name);
    CHECK_FALSE(contents.empty());
    CHECK(contents == b.at(name));
    CHECK(contents == c.at(name));
  }
}
