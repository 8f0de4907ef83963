#include "sure/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>

#include "sure/error.hpp"
#include "sure/preserve.hpp"
#include "sure/retrieval.hpp"
#include "sure/rng.hpp"
#include "sure/text.hpp"
#include "sure/training.hpp"
#include "sure/util.hpp"

namespace sure {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Stages

namespace {

constexpr Stage kStages[] = {Stage::Ingest,   Stage::Retrieve, Stage::Perturb, Stage::Preserve,
                             Stage::Classify, Stage::Evaluate, Stage::Report,  Stage::Distill,
                             Stage::ExportTrain, Stage::Prelim};

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Retrieve: return "retrieve";
    case Stage::Perturb: return "perturb";
    case Stage::Preserve: return "preserve";
    case Stage::Classify: return "classify";
    case Stage::Evaluate: return "evaluate";
    case Stage::Report: return "report";
    case Stage::Distill: return "distill";
    case Stage::ExportTrain: return "export-train";
    case Stage::Prelim: return "prelim";
  }
  return "";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage: " + std::string(name));
}

std::vector<Stage> stage_dependencies(Stage s) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Retrieve: return {Stage::Ingest};
    case Stage::Perturb: return {Stage::Retrieve};
    case Stage::Preserve: return {Stage::Perturb};
    case Stage::Classify: return {Stage::Ingest};
    case Stage::Evaluate: return {Stage::Preserve, Stage::Classify};
    case Stage::Report:
    case Stage::Distill:
    case Stage::ExportTrain: return {Stage::Evaluate};
    case Stage::Prelim: return {Stage::Retrieve};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Config

std::vector<Variant> parse_kinds(std::string_view csv) {
  std::vector<Variant> out;
  std::string s(csv);
  std::replace(s.begin(), s.end(), ',', ' ');
  for (const auto& raw : text::split_words(s)) {
    std::vector<Variant> add;
    try {
      add = variants_of(parse_category(raw));
    } catch (const ConfigError&) {
      add = {parse_variant(raw)};
    }
    for (Variant v : add) {
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<fs::path> opt_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown config key " + where + k);
    }
  }
}

json section(const json& j, const char* key) {
  if (!j.contains(key)) return json::object();
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section must be an object: ") + key);
  return j.at(key);
}

std::string kinds_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  std::string s;
  for (const auto& item : v) s += item.get<std::string>() + ",";
  return s;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"endpoint", "models", "gen", "concurrency", "retry", "cache", "paths", "seed",
                  "answer_policy", "retrieval", "perturb", "preserve", "evaluate", "distill",
                  "export", "prelim"},
                 "");
  PipelineConfig c;
  try {
    const json ep = section(j, "endpoint");
    std::string url = ep.value("base_url", std::string());
    if (text::starts_with(url, "mock:")) url = "mock:" + resolve(base_dir, url.substr(5)).string();
    c.endpoint = url;
    c.api_key_env = ep.value("api_key_env", std::string());
    c.timeout = std::chrono::milliseconds(ep.value("timeout_ms", 120000));

    const json models = section(j, "models");
    for (const auto& [role, name] : models.items()) {
      c.models[parse_role(role)] = name.get<std::string>();
    }
    const json gen = section(j, "gen");
    c.gen.temperature = gen.value("temperature", c.gen.temperature);
    c.gen.max_tokens = gen.value("max_tokens", c.gen.max_tokens);
    if (gen.contains("stop")) c.gen.stop = gen.at("stop").get<std::vector<std::string>>();
    if (c.gen.temperature < 0 || c.gen.max_tokens <= 0) throw ConfigError("invalid gen settings");

    c.max_in_flight = section(j, "concurrency").value("max_in_flight", c.max_in_flight);
    if (c.max_in_flight == 0) throw ConfigError("concurrency.max_in_flight must be positive");
    const json retry = section(j, "retry");
    c.max_retries = retry.value("max_retries", c.max_retries);
    c.backoff_base = std::chrono::milliseconds(retry.value("backoff_ms", 500));
    c.cache_path = opt_path(section(j, "cache"), "path", base_dir);

    const json paths = section(j, "paths");
    if (auto p = opt_path(paths, "queries", base_dir)) c.queries = *p;
    if (auto p = opt_path(paths, "corpus", base_dir)) c.corpus = *p;
    c.embeddings = opt_path(paths, "embeddings", base_dir);
    c.instances = opt_path(paths, "instances", base_dir);
    c.annotations = opt_path(paths, "annotations", base_dir);
    if (auto p = opt_path(paths, "workdir", base_dir)) c.workdir = *p;
    else c.workdir = resolve(base_dir, "work");

    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("answer_policy")) c.policy = AnswerMatchPolicy::from_json(j.at("answer_policy"));
    c.k = section(j, "retrieval").value("k", c.k);
    if (c.k == 0) throw ConfigError("retrieval.k must be positive");

    const json pert = section(j, "perturb");
    c.variants = parse_kinds(pert.contains("kinds") ? kinds_string(pert.at("kinds"))
                                                    : "style,source,logic,format,meta");
    if (pert.contains("metadata")) c.metadata = MetadataConfig::from_json(pert.at("metadata"));
    c.rank_example = pert.value("ranked_example", c.rank_example);
    c.rank_retries = pert.value("max_retries", c.rank_retries);
    c.perturb_max_tokens = pert.value("max_tokens", c.perturb_max_tokens);

    c.nli_all = section(j, "preserve").value("nli_all", false);
    const std::string judge = section(j, "evaluate").value("judge", std::string("string"));
    if (judge == "string") c.judge = JudgeMode::String;
    else if (judge == "llm") c.judge = JudgeMode::Llm;
    else throw ConfigError("evaluate.judge must be 'string' or 'llm'");

    const json dist = section(j, "distill");
    if (dist.contains("models")) c.distill_models = dist.at("models").get<std::vector<std::string>>();
    c.quota = dist.value("quota", c.quota);
    c.distill_seed = dist.value("seed", c.seed);
    c.export_mode = section(j, "export").value("mode", c.export_mode);

    const json pre = section(j, "prelim");
    std::vector<std::string> feats = {"flesch", "distinct1", "ppl", "toklen"};
    if (pre.contains("features")) feats = pre.at("features").get<std::vector<std::string>>();
    for (const auto& f : feats) c.features.push_back(parse_feature(f));
    c.control_seed = pre.value("control_seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (c.export_mode != "sft" && c.export_mode != "dpo" && c.export_mode != "both") {
    throw ConfigError("export mode must be sft, dpo or both");
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  auto j = json::parse(raw, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
  return PipelineConfig::from_json(j, fs::absolute(path).parent_path());
}

json PipelineConfig::snapshot() const {
  json models_j = json::object();
  for (const auto& [role, name] : models) models_j[std::string(role_name(role))] = name;
  json variants_j = json::array();
  for (Variant v : variants) variants_j.push_back(variant_key(v));
  json features_j = json::array();
  for (FeatureKind f : features) features_j.push_back(feature_key(f));
  return json{{"models", models_j},
              {"gen", gen.to_json()},
              {"concurrency", {{"max_in_flight", max_in_flight}}},
              {"retry", {{"max_retries", max_retries}}},
              {"endpoint", {{"api_key_env", api_key_env}}},
              {"seed", seed},
              {"answer_policy", policy.to_json()},
              {"retrieval", {{"k", k}, {"tie_break", "doc_id ascending"}}},
              {"perturb",
               {{"variants", variants_j},
                {"metadata", metadata.to_json()},
                {"ranked_example", rank_example},
                {"max_retries", rank_retries},
                {"max_tokens", perturb_max_tokens}}},
              {"preserve", {{"nli_all", nli_all}}},
              {"evaluate", {{"judge", judge == JudgeMode::Llm ? "llm" : "string"}}},
              {"distill", {{"models", distill_models}, {"quota", quota}, {"seed", distill_seed}}},
              {"export", {{"mode", export_mode}}},
              {"prelim", {{"features", features_j}, {"control_seed", control_seed}}}};
}

std::string PipelineConfig::reader() const {
  auto it = models.find(Role::Reader);
  if (it == models.end() || it->second.empty()) throw ConfigError("models.reader is not set");
  return it->second;
}

std::vector<std::string> PipelineConfig::eval_models() const {
  std::vector<std::string> out{reader()};
  for (const auto& m : distill_models) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emission

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string model_file_stem(std::string_view model) {
  std::string out;
  for (char c : model) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::map<std::string, double> radar_for(const Aggregate& agg) {
  std::map<Category, std::vector<double>> golden;
  for (const auto& c : agg.category_rr) {
    if (is_golden_subset(c.subset)) golden[c.category].push_back(c.mean_rr);
  }
  std::map<std::string, double> out;
  for (const auto& [cat, vals] : golden) {
    double s = 0.0;
    for (double v : vals) s += v;
    out[std::string(category_name(cat))] = s / static_cast<double>(vals.size());
  }
  return out;
}

}  // namespace

ReportBundle emit_report(const std::map<std::string, std::vector<ComparisonRecord>>& results,
                         const std::string& reader) {
  auto it = results.find(reader);
  if (it == results.end() || it->second.empty()) {
    throw EmptyCell();
  }
  ReportBundle out;
  const Aggregate main = aggregate(it->second);
  out.csv = "Taxonomy,Perturbation,Subset,N,LR,RR,WR,Org,Acc,beneficial\n";
  for (const auto& row : main.rows) {
    const auto& m = row.metrics;
    out.csv += csv_field(category_name(row.category)) + "," + csv_field(variant_name(row.variant)) +
               "," + std::string(subset_name(row.subset)) + "," + std::to_string(m.n) + "," +
               format_fixed2(m.lr) + "," + format_fixed2(m.rr) + "," + format_fixed2(m.wr) + "," +
               format_fixed2(m.org) + "," + format_fixed2(m.acc) + "," +
               (m.wr > m.lr ? "true" : "false") + "\n";
  }

  json radar = json::object();
  std::string md = "# Robustness report\n";
  for (const auto& [model, records] : results) {
    if (records.empty()) continue;
    const Aggregate agg = aggregate(records);
    json per_cat = json::object();
    for (const auto& [cat, v] : radar_for(agg)) per_cat[cat] = round2(v);
    if (!per_cat.empty()) radar[model] = per_cat;

    md += "\n## " + model + "\n\n";
    md += "| Taxonomy | Perturbation | Subset | N | LR | RR | WR | Org | Acc |\n";
    md += "|---|---|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& row : agg.rows) {
      const auto& m = row.metrics;
      const std::string wr = m.wr > m.lr ? "**" + format_fixed2(m.wr) + "**" : format_fixed2(m.wr);
      md += "| " + std::string(category_name(row.category)) + " | " +
            std::string(variant_name(row.variant)) + " | " + std::string(subset_name(row.subset)) +
            " | " + std::to_string(m.n) + " | " + format_fixed2(m.lr) + " | " +
            format_fixed2(m.rr) + " | " + wr + " | " + format_fixed2(m.org) + " | " +
            format_fixed2(m.acc) + " |\n";
    }
    md += "\nCategory-level RR (mean over variants):\n\n| Taxonomy | Subset | RR |\n|---|---|---:|\n";
    for (const auto& c : agg.category_rr) {
      md += "| " + std::string(category_name(c.category)) + " | " +
            std::string(subset_name(c.subset)) + " | " + format_fixed2(c.mean_rr) + " |\n";
    }
  }
  out.radar_json = radar.dump(2) + "\n";
  out.markdown = md;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig cfg, std::unique_ptr<Transport> transport)
    : cfg_(std::move(cfg)), pending_transport_(std::move(transport)) {
  fs::create_directories(cfg_.workdir);
  const fs::path lock_path = cfg_.workdir / ".lock";
  lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw ConfigError("cannot open lock file " + lock_path.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error("LockError", "another stage is running in " + cfg_.workdir.string());
  }

  if (!pending_transport_ && !cfg_.endpoint.empty()) {
    pending_transport_ = make_transport(cfg_.endpoint, cfg_.api_key_env, cfg_.timeout);
  }
  const std::string endpoint_id = pending_transport_ ? pending_transport_->endpoint_id() : "";
  json snap = cfg_.snapshot();
  run_id_ = sha256_hex(snap.dump() + "\n" + endpoint_id).substr(0, 16);

  const fs::path mpath = out("manifest.json");
  json previous = json::object();
  if (fs::exists(mpath)) {
    previous = json::parse(read_file(mpath), nullptr, false);
    if (previous.is_discarded() || !previous.is_object()) previous = json::object();
  }
  json models = json::object();
  for (const auto& [role, name] : cfg_.models) models[std::string(role_name(role))] = name;
  manifest_ = json{{"run_id", run_id_},
                   {"tool_version", kToolVersion},
                   {"endpoint", endpoint_id},
                   {"config", snap},
                   {"seeds",
                    {{"seed", cfg_.seed},
                     {"distill_seed", cfg_.distill_seed},
                     {"control_seed", cfg_.control_seed}}},
                   {"models", models},
                   {"stages", previous.value("stages", json::object())},
                   {"outputs", previous.value("outputs", json::object())}};
}

Pipeline::~Pipeline() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

LlmGateway& Pipeline::gateway() {
  if (!gateway_) {
    if (!pending_transport_) throw ConfigError("endpoint.base_url is not configured");
    GatewayConfig gc;
    gc.models = cfg_.models;
    gc.gen = cfg_.gen;
    gc.max_in_flight = cfg_.max_in_flight;
    gc.cache_path = cfg_.cache_path;
    gc.max_retries = cfg_.max_retries;
    gc.backoff_base = cfg_.backoff_base;
    gateway_ = std::make_unique<LlmGateway>(std::move(gc), std::move(pending_transport_));
  }
  return *gateway_;
}

void Pipeline::require(Stage stage) const {
  for (Stage dep : stage_dependencies(stage)) {
    const auto& stages = manifest_.at("stages");
    const std::string name(stage_name(dep));
    if (!stages.contains(name) || !stages.at(name).value("completed", false)) {
      throw MissingDependency(name);
    }
  }
}

void Pipeline::write_output(StageOutput& so, const fs::path& path, std::string_view contents) {
  write_file_atomic(path, contents);
  so.files.push_back(path);
  std::error_code ec;
  fs::path rel = fs::relative(path, cfg_.workdir, ec);
  const std::string key =
      (ec || rel.empty() || text::starts_with(rel.string(), "..")) ? path.string() : rel.string();
  manifest_["outputs"][key] = json{{"sha256", sha256_hex(contents)},
                                   {"run_id", run_id_},
                                   {"stage", stage_name(so.stage)}};
}

void Pipeline::save_manifest() {
  write_file_atomic(out("manifest.json"), manifest_.dump(2) + "\n");
}

void Pipeline::mark_complete(const StageOutput& so) {
  json files = json::array();
  for (const auto& f : so.files) {
    std::error_code ec;
    fs::path rel = fs::relative(f, cfg_.workdir, ec);
    files.push_back((ec || text::starts_with(rel.string(), "..")) ? f.string() : rel.string());
  }
  manifest_["stages"][std::string(stage_name(so.stage))] =
      json{{"completed", true}, {"run_id", run_id_}, {"outputs", files}};
  save_manifest();
}

StageOutput Pipeline::run(Stage stage) {
  require(stage);
  StageOutput so{stage, {}, {}, {}};
  const GatewayStats before = gateway_ ? gateway_->stats() : GatewayStats{};
  switch (stage) {
    case Stage::Ingest: ingest(so); break;
    case Stage::Retrieve: retrieve(so); break;
    case Stage::Perturb: perturb(so); break;
    case Stage::Preserve: preserve(so); break;
    case Stage::Classify: classify(so); break;
    case Stage::Evaluate: evaluate(so); break;
    case Stage::Report: report(so); break;
    case Stage::Distill: distill(so); break;
    case Stage::ExportTrain: export_train(so); break;
    case Stage::Prelim: prelim(so); break;
  }
  if (gateway_) {
    const GatewayStats after = gateway_->stats();
    so.stats = GatewayStats{after.network_calls - before.network_calls,
                            after.cache_hits - before.cache_hits, after.retries - before.retries};
  }
  mark_complete(so);
  return so;
}

// ---- loaders ---------------------------------------------------------------

QuerySet Pipeline::load_work_queries() const { return load_queries(out("queries.jsonl")); }
Corpus Pipeline::load_work_corpus() const { return load_corpus(out("corpus.jsonl")); }

InstanceSet Pipeline::load_work_instances(const QuerySet& q, const Corpus& c) const {
  return load_instances(out("instances.jsonl"), q, c, cfg_.policy);
}

std::vector<PerturbedPair> Pipeline::load_pairs(const fs::path& path) const {
  std::vector<PerturbedPair> pairs;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    try {
      pairs.push_back(PerturbedPair::from_json(row));
    } catch (const Error& e) {
      throw ParseError(path.string(), line, e.what());
    }
  }
  return pairs;
}

std::map<std::string, std::vector<ComparisonRecord>> Pipeline::load_results() const {
  std::map<std::string, std::vector<ComparisonRecord>> out;
  for (const auto& row : read_jsonl(this->out("results.jsonl"))) {
    auto r = ComparisonRecord::from_json(row);
    out[r.model].push_back(std::move(r));
  }
  return out;
}

// ---- stages ----------------------------------------------------------------

void Pipeline::ingest(StageOutput& so) {
  if (cfg_.queries.empty() || cfg_.corpus.empty()) {
    throw ConfigError("paths.queries and paths.corpus are required");
  }
  const QuerySet queries = load_queries(cfg_.queries);
  const Corpus corpus = load_corpus(cfg_.corpus);
  std::vector<json> qrows, crows;
  for (const auto& q : queries) qrows.push_back(to_json(q));
  for (const auto& d : corpus) crows.push_back(to_json(d));
  write_output(so, out("queries.jsonl"), to_jsonl(qrows));
  write_output(so, out("corpus.jsonl"), to_jsonl(crows));
  so.notes.push_back(std::to_string(queries.size()) + " queries, " + std::to_string(corpus.size()) +
                     " documents");
}

void Pipeline::retrieve(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  std::vector<json> inst_rows;
  std::vector<json> ranking_rows;

  if (cfg_.instances) {
    const InstanceSet given = load_instances(*cfg_.instances, queries, corpus, cfg_.policy);
    std::map<std::string, json> per_query;
    for (const auto& inst : given) {
      inst_rows.push_back(to_json(inst));
      auto& row = per_query[inst.query_id];
      if (row.is_null()) row = json{{"query_id", inst.query_id}, {"docs", json::array()}};
      row["docs"].push_back(json{{"doc_id", inst.doc_id}, {"score", nullptr}});
    }
    for (const auto& q : queries) {
      if (auto it = per_query.find(q.id); it != per_query.end()) ranking_rows.push_back(it->second);
    }
  } else {
    EmbeddingStore docs;
    std::map<std::string, Vector> qvecs;
    std::vector<std::string> doc_ids;
    for (const auto& d : corpus) doc_ids.push_back(d.doc_id);
    if (cfg_.embeddings) {
      const EmbeddingStore all = load_embeddings(*cfg_.embeddings);
      for (const auto& q : queries) {
        if (corpus.find(q.id)) {
          throw ConfigError("query id '" + q.id + "' is also a document id; embeddings are ambiguous");
        }
        const Vector* v = all.find(q.id);
        if (!v) throw ConfigError("no embedding for query " + q.id);
        qvecs[q.id] = *v;
      }
      try {
        docs = all.subset(doc_ids);
      } catch (const ValidationError& e) {
        throw ConfigError(e.what());
      }
    } else {
      std::vector<std::string> texts;
      for (const auto& d : corpus) texts.push_back(d.text);
      const auto dv = embed_texts(texts, gateway());
      if (!dv.empty()) docs = EmbeddingStore(dv.front().size());
      for (std::size_t i = 0; i < dv.size(); ++i) docs.add(doc_ids[i], dv[i]);
      std::vector<std::string> questions;
      for (const auto& q : queries) questions.push_back(q.question);
      const auto qv = embed_texts(questions, gateway());
      for (std::size_t i = 0; i < qv.size(); ++i) qvecs[queries.items()[i].id] = qv[i];
    }
    const RetrievalConfig rc{cfg_.k};
    for (const auto& q : queries) {
      const auto ranked = top_k(qvecs.at(q.id), docs, rc);
      json dj = json::array();
      for (const auto& sd : ranked) {
        dj.push_back(json{{"doc_id", sd.doc_id}, {"score", sd.score}});
        inst_rows.push_back(to_json(make_instance(q, corpus.at(sd.doc_id), cfg_.policy)));
      }
      ranking_rows.push_back(json{{"query_id", q.id}, {"docs", dj}});
    }
  }
  const std::string instances = to_jsonl(inst_rows);
  write_output(so, out("instances.jsonl"), instances);
  if (cfg_.instances_out) write_output(so, *cfg_.instances_out, instances);
  write_output(so, out("retrieval.jsonl"), to_jsonl(ranking_rows));
  so.notes.push_back(std::to_string(inst_rows.size()) + " instances");
}

void Pipeline::perturb(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  const InstanceSet instances = load_work_instances(queries, corpus);
  cfg_.metadata.validate();

  struct Task {
    const Instance* inst;
    Variant variant;
  };
  std::vector<Task> tasks;
  bool needs_model = false;
  for (const auto& inst : instances) {
    for (Variant v : cfg_.variants) {
      tasks.push_back(Task{&inst, v});
      if (PerturbationKind(v).model_based() || v == Variant::LlmRanked) needs_model = true;
    }
  }
  LlmGateway* gw = needs_model ? &gateway() : nullptr;
  GenConfig rewrite_gen = cfg_.gen;
  rewrite_gen.max_tokens = cfg_.perturb_max_tokens;
  std::size_t fell_back = 0;
  std::mutex fb_mutex;

  auto results = parallel_map<std::optional<PerturbedPair>>(
      tasks.size(), cfg_.max_in_flight, [&](std::size_t i) -> std::optional<PerturbedPair> {
        const Task& t = tasks[i];
        const Document& doc = corpus.at(t.inst->doc_id);
        PerturbedPair p;
        p.pair_id = make_pair_id(t.inst->instance_id, t.variant);
        p.instance_id = t.inst->instance_id;
        p.kind = PerturbationKind(t.variant);
        p.original_text = doc.text;
        switch (category_of(t.variant)) {
          case Category::Style:
          case Category::Source: {
            const std::string model = t.variant == Variant::SelfGenerated
                                          ? gw->model(Role::Reader).name
                                          : gw->model(Role::Perturber).name;
            try {
              p.perturbed_text = perturb_llm(t.variant, doc.text, model, *gw, rewrite_gen);
            } catch (const EmptyCompletion&) {
              warn(p.pair_id + ": empty rewrite, pair skipped");
              return std::nullopt;
            }
            p.perturber_model = model;
            break;
          }
          case Category::Logic: {
            LogicOptions lo;
            lo.gateway = gw;
            lo.example = cfg_.rank_example;
            lo.max_retries = cfg_.rank_retries;
            if (t.variant == Variant::Random) {
              lo.seed = derive_seed(cfg_.seed, t.inst->instance_id);
              p.seed = lo.seed;
            }
            const auto sentences = split_sentences(doc.text);
            if (sentences.empty()) return std::nullopt;
            auto res = logic_perturb(t.variant, sentences, lo);
            if (res.fell_back) {
              std::lock_guard lock(fb_mutex);
              ++fell_back;
            }
            if (t.variant == Variant::LlmRanked) p.perturber_model = gw->model(Role::Perturber).name;
            p.perturbed_text = text::join(res.sentences, " ");
            break;
          }
          case Category::Format:
            p.perturbed_text = render_format(t.variant, doc.title, doc.text);
            break;
          case Category::Metadata:
            p.perturbed_text = render_metadata(t.variant, doc.title, doc.text, cfg_.metadata);
            break;
        }
        p.validate();
        return p;
      });

  std::vector<json> rows;
  for (auto& r : results) {
    if (r) rows.push_back(r->to_json());
  }
  write_output(so, out("pairs.jsonl"), to_jsonl(rows));
  so.notes.push_back(std::to_string(rows.size()) + " pairs");
  if (fell_back) {
    so.notes.push_back(std::to_string(fell_back) + " LLM-Ranked pairs kept the original order");
  }
}

void Pipeline::preserve(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  const InstanceSet instances = load_work_instances(queries, corpus);
  const auto pairs = load_pairs(out("pairs.jsonl"));
  bool needs_nli = cfg_.nli_all && !pairs.empty();
  for (const auto& p : pairs) needs_nli = needs_nli || p.kind.model_based();

  FilterOptions fo;
  fo.nli_all = cfg_.nli_all;
  fo.workers = cfg_.max_in_flight;
  const auto res =
      filter_pairs(pairs, instances, queries, needs_nli ? &gateway() : nullptr, cfg_.policy, fo);

  std::vector<json> kept, rejected;
  for (const auto& p : res.kept) {
    json j = p.to_json();
    j["kept"] = true;
    kept.push_back(std::move(j));
  }
  std::map<std::string, std::size_t> by_reason;
  for (const auto& r : res.rejected) {
    rejected.push_back(r.to_json());
    ++by_reason[std::string(reject_reason_name(r.reason))];
  }
  write_output(so, out("kept.jsonl"), to_jsonl(kept));
  write_output(so, out("rejections.jsonl"), to_jsonl(rejected));
  so.notes.push_back(std::to_string(kept.size()) + " kept, " + std::to_string(rejected.size()) +
                     " rejected");
  for (const auto& [reason, n] : by_reason) so.notes.push_back(reason + ": " + std::to_string(n));
}

void Pipeline::classify(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  EvalOptions eo;
  eo.judge = cfg_.judge;
  eo.workers = cfg_.max_in_flight;
  for (const auto& model : cfg_.eval_models()) {
    const auto entries =
        classify_closedbook(queries, ModelRef{model, Role::Reader}, gateway(), cfg_.policy, eo);
    std::vector<json> rows;
    std::size_t known = 0;
    for (const auto& e : entries) {
      rows.push_back(e.to_json());
      known += static_cast<std::size_t>(e.correct);
    }
    write_output(so, out("closedbook") / (model_file_stem(model) + ".jsonl"), to_jsonl(rows));
    so.notes.push_back(model + ": " + std::to_string(known) + "/" + std::to_string(entries.size()) +
                       " known");
  }
}

void Pipeline::evaluate(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  const InstanceSet instances = load_work_instances(queries, corpus);
  const auto kept = load_pairs(out("kept.jsonl"));
  EvalOptions eo;
  eo.judge = cfg_.judge;
  eo.workers = cfg_.max_in_flight;

  std::vector<json> rows;
  for (const auto& model : cfg_.eval_models()) {
    const fs::path cb_path = out("closedbook") / (model_file_stem(model) + ".jsonl");
    if (!fs::exists(cb_path)) throw MissingDependency("classify");
    std::map<std::string, int> closedbook;
    for (const auto& row : read_jsonl(cb_path)) {
      const auto e = ClosedBookEntry::from_json(row);
      closedbook[e.query_id] = e.correct;
    }
    const auto records = evaluate_pairs(kept, instances, queries, closedbook,
                                        ModelRef{model, Role::Reader}, gateway(), cfg_.policy, eo);
    for (const auto& r : records) rows.push_back(r.to_json());
  }
  write_output(so, out("results.jsonl"), to_jsonl(rows));
  so.notes.push_back(std::to_string(rows.size()) + " comparison records");
}

void Pipeline::report(StageOutput& so) {
  const auto results = load_results();
  const auto bundle = emit_report(results, cfg_.reader());
  write_output(so, out("report.csv"), bundle.csv);
  write_output(so, out("radar.json"), bundle.radar_json);
  write_output(so, out("report.md"), bundle.markdown);
}

void Pipeline::distill(StageOutput& so) {
  const auto results = load_results();
  SigSelection sel;
  sel.quota_per_perturbation = cfg_.quota;
  sel.seed = cfg_.distill_seed;
  sel.required_models = cfg_.distill_models;
  const auto sig = select_sig(results, sel);

  std::map<std::string, PerturbedPair> kept;
  for (auto& p : load_pairs(out("kept.jsonl"))) kept.emplace(p.pair_id, std::move(p));
  std::vector<json> rows;
  for (const auto& e : sig.entries) {
    auto it = kept.find(e.pair_id);
    if (it == kept.end()) throw ReferenceError("kept pair " + e.pair_id);
    json j = it->second.to_json();
    j["models"] = sel.required_models;
    j["c"] = e.c_by_model;
    rows.push_back(std::move(j));
  }
  json summary = json::array();
  for (const auto& st : sig.stats) {
    summary.push_back(json{{"variant", variant_key(st.variant)},
                           {"pool", st.pool},
                           {"selected", st.selected},
                           {"short", st.short_pool},
                           {"lose_by_model", st.lose_by_model},
                           {"win_by_model", st.win_by_model}});
  }
  write_output(so, out("sig.jsonl"), to_jsonl(rows));
  write_output(so, out("sig_summary.json"),
               json{{"quota", sel.quota_per_perturbation}, {"variants", summary}}.dump(2) + "\n");
  so.notes.push_back(std::to_string(rows.size()) + " SIG pairs");
}

void Pipeline::export_train(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  const InstanceSet instances = load_work_instances(queries, corpus);
  const auto results = load_results();
  std::map<std::string, PerturbedPair> kept;
  for (auto& p : load_pairs(out("kept.jsonl"))) kept.emplace(p.pair_id, std::move(p));

  std::vector<TrainInput> sft_inputs, dpo_inputs;
  std::size_t absent = 0, degenerate = 0;
  auto it = results.find(cfg_.reader());
  if (it != results.end()) {
    for (const auto& r : it->second) {
      if (r.c == 0 || !is_golden_subset(r.subset)) continue;
      auto p = kept.find(r.pair_id);
      if (p == kept.end()) throw ReferenceError("kept pair " + r.pair_id);
      const Instance& inst = instances.at(p->second.instance_id);
      const Query& q = queries.at(inst.query_id);
      TrainInput in{r.pair_id, q.question, q.answers, p->second.original_text,
                    p->second.perturbed_text, r.y == 0 ? r.response : r.perturbed_response};
      std::string chosen;
      try {
        chosen = training_answer(in, cfg_.policy);
      } catch (const AnswerAbsent&) {
        ++absent;
        continue;
      }
      sft_inputs.push_back(in);
      if (*in.incorrect_answer == chosen) {
        ++degenerate;
        continue;
      }
      dpo_inputs.push_back(std::move(in));
    }
  }
  const auto dump = [](const std::vector<TrainSample>& samples) {
    std::vector<json> rows;
    for (const auto& s : samples) rows.push_back(s.to_json());
    return to_jsonl(rows);
  };
  if (cfg_.export_mode != "dpo") {
    write_output(so, out("sft.jsonl"), dump(export_sft(sft_inputs, cfg_.policy)));
  }
  if (cfg_.export_mode != "sft") {
    write_output(so, out("dpo.jsonl"), dump(export_dpo(dpo_inputs, cfg_.policy)));
  }
  write_output(so, out("train_summary.json"),
               json{{"model", cfg_.reader()},
                    {"sft_inputs", sft_inputs.size()},
                    {"dpo_inputs", dpo_inputs.size()},
                    {"skipped_answer_absent", absent},
                    {"skipped_degenerate", degenerate}}
                       .dump(2) +
                   "\n");
  so.notes.push_back(std::to_string(sft_inputs.size()) + " SFT inputs, " +
                     std::to_string(dpo_inputs.size()) + " DPO inputs");
}

void Pipeline::prelim(StageOutput& so) {
  const QuerySet queries = load_work_queries();
  const Corpus corpus = load_work_corpus();
  std::optional<Annotations> annotations;
  if (cfg_.annotations) annotations = load_annotations(*cfg_.annotations);
  const bool needs_model =
      std::any_of(cfg_.features.begin(), cfg_.features.end(),
                  [](FeatureKind f) { return f == FeatureKind::Ppl || f == FeatureKind::TokenLength; });
  LlmGateway* gw = &gateway();  // oracle scoring always needs the endpoint
  const ModelRef reader{cfg_.reader(), Role::Reader};

  struct Chosen {
    std::string query_id;
    ExtremePair extreme;
    std::string control_a, control_b;
  };
  std::vector<Chosen> chosen;
  std::size_t skipped = 0;
  for (const auto& row : read_jsonl(out("retrieval.jsonl"))) {
    const Query& q = queries.at(row.at("query_id").get<std::string>());
    std::vector<Document> cands;
    for (const auto& d : row.at("docs")) cands.push_back(corpus.at(d.at("doc_id").get<std::string>()));
    if (cands.size() < 2) {
      ++skipped;
      continue;
    }
    try {
      Chosen c;
      c.query_id = q.id;
      c.extreme = select_extreme_pair(q, cands, reader, *gw, cfg_.policy);
      const auto [a, b] = sample_control_pair(cands.size(), cfg_.control_seed, q.id);
      c.control_a = cands[a].doc_id;
      c.control_b = cands[b].doc_id;
      chosen.push_back(std::move(c));
    } catch (const TooFewCandidates&) {
      ++skipped;
    }
  }

  bool fallback = false;
  const auto feature_of = [&](FeatureKind f, const std::string& doc_id) {
    FeatureContext ctx;
    if (needs_model) {
      ctx.gateway = gw;
      ctx.model = reader;
    }
    ctx.annotations = annotations ? &*annotations : nullptr;
    ctx.doc_id = doc_id;
    ctx.token_fallback = &fallback;
    return extract_feature(f, corpus.at(doc_id).text, ctx);
  };
  std::vector<FeatureSamples> samples;
  if (!chosen.empty()) {
    for (FeatureKind f : cfg_.features) {
      FeatureSamples s{f, {}, {}, {}, {}};
      for (const auto& c : chosen) {
        s.first.push_back(feature_of(f, c.extreme.first_doc_id));
        s.last.push_back(feature_of(f, c.extreme.last_doc_id));
        s.control_a.push_back(feature_of(f, c.control_a));
        s.control_b.push_back(feature_of(f, c.control_b));
      }
      samples.push_back(std::move(s));
    }
  }
  std::string csv = "Group,Feature,KS,PValue,Significant\n";
  for (const auto& row : run_preliminary(samples)) {
    char ks[32], pv[32];
    std::snprintf(ks, sizeof ks, "%.6f", row.ks.statistic);
    std::snprintf(pv, sizeof pv, "%.6g", row.ks.p_value);
    csv += row.group + "," + csv_field(feature_name(row.feature)) + "," + ks + "," + pv + "," +
           (row.significant ? "true" : "false") + "\n";
  }
  std::vector<json> pair_rows;
  for (const auto& c : chosen) {
    pair_rows.push_back(json{{"query_id", c.query_id},
                             {"first", c.extreme.first_doc_id},
                             {"last", c.extreme.last_doc_id},
                             {"first_score", c.extreme.first_score},
                             {"last_score", c.extreme.last_score},
                             {"control_a", c.control_a},
                             {"control_b", c.control_b}});
  }
  write_output(so, out("prelim_report.csv"), csv);
  write_output(so, out("prelim_pairs.jsonl"), to_jsonl(pair_rows));
  so.notes.push_back(std::to_string(chosen.size()) + " queries used, " + std::to_string(skipped) +
                     " skipped");
  if (fallback) so.notes.push_back("TokenLength used whitespace counts (no usage report)");
}

}  // namespace sure
