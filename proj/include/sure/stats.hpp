#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sure/corpus.hpp"
#include "sure/gateway.hpp"

namespace sure {

// ---- oracle score --------------------------------------------------------

struct OracleRequest {
  std::string context;               // full reader prompt
  std::vector<std::string> answers;  // gold aliases
  ModelRef model;
};

/// Mean over answers of the summed continuation logprobs of " " + answer.
double oracle_score(const OracleRequest& req, LlmGateway& gateway);

struct ExtremePair {
  std::string first_doc_id;  // highest oracle score
  std::string last_doc_id;   // lowest oracle score
  double first_score = 0.0;
  double last_score = 0.0;
};

/// Candidates lacking every answer are dropped first; at least two must
/// remain. Ties at either end go to the smaller doc_id.
ExtremePair select_extreme_pair(const Query& query, const std::vector<Document>& candidates,
                                const ModelRef& model, LlmGateway& gateway,
                                const AnswerMatchPolicy& policy = {});

// ---- features ------------------------------------------------------------

enum class FeatureKind { Flesch, Distinct1, Dtd, Ppl, TokenLength };

std::string_view feature_key(FeatureKind k);   // flesch, distinct1, dtd, ppl, toklen
std::string_view feature_name(FeatureKind k);  // Flesch, Distinct-1, DTD, PPL, TokenLength
FeatureKind parse_feature(std::string_view key);

std::size_t count_syllables(std::string_view word);
double flesch_reading_ease(std::string_view text);
double distinct1(std::string_view text);
/// exp(-mean logprob) of `text` scored from an empty context.
double perplexity(std::string_view text, const ModelRef& model, LlmGateway& gateway);

struct TokenCount {
  double value = 0.0;
  bool fallback = false;  // whitespace word count; the endpoint gave no usage
};
TokenCount token_length(std::string_view text, const ModelRef* model, LlmGateway* gateway);

using Annotations = std::map<std::string, double>;
/// annotations.jsonl: {"doc_id", "dtd"} per line.
Annotations load_annotations(const std::filesystem::path& path);

struct FeatureContext {
  LlmGateway* gateway = nullptr;
  std::optional<ModelRef> model;
  const Annotations* annotations = nullptr;
  std::string doc_id;
  bool* token_fallback = nullptr;  // set when TokenLength used the fallback
};

double extract_feature(FeatureKind kind, std::string_view text, const FeatureContext& aux = {});

// ---- Kolmogorov-Smirnov ---------------------------------------------------

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// sup |F_a - F_b| over the pooled observations.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Two-sided asymptotic tail Q_KS(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
/// Below lambda = 1 the equivalent theta-function form is used; there the
/// alternating series cancels badly or does not settle within 100 terms.
double kolmogorov_q(double lambda);

/// p-value for statistic `d` with sample sizes n, m (Stephens correction).
double ks_pvalue(double d, std::size_t n, std::size_t m);

KsResult ks_test(std::span<const double> a, std::span<const double> b);

/// Exact permutation p-value: share of all relabelings of the pooled sample
/// into sizes (n, m) whose statistic is >= the observed one. Ties handled.
double ks_exact_pvalue(std::span<const double> a, std::span<const double> b);

// ---- preliminary experiment ------------------------------------------------

struct FeatureSamples {
  FeatureKind kind;
  std::vector<double> first;      // first-ranked documents
  std::vector<double> last;       // last-ranked documents
  std::vector<double> control_a;  // random document A per query
  std::vector<double> control_b;  // random document B per query
};

struct PrelimRow {
  std::string group;  // "experimental" or "control"
  FeatureKind feature;
  KsResult ks;
  bool significant = false;
};

/// One experimental and one control K-S test per feature, in input order.
std::vector<PrelimRow> run_preliminary(const std::vector<FeatureSamples>& samples,
                                       double alpha = 0.05);

/// Two distinct candidate indices per query, drawn once per run.
std::pair<std::size_t, std::size_t> sample_control_pair(std::size_t n_candidates,
                                                        std::uint64_t seed,
                                                        std::string_view query_id);

}  // namespace sure
