#include "sure/stats.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <set>

#include "sure/error.hpp"
#include "sure/evaluate.hpp"
#include "sure/perturb.hpp"
#include "sure/rng.hpp"
#include "sure/text.hpp"

namespace sure {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Oracle score

double oracle_score(const OracleRequest& req, LlmGateway& gateway) {
  if (req.answers.empty()) throw ValidationError("oracle score needs at least one answer");
  double sum = 0.0;
  for (const auto& answer : req.answers) {
    if (answer.empty()) continue;  // zero tokens, zero contribution
    sum += gateway.score_continuation(req.model, req.context, " " + answer).total();
  }
  return sum / static_cast<double>(req.answers.size());
}

ExtremePair select_extreme_pair(const Query& query, const std::vector<Document>& candidates,
                                const ModelRef& model, LlmGateway& gateway,
                                const AnswerMatchPolicy& policy) {
  std::vector<const Document*> docs;
  for (const auto& d : candidates) {
    if (contains_answer(d.text, query.answers, policy)) docs.push_back(&d);
  }
  if (docs.size() < 2) throw TooFewCandidates(docs.size());
  std::sort(docs.begin(), docs.end(),
            [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });

  std::vector<double> scores;
  for (const Document* d : docs) {
    scores.push_back(oracle_score(
        OracleRequest{build_reader_prompt(d->text, query.question), query.answers, model},
        gateway));
  }
  std::size_t hi = 0;
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (scores[i] > scores[hi]) hi = i;
  }
  std::size_t lo = hi == 0 ? 1 : 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i != hi && scores[i] < scores[lo]) lo = i;
  }
  return ExtremePair{docs[hi]->doc_id, docs[lo]->doc_id, scores[hi], scores[lo]};
}

// ---------------------------------------------------------------------------
// Features

std::string_view feature_key(FeatureKind k) {
  switch (k) {
    case FeatureKind::Flesch: return "flesch";
    case FeatureKind::Distinct1: return "distinct1";
    case FeatureKind::Dtd: return "dtd";
    case FeatureKind::Ppl: return "ppl";
    case FeatureKind::TokenLength: return "toklen";
  }
  return "";
}

std::string_view feature_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::Flesch: return "Flesch";
    case FeatureKind::Distinct1: return "Distinct-1";
    case FeatureKind::Dtd: return "DTD";
    case FeatureKind::Ppl: return "PPL";
    case FeatureKind::TokenLength: return "TokenLength";
  }
  return "";
}

FeatureKind parse_feature(std::string_view key) {
  for (auto k : {FeatureKind::Flesch, FeatureKind::Distinct1, FeatureKind::Dtd, FeatureKind::Ppl,
                 FeatureKind::TokenLength}) {
    if (feature_key(k) == key || feature_name(k) == key) return k;
  }
  throw ConfigError("unknown feature: " + std::string(key));
}

namespace {

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

}  // namespace

std::size_t count_syllables(std::string_view word) {
  std::string w;
  for (char c : word) {
    if (c >= 'A' && c <= 'Z') w.push_back(static_cast<char>(c - 'A' + 'a'));
    else if (c >= 'a' && c <= 'z') w.push_back(c);
  }
  std::size_t groups = 0;
  bool in_vowel = false;
  for (char c : w) {
    const bool v = is_vowel(c);
    if (v && !in_vowel) ++groups;
    in_vowel = v;
  }
  if (w.size() >= 2 && w.back() == 'e') {
    const bool consonant_le =
        w.size() >= 3 && w[w.size() - 2] == 'l' && !is_vowel(w[w.size() - 3]);
    if (!consonant_le && groups > 0) --groups;
  }
  return std::max<std::size_t>(1, groups);
}

double flesch_reading_ease(std::string_view text) {
  const auto words = text::split_words(text);
  if (words.empty()) throw ValidationError("Flesch score needs non-empty text");
  const auto sentences = split_sentences(text);
  std::size_t syllables = 0;
  for (const auto& w : words) syllables += count_syllables(w);
  const double nw = static_cast<double>(words.size());
  const double ns = static_cast<double>(std::max<std::size_t>(1, sentences.size()));
  return 206.835 - 1.015 * (nw / ns) - 84.6 * (static_cast<double>(syllables) / nw);
}

double distinct1(std::string_view text) {
  const auto words = text::split_words(text::fold_case(text));
  if (words.empty()) throw ValidationError("Distinct-1 needs non-empty text");
  const std::set<std::string> unique(words.begin(), words.end());
  return static_cast<double>(unique.size()) / static_cast<double>(words.size());
}

double perplexity(std::string_view text, const ModelRef& model, LlmGateway& gateway) {
  const auto scored = gateway.score_continuation(model, "", std::string(text));
  if (scored.logprobs.empty()) throw ProtocolError("no scored tokens for perplexity");
  return std::exp(-scored.total() / static_cast<double>(scored.logprobs.size()));
}

TokenCount token_length(std::string_view text, const ModelRef* model, LlmGateway* gateway) {
  if (model && gateway) {
    if (auto n = gateway->count_tokens(*model, std::string(text))) {
      return TokenCount{static_cast<double>(*n), false};
    }
  }
  return TokenCount{static_cast<double>(text::split_words(text).size()), true};
}

Annotations load_annotations(const std::filesystem::path& path) {
  Annotations out;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    try {
      const auto id = row.at("doc_id").get<std::string>();
      if (!out.emplace(id, row.at("dtd").get<double>()).second) throw DuplicateId(id);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line, e.what());
    }
  }
  return out;
}

double extract_feature(FeatureKind kind, std::string_view text, const FeatureContext& aux) {
  switch (kind) {
    case FeatureKind::Flesch: return flesch_reading_ease(text);
    case FeatureKind::Distinct1: return distinct1(text);
    case FeatureKind::Dtd: {
      if (!aux.annotations) throw MissingAnnotation(aux.doc_id);
      auto it = aux.annotations->find(aux.doc_id);
      if (it == aux.annotations->end()) throw MissingAnnotation(aux.doc_id);
      return it->second;
    }
    case FeatureKind::Ppl:
      if (!aux.gateway || !aux.model) throw ConfigError("PPL needs a scoring gateway");
      return perplexity(text, *aux.model, *aux.gateway);
    case FeatureKind::TokenLength: {
      const auto t = token_length(text, aux.model ? &*aux.model : nullptr, aux.gateway);
      if (t.fallback && aux.token_fallback) *aux.token_fallback = true;
      return t.value;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

namespace {

std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  for (double x : v) {
    if (std::isnan(x)) throw ValidationError("K-S samples must not contain NaN");
  }
  std::sort(v.begin(), v.end());
  return v;
}

// max |i*m - j*n| over the pooled distinct values, i.e. D * n * m.
std::uint64_t ks_scaled(const std::vector<double>& a, const std::vector<double>& b) {
  const std::uint64_t n = a.size();
  const std::uint64_t m = b.size();
  std::size_t i = 0;
  std::size_t j = 0;
  std::uint64_t best = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    const std::uint64_t lhs = i * m;
    const std::uint64_t rhs = j * n;
    best = std::max(best, lhs > rhs ? lhs - rhs : rhs - lhs);
  }
  return best;
}

}  // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySample();
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  return static_cast<double>(ks_scaled(sa, sb)) /
         (static_cast<double>(sa.size()) * static_cast<double>(sb.size()));
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda >= 1.0) {
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
      const double term = std::exp(-2.0 * j * j * lambda * lambda);
      sum += (j % 2 == 1) ? term : -term;
      if (term < 1e-12) break;
    }
    return std::clamp(2.0 * sum, DBL_MIN, 1.0);
  }
  // Small lambda: 1 - Q = sqrt(2 pi)/lambda * sum exp(-(2j-1)^2 pi^2 / (8 lambda^2)).
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double cdf = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double k = 2.0 * j - 1.0;
    const double term = std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
    cdf += term;
    if (term < 1e-300 || term < 1e-17 * cdf) break;
  }
  cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
  return std::clamp(1.0 - cdf, DBL_MIN, 1.0);
}

double ks_pvalue(double d, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw EmptySample();
  if (d <= 0.0) return 1.0;
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * d);
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
  KsResult r;
  r.n = a.size();
  r.m = b.size();
  r.statistic = ks_statistic(a, b);
  r.p_value = ks_pvalue(r.statistic, r.n, r.m);
  return r;
}

double ks_exact_pvalue(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EmptySample();
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const std::uint64_t n = sa.size();
  const std::uint64_t m = sb.size();
  const std::uint64_t observed = ks_scaled(sa, sb);

  std::vector<double> pooled(sa);
  pooled.insert(pooled.end(), sb.begin(), sb.end());
  std::sort(pooled.begin(), pooled.end());
  // A lattice point (i, j) is only compared at the end of a run of tied
  // pooled values; inside a run the labels are not ordered.
  const auto checked = [&](std::size_t k) {
    return k == pooled.size() || pooled[k - 1] != pooled[k];
  };
  // count[i] = number of label sequences reaching (i, k - i) with every
  // checked point strictly below the observed statistic.
  std::vector<long double> count(n + 1, 0.0L);
  count[0] = 1.0L;
  for (std::size_t k = 1; k <= pooled.size(); ++k) {
    std::vector<long double> next(n + 1, 0.0L);
    for (std::size_t i = 0; i <= n && i <= k; ++i) {
      const std::size_t j = k - i;
      if (j > m) continue;
      long double c = 0.0L;
      if (i > 0) c += count[i - 1];
      if (j > 0) c += count[i];
      if (checked(k)) {
        const std::uint64_t lhs = i * m;
        const std::uint64_t rhs = j * n;
        if ((lhs > rhs ? lhs - rhs : rhs - lhs) >= observed) c = 0.0L;
      }
      next[i] = c;
    }
    count.swap(next);
  }
  long double total = 1.0L;  // C(n+m, n)
  for (std::uint64_t t = 1; t <= n; ++t) total = total * static_cast<long double>(m + t) / t;
  const long double p = 1.0L - count[n] / total;
  return static_cast<double>(std::clamp(p, 0.0L, 1.0L));
}

// ---------------------------------------------------------------------------
// Preliminary experiment

std::vector<PrelimRow> run_preliminary(const std::vector<FeatureSamples>& samples, double alpha) {
  std::vector<PrelimRow> out;
  for (const auto& s : samples) {
    const auto exp = ks_test(s.first, s.last);
    out.push_back(PrelimRow{"experimental", s.kind, exp, exp.p_value < alpha});
    const auto ctl = ks_test(s.control_a, s.control_b);
    out.push_back(PrelimRow{"control", s.kind, ctl, ctl.p_value < alpha});
  }
  return out;
}

std::pair<std::size_t, std::size_t> sample_control_pair(std::size_t n_candidates,
                                                        std::uint64_t seed,
                                                        std::string_view query_id) {
  if (n_candidates < 2) throw TooFewCandidates(n_candidates);
  SplitMix64 rng(derive_seed(seed, query_id));
  const auto first = static_cast<std::size_t>(rng.below(n_candidates));
  auto second = static_cast<std::size_t>(rng.below(n_candidates - 1));
  if (second >= first) ++second;
  return {first, second};
}

}  // namespace sure
