#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sure/error.hpp"
#include "sure/evaluate.hpp"
#include "sure/stats.hpp"

using namespace sure;
using sure::testing::TempDir;
using nlohmann::json;

namespace {

const ModelRef kReader{"reader", Role::Reader};

json lp_rule(const std::string& needle, std::vector<std::string> tokens, std::vector<json> lps) {
  return json{{"path", "completions"},
              {"all_contains", {needle}},
              {"logprobs", {{"tokens", tokens}, {"logprobs", lps}}}};
}

}  // namespace

TEST_CASE("oracle_score sums and averages continuation logprobs") {
  TempDir dir;
  auto gw = testing::mock_gateway(
      dir, {lp_rule("ctx Roosevelt", {" Roo", "sevelt"}, {-0.5, -1.0}),
            lp_rule("ctx Alpha", {" Alpha"}, {-1.0}),
            lp_rule("ctx Beta", {" Be", "ta"}, {-1.0, -2.0})});
  CHECK(oracle_score(OracleRequest{"ctx", {"Roosevelt"}, kReader}, *gw) == -1.5);
  CHECK(oracle_score(OracleRequest{"ctx", {"Alpha", "Beta"}, kReader}, *gw) == -2.0);
  CHECK(oracle_score(OracleRequest{"ctx", {"Alpha", ""}, kReader}, *gw) == -0.5);
  CHECK_THROWS_AS(oracle_score(OracleRequest{"ctx", {}, kReader}, *gw), ValidationError);
}

TEST_CASE("select_extreme_pair") {
  const Query q{"q1", "Who?", {"Roosevelt"}};
  const std::vector<Document> docs = {
      {"a", "", "Roosevelt a"}, {"b", "", "Roosevelt b"}, {"c", "", "Roosevelt c"},
      {"z", "", "no answer here"}};
  TempDir dir;
  auto gw = testing::mock_gateway(
      dir, {lp_rule("Roosevelt a\nQuestion", {" Roosevelt"}, {-1.0}),
            lp_rule("Roosevelt b\nQuestion", {" Roosevelt"}, {-5.0}),
            lp_rule("Roosevelt c\nQuestion", {" Roosevelt"}, {-3.0})});
  const auto p = select_extreme_pair(q, docs, kReader, *gw);
  CHECK(p.first_doc_id == "a");
  CHECK(p.last_doc_id == "b");
  CHECK(p.first_score == -1.0);
  CHECK(p.last_score == -5.0);
  CHECK_THROWS_AS(select_extreme_pair(q, {docs[0], docs[3]}, kReader, *gw), TooFewCandidates);

  auto tie = testing::mock_gateway(dir, {lp_rule("Roosevelt c\nQuestion", {" Roosevelt"}, {-4.0}),
                                         lp_rule("Roosevelt", {" Roosevelt"}, {-2.0})});
  const auto t = select_extreme_pair(q, {docs[2], docs[1], docs[0]}, kReader, *tie);
  CHECK(t.first_doc_id == "a");
  CHECK(t.last_doc_id == "c");

  auto flat = testing::mock_gateway(dir, {lp_rule("Roosevelt", {" Roosevelt"}, {-2.0})});
  const auto f = select_extreme_pair(q, {docs[1], docs[0]}, kReader, *flat);
  CHECK(f.first_doc_id == "a");
  CHECK(f.last_doc_id == "b");
}

TEST_CASE("readability and diversity features") {
  CHECK(count_syllables("the") == 1);
  CHECK(count_syllables("cat") == 1);
  CHECK(count_syllables("table") == 2);
  CHECK(count_syllables("make") == 1);
  CHECK(count_syllables("beautiful") == 3);
  CHECK(count_syllables("rhythm") == 1);
  CHECK(flesch_reading_ease("The cat sat.") == doctest::Approx(119.19).epsilon(1e-12));
  CHECK(distinct1("the cat the dog") == 0.75);
  CHECK(distinct1("The the THE") == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(flesch_reading_ease("   "), ValidationError);
  CHECK_THROWS_AS(distinct1(""), ValidationError);
  CHECK(parse_feature("distinct1") == FeatureKind::Distinct1);
  CHECK(feature_name(FeatureKind::Dtd) == "DTD");
  CHECK_THROWS_AS(parse_feature("nope"), ConfigError);
}

TEST_CASE("perplexity and token length through the mock") {
  TempDir dir;
  const double ln2 = std::log(2.0);
  auto gw = testing::mock_gateway(
      dir, {lp_rule("x y z", {"x", " y", " z"}, {nullptr, -ln2, -ln2}),
            json{{"path", "completions"}, {"all_contains", {"nousage"}},
                 {"raw", {{"choices", json::array({json{{"text", ""}}})}}}},
            json{{"path", "completions"}, {"synthetic_logprobs", true}}});
  CHECK(std::abs(perplexity("x y z", kReader, *gw) - 2.0) < 1e-12);

  FeatureContext ctx;
  ctx.gateway = gw.get();
  ctx.model = kReader;
  CHECK(std::abs(extract_feature(FeatureKind::Ppl, "x y z", ctx) - 2.0) < 1e-12);
  bool fallback = false;
  ctx.token_fallback = &fallback;
  CHECK(extract_feature(FeatureKind::TokenLength, "abcdefgh", ctx) == 2.0);
  CHECK_FALSE(fallback);
  CHECK(extract_feature(FeatureKind::TokenLength, "nousage here", ctx) == 2.0);
  CHECK(fallback);
  CHECK(token_length("a b c", nullptr, nullptr).fallback);
  CHECK_THROWS_AS(extract_feature(FeatureKind::Ppl, "x", FeatureContext{}), ConfigError);
}

TEST_CASE("DTD annotations") {
  TempDir dir;
  testing::write_jsonl(dir / "a.jsonl", {json{{"doc_id", "d1"}, {"dtd", 7}}});
  const auto ann = load_annotations(dir / "a.jsonl");
  FeatureContext ctx;
  ctx.annotations = &ann;
  ctx.doc_id = "d1";
  CHECK(extract_feature(FeatureKind::Dtd, "text", ctx) == 7.0);
  ctx.doc_id = "d2";
  CHECK_THROWS_AS(extract_feature(FeatureKind::Dtd, "text", ctx), MissingAnnotation);
  testing::write_jsonl(dir / "dup.jsonl", {json{{"doc_id", "d1"}, {"dtd", 1}},
                                           json{{"doc_id", "d1"}, {"dtd", 2}}});
  CHECK_THROWS_AS(load_annotations(dir / "dup.jsonl"), DuplicateId);
}

TEST_CASE("K-S basics") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(ks_statistic(a, b) == 1.0);
  const auto same = ks_test(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 1.0);
  CHECK(ks_exact_pvalue(a, a) == 1.0);
  CHECK(ks_exact_pvalue(a, b) == doctest::Approx(0.1));  // 2 of 20 splits
  CHECK_THROWS_AS(ks_test(std::vector<double>{}, a), EmptySample);
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{NAN}, a), ValidationError);
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(10.0) > 0.0);
}

TEST_CASE("K-S statistic equals the brute-force ECDF sup") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<std::size_t> size(1, 120);
    std::uniform_int_distribution<int> v(0, 30);  // ties on purpose
    std::vector<double> a(size(rng)), b(size(rng));
    for (auto& x : a) x = v(rng);
    for (auto& x : b) x = v(rng) + 2;
    CHECK(ks_statistic(a, b) == oracle::ks_brute(a, b));
    const auto r1 = ks_test(a, b), r2 = ks_test(b, a);
    CHECK(r1.statistic == r2.statistic);
    CHECK(r1.p_value == r2.p_value);
    CHECK(r1.p_value > 0.0);
    CHECK(r1.p_value <= 1.0);
  }
}

TEST_CASE("Kolmogorov tail matches frozen reference values") {
  const auto golden =
      json::parse(read_file(testing::data_dir() / "data/kolmogorov_golden.json"));
  for (const auto& row : golden) {
    const double lambda = row.at("lambda").get<double>();
    CHECK_MESSAGE(std::abs(kolmogorov_q(lambda) - row.at("q").get<double>()) < 1e-9, lambda);
  }
  double prev = 1.0;
  for (double l = 0.01; l < 4.0; l += 0.01) {
    const double q = kolmogorov_q(l);
    CHECK(q <= prev + 1e-15);
    prev = q;
  }
}

TEST_CASE("exact p-value equals the permutation oracle") {
  std::mt19937_64 rng(12);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) {
      std::uniform_int_distribution<int> v(0, 5);
      std::vector<double> a(n), b(m);
      for (auto& x : a) x = v(rng);
      for (auto& x : b) x = v(rng);
      CHECK(std::abs(ks_exact_pvalue(a, b) - oracle::ks_permutation_pvalue(a, b)) < 1e-12);
    }
  }
}

TEST_CASE("preliminary experiment and control sampling") {
  FeatureSamples s;
  s.kind = FeatureKind::Flesch;
  s.first = oracle::normal_samples(1, 500, 0.0);
  s.last = oracle::normal_samples(2, 500, 1.0);
  s.control_a = oracle::normal_samples(3, 500, 0.0);
  s.control_b = oracle::normal_samples(4, 500, 0.0);
  const auto rows = run_preliminary({s});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].group == "experimental");
  CHECK(rows[0].significant);
  CHECK(rows[1].group == "control");
  CHECK(run_preliminary({}).empty());

  for (int t = 0; t < 200; ++t) {
    const auto [x, y] = sample_control_pair(3, 99, "q" + std::to_string(t));
    CHECK(x != y);
    CHECK(x < 3);
    CHECK(y < 3);
  }
  CHECK(sample_control_pair(5, 1, "q1") == sample_control_pair(5, 1, "q1"));
  CHECK_THROWS_AS(sample_control_pair(1, 1, "q1"), TooFewCandidates);
}
