#include <doctest.h>

#include "helpers.hpp"
#include "sure/error.hpp"
#include "sure/preserve.hpp"

using namespace sure;
using sure::testing::TempDir;
using nlohmann::json;

namespace {

json nli_rule(const std::string& premise, const std::string& hypothesis, const std::string& reply) {
  return json{{"model", "nli"},
              {"all_contains", {"Premise: " + premise + "\nHypothesis: " + hypothesis + "\n"}},
              {"text", reply}};
}

struct World {
  QuerySet queries;
  Corpus corpus;
  InstanceSet instances;

  World() {
    queries.add(Query{"q1", "Who led the US in 1933?", {"Roosevelt"}});
    corpus.add(Document{"gold", "FDR", "President Roosevelt led the country."});
    corpus.add(Document{"noise", "Other", "The weather was cold."});
    instances.add(make_instance(queries.at("q1"), corpus.at("gold"), {}));
    instances.add(make_instance(queries.at("q1"), corpus.at("noise"), {}));
  }

  PerturbedPair pair(const std::string& doc, Variant v, const std::string& perturbed) const {
    PerturbedPair p;
    p.instance_id = "q1:" + doc;
    p.pair_id = make_pair_id(p.instance_id, v);
    p.kind = PerturbationKind(v);
    p.original_text = corpus.at(doc).text;
    p.perturbed_text = perturbed;
    if (v == Variant::Random) p.seed = 1;
    return p;
  }
};

}  // namespace

TEST_CASE("NLI prompt and label parsing") {
  const auto p = build_nli_prompt("P", "H");
  CHECK(p.find("Premise: P\nHypothesis: H\n") != std::string::npos);
  CHECK(p.find("Answer with 'entailment'") != std::string::npos);
  CHECK(parse_nli_label("entailment") == NliLabel::Entailment);
  CHECK(parse_nli_label("It is Neutral.") == NliLabel::Neutral);
  CHECK(parse_nli_label("CONTRADICTION, not entailment") == NliLabel::Contradiction);
  CHECK_FALSE(parse_nli_label("maybe").has_value());
  CHECK(parse_reject_reason(reject_reason_name(RejectReason::NoiseGainedAnswer)) ==
        RejectReason::NoiseGainedAnswer);
  CHECK(reject_reason_name(RejectReason::GoldenLostAnswer) == "GoldenLostAnswer");
}

TEST_CASE("nli_entail through the mock") {
  TempDir dir;
  auto gw = testing::mock_gateway(dir, {nli_rule("a", "b", "entailment"),
                                        nli_rule("c", "d", "It is Neutral."),
                                        nli_rule("e", "f", "maybe")});
  CHECK(nli_entail("a", "b", *gw) == NliLabel::Entailment);
  CHECK(nli_entail("c", "d", *gw) == NliLabel::Neutral);
  const auto before = gw->stats().network_calls;
  CHECK_THROWS_AS(nli_entail("e", "f", *gw, 2), NliParseFailure);
  CHECK(gw->stats().network_calls - before == 3);
}

TEST_CASE("bidirectional_equivalent") {
  TempDir dir;
  auto gw = testing::mock_gateway(
      dir, {nli_rule("a", "b", "entailment"), nli_rule("b", "a", "entailment"),
            nli_rule("a", "c", "entailment"), nli_rule("c", "a", "neutral"),
            nli_rule("a", "d", "contradiction"), nli_rule("d", "a", "entailment")});
  CHECK(bidirectional_equivalent("a", "b", *gw));
  CHECK_FALSE(bidirectional_equivalent("a", "c", *gw));
  const auto before = gw->stats().network_calls;
  CHECK_FALSE(bidirectional_equivalent("a", "d", *gw));
  CHECK(gw->stats().network_calls - before == 1);
}

TEST_CASE("preserve_ground_truth") {
  const std::vector<std::string> ans{"Roosevelt"};
  CHECK(preserve_ground_truth(true, "President Roosevelt spoke", ans, {}).kept);
  const auto lost = preserve_ground_truth(true, "the president spoke", ans, {});
  CHECK_FALSE(lost.kept);
  CHECK(lost.reject_reason == RejectReason::GoldenLostAnswer);
  const auto gained = preserve_ground_truth(false, "Roosevelt appears", ans, {});
  CHECK(gained.reject_reason == RejectReason::NoiseGainedAnswer);
  CHECK(preserve_ground_truth(false, "nothing here", ans, {}).kept);
}

TEST_CASE("matchable_text unwraps structured renders") {
  World w;
  const auto p = w.pair("gold", Variant::Html,
                        render_format(Variant::Html, "T", "Roosevelt & co"));
  CHECK(matchable_text(p) == "Roosevelt & co");
  const auto q = w.pair("gold", Variant::Reverse, "x y");
  CHECK(matchable_text(q) == "x y");
}

TEST_CASE("filter_pairs") {
  World w;
  const std::string orig = w.corpus.at("gold").text;
  TempDir dir;
  auto gw = testing::mock_gateway(
      dir, {nli_rule(orig, "Roosevelt, the president, led.", "entailment"),
            nli_rule("Roosevelt, the president, led.", orig, "entailment"),
            nli_rule(orig, "Roosevelt led nothing.", "entailment"),
            nli_rule("Roosevelt led nothing.", orig, "neutral"),
            json{{"model", "nli"}, {"text", "unsure"}}});

  const std::vector<PerturbedPair> pairs = {
      w.pair("gold", Variant::Json, render_format(Variant::Json, "FDR", orig)),
      w.pair("gold", Variant::Simple, "Roosevelt, the president, led."),
      w.pair("gold", Variant::Complex, "Roosevelt led nothing."),
      w.pair("gold", Variant::LlmGenerated, "the president led."),
      w.pair("noise", Variant::Markdown,
             render_format(Variant::Markdown, "Roosevelt", "cold")),  // title only
      w.pair("noise", Variant::Yaml, render_format(Variant::Yaml, "x", "Roosevelt was cold")),
      w.pair("gold", Variant::SelfGenerated, "Roosevelt is mentioned, oddly."),
  };
  std::vector<std::string> warnings;
  auto prev = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  FilterOptions opts;
  opts.workers = 3;
  const auto res = filter_pairs(pairs, w.instances, w.queries, gw.get(), {}, opts);
  set_warning_sink(prev);

  REQUIRE(res.kept.size() == 3);
  CHECK(res.kept[0].pair_id == pairs[0].pair_id);
  CHECK(res.kept[1].pair_id == pairs[1].pair_id);
  CHECK(res.kept[2].pair_id == pairs[4].pair_id);
  REQUIRE(res.rejected.size() == 4);
  CHECK(res.rejected[0].reason == RejectReason::NotBidirectional);
  CHECK(res.rejected[1].reason == RejectReason::GoldenLostAnswer);
  CHECK(res.rejected[2].reason == RejectReason::NoiseGainedAnswer);
  CHECK(res.rejected[3].reason == RejectReason::NliParseFailure);
  CHECK(res.rejected[3].to_json() ==
        json{{"pair_id", pairs[6].pair_id}, {"reject_reason", "NliParseFailure"}});
  CHECK(warnings.size() == 1);
}

TEST_CASE("rule-based pairs never reach the NLI model") {
  World w;
  TempDir dir;
  auto gw = testing::mock_gateway(dir, {json{{"text", "entailment"}}});
  const std::string orig = w.corpus.at("gold").text;
  std::vector<PerturbedPair> pairs = {
      w.pair("gold", Variant::Reverse, orig),
      w.pair("gold", Variant::Random, orig),
      w.pair("gold", Variant::Json, render_format(Variant::Json, "t", orig)),
      w.pair("gold", Variant::TimestampPost,
             render_metadata(Variant::TimestampPost, "t", orig, MetadataConfig{})),
  };
  const auto res = filter_pairs(pairs, w.instances, w.queries, gw.get(), {});
  CHECK(res.kept.size() == 4);
  CHECK(gw->stats().network_calls == 0);
  CHECK(filter_pairs(pairs, w.instances, w.queries, nullptr, {}).kept.size() == 4);

  FilterOptions all;
  all.nli_all = true;
  filter_pairs(pairs, w.instances, w.queries, gw.get(), {}, all);
  CHECK(gw->stats().network_calls > 0);
}

TEST_CASE("filter_pairs reference and configuration errors") {
  World w;
  auto p = w.pair("gold", Variant::Reverse, "x");
  p.instance_id = "q9:gold";
  CHECK_THROWS_AS(filter_pairs({p}, w.instances, w.queries, nullptr, {}), ReferenceError);
  const auto s = w.pair("gold", Variant::Simple, "Roosevelt");
  CHECK_THROWS_AS(filter_pairs({s}, w.instances, w.queries, nullptr, {}), ConfigError);
}
