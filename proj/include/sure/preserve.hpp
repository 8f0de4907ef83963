#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/gateway.hpp"
#include "sure/perturb.hpp"

namespace sure {

enum class NliLabel { Entailment, Neutral, Contradiction };

std::string_view nli_label_name(NliLabel label);

enum class RejectReason { NotBidirectional, GoldenLostAnswer, NoiseGainedAnswer, NliParseFailure };

std::string_view reject_reason_name(RejectReason r);
RejectReason parse_reject_reason(std::string_view s);

struct PreservationVerdict {
  bool kept = true;
  std::optional<RejectReason> reject_reason;

  static PreservationVerdict keep() { return {}; }
  static PreservationVerdict reject(RejectReason r) { return {false, r}; }
};

std::string build_nli_prompt(std::string_view premise, std::string_view hypothesis);

/// Earliest of entailment / neutral / contradiction, case-insensitive.
std::optional<NliLabel> parse_nli_label(std::string_view completion);

/// Asks the NLI model, re-asking up to `max_retries` times when the answer
/// carries no label. Throws NliParseFailure afterwards.
NliLabel nli_entail(const std::string& premise, const std::string& hypothesis, LlmGateway& gateway,
                    int max_retries = 2);

/// a entails b and b entails a. The reverse direction is only asked when
/// the forward one is Entailment.
bool bidirectional_equivalent(const std::string& a, const std::string& b, LlmGateway& gateway,
                              int max_retries = 2);

PreservationVerdict preserve_ground_truth(bool golden, std::string_view perturbed_text,
                                          const std::vector<std::string>& answers,
                                          const AnswerMatchPolicy& policy);

/// The text the ground-truth check looks at: structured renders are
/// unwrapped first.
std::string matchable_text(const PerturbedPair& pair);

struct Rejection {
  std::string pair_id;
  RejectReason reason;

  nlohmann::json to_json() const;
};

struct FilterOptions {
  bool nli_all = false;  // also run the entailment check on rule-based variants
  int nli_retries = 2;
  std::size_t workers = 8;
};

struct FilterResult {
  std::vector<PerturbedPair> kept;
  std::vector<Rejection> rejected;
};

/// Every input pair ends up in exactly one of kept / rejected, in input
/// order. `gateway` may be null when no pair needs an NLI check.
FilterResult filter_pairs(const std::vector<PerturbedPair>& pairs, const InstanceSet& instances,
                          const QuerySet& queries, LlmGateway* gateway,
                          const AnswerMatchPolicy& policy, const FilterOptions& opts = {});

}  // namespace sure
