#include "sure/preserve.hpp"

#include "sure/error.hpp"
#include "sure/text.hpp"
#include "sure/util.hpp"

namespace sure {

using nlohmann::json;

std::string_view nli_label_name(NliLabel label) {
  switch (label) {
    case NliLabel::Entailment: return "entailment";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradiction: return "contradiction";
  }
  return "";
}

std::string_view reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::NotBidirectional: return "NotBidirectional";
    case RejectReason::GoldenLostAnswer: return "GoldenLostAnswer";
    case RejectReason::NoiseGainedAnswer: return "NoiseGainedAnswer";
    case RejectReason::NliParseFailure: return "NliParseFailure";
  }
  return "";
}

RejectReason parse_reject_reason(std::string_view s) {
  for (auto r : {RejectReason::NotBidirectional, RejectReason::GoldenLostAnswer,
                 RejectReason::NoiseGainedAnswer, RejectReason::NliParseFailure}) {
    if (reject_reason_name(r) == s) return r;
  }
  throw ValidationError("unknown reject reason: " + std::string(s));
}

std::string build_nli_prompt(std::string_view premise, std::string_view hypothesis) {
  std::string p = "Consider the two passages below.\nPremise: ";
  p += premise;
  p += "\nHypothesis: ";
  p += hypothesis;
  p +=
      "\nDoes the premise semantically entail the hypothesis? Answer with 'entailment' if they "
      "are paraphrases,'contradiction' if they have opposing meanings, or 'neutral' if they are "
      "neither.\nResponse:";
  return p;
}

std::optional<NliLabel> parse_nli_label(std::string_view completion) {
  const std::string folded = text::fold_case(completion);
  std::optional<NliLabel> best;
  std::size_t best_pos = std::string::npos;
  for (auto label : {NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction}) {
    const auto pos = folded.find(nli_label_name(label));
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = label;
    }
  }
  return best;
}

NliLabel nli_entail(const std::string& premise, const std::string& hypothesis, LlmGateway& gateway,
                    int max_retries) {
  const std::string prompt = build_nli_prompt(premise, hypothesis);
  const ModelRef model = gateway.model(Role::Nli);
  std::string reply;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    reply = gateway.chat(model, prompt, attempt);
    if (auto label = parse_nli_label(reply)) return *label;
  }
  throw NliParseFailure(reply);
}

bool bidirectional_equivalent(const std::string& a, const std::string& b, LlmGateway& gateway,
                              int max_retries) {
  if (nli_entail(a, b, gateway, max_retries) != NliLabel::Entailment) return false;
  return nli_entail(b, a, gateway, max_retries) == NliLabel::Entailment;
}

PreservationVerdict preserve_ground_truth(bool golden, std::string_view perturbed_text,
                                          const std::vector<std::string>& answers,
                                          const AnswerMatchPolicy& policy) {
  const bool has = contains_answer(perturbed_text, answers, policy);
  if (golden && !has) return PreservationVerdict::reject(RejectReason::GoldenLostAnswer);
  if (!golden && has) return PreservationVerdict::reject(RejectReason::NoiseGainedAnswer);
  return PreservationVerdict::keep();
}

std::string matchable_text(const PerturbedPair& pair) {
  const auto cat = pair.kind.category();
  if (cat == Category::Format || cat == Category::Metadata) {
    return extract_plain_text(pair.kind.variant(), pair.perturbed_text).text;
  }
  return pair.perturbed_text;
}

json Rejection::to_json() const {
  return json{{"pair_id", pair_id}, {"reject_reason", reject_reason_name(reason)}};
}

FilterResult filter_pairs(const std::vector<PerturbedPair>& pairs, const InstanceSet& instances,
                          const QuerySet& queries, LlmGateway* gateway,
                          const AnswerMatchPolicy& policy, const FilterOptions& opts) {
  // Resolve everything up front so a dangling reference fails before any
  // model call is spent.
  std::vector<const Query*> resolved(pairs.size());
  std::vector<bool> golden(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Instance* inst = instances.find(pairs[i].instance_id);
    if (!inst) throw ReferenceError("instance " + pairs[i].instance_id);
    const Query* q = queries.find(inst->query_id);
    if (!q) throw ReferenceError("query " + inst->query_id);
    resolved[i] = q;
    golden[i] = inst->golden;
    const bool needs_nli = opts.nli_all || pairs[i].kind.model_based();
    if (needs_nli && !gateway) throw ConfigError("NLI check requested but no gateway configured");
  }

  auto verdicts = parallel_map<PreservationVerdict>(
      pairs.size(), opts.workers, [&](std::size_t i) {
        const auto& pair = pairs[i];
        auto v = preserve_ground_truth(golden[i], matchable_text(pair), resolved[i]->answers, policy);
        if (!v.kept) return v;
        if (opts.nli_all || pair.kind.model_based()) {
          try {
            if (!bidirectional_equivalent(pair.original_text, pair.perturbed_text, *gateway,
                                          opts.nli_retries)) {
              return PreservationVerdict::reject(RejectReason::NotBidirectional);
            }
          } catch (const NliParseFailure& e) {
            warn(pair.pair_id + ": " + e.what());
            return PreservationVerdict::reject(RejectReason::NliParseFailure);
          }
        }
        return v;
      });

  FilterResult out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (verdicts[i].kept) {
      out.kept.push_back(pairs[i]);
    } else {
      out.rejected.push_back(Rejection{pairs[i].pair_id, *verdicts[i].reject_reason});
    }
  }
  return out;
}

}  // namespace sure
