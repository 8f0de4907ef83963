#include "sure/training.hpp"

#include <algorithm>
#include <set>

#include "sure/error.hpp"
#include "sure/rng.hpp"

namespace sure {

using nlohmann::json;

SigResult select_sig(const std::map<std::string, std::vector<ComparisonRecord>>& results,
                     const SigSelection& sel) {
  if (sel.required_models.size() < 2) {
    throw ConfigError("SIG distillation needs at least two models");
  }
  if (sel.quota_per_perturbation == 0) throw ConfigError("SIG quota must be positive");

  // pair_id -> (variant, c per model) restricted to pairs every model saw.
  std::map<std::string, SigEntry> universe;
  bool first = true;
  for (const auto& model : sel.required_models) {
    auto it = results.find(model);
    if (it == results.end()) throw MissingDependency("evaluate (no results for " + model + ")");
    std::map<std::string, SigEntry> next;
    for (const auto& r : it->second) {
      if (r.c == 0) continue;
      if (first) {
        next[r.pair_id] = SigEntry{r.pair_id, r.variant, {{model, r.c}}};
      } else if (auto prev = universe.find(r.pair_id); prev != universe.end()) {
        SigEntry e = prev->second;
        e.c_by_model[model] = r.c;
        next[r.pair_id] = std::move(e);
      }
    }
    universe = std::move(next);
    first = false;
  }

  std::map<Variant, std::vector<SigEntry>> pools;
  for (auto& [id, e] : universe) pools[e.variant].push_back(e);  // pair_id order

  SigResult out;
  for (auto& [variant, pool] : pools) {
    SigVariantStats st;
    st.variant = variant;
    st.pool = pool.size();
    SplitMix64 rng(derive_seed(sel.seed, variant_key(variant)));
    fisher_yates(pool, rng);
    const std::size_t take = std::min(sel.quota_per_perturbation, pool.size());
    st.selected = take;
    st.short_pool = pool.size() < sel.quota_per_perturbation;
    pool.resize(take);
    std::sort(pool.begin(), pool.end(),
              [](const SigEntry& a, const SigEntry& b) { return a.pair_id < b.pair_id; });
    for (auto& e : pool) {
      for (const auto& [model, c] : e.c_by_model) {
        if (c == 1) ++st.lose_by_model[model];
        else ++st.win_by_model[model];
      }
      out.entries.push_back(std::move(e));
    }
    out.stats.push_back(std::move(st));
  }
  return out;
}

std::string_view passage_role_name(PassageRole r) {
  return r == PassageRole::Original ? "Original" : "Perturbed";
}

json TrainSample::to_json() const {
  json j{{"prompt", prompt}};
  if (mode == TrainMode::Sft) {
    j["response"] = response;
  } else {
    j["chosen"] = chosen;
    j["rejected"] = rejected;
  }
  j["source_pair_id"] = source_pair_id;
  j["passage_role"] = passage_role_name(passage_role);
  return j;
}

TrainSample TrainSample::from_json(const json& j, TrainMode mode) {
  TrainSample s;
  s.mode = mode;
  try {
    s.prompt = j.at("prompt").get<std::string>();
    if (mode == TrainMode::Sft) {
      s.response = j.at("response").get<std::string>();
    } else {
      s.chosen = j.at("chosen").get<std::string>();
      s.rejected = j.at("rejected").get<std::string>();
    }
    s.source_pair_id = j.at("source_pair_id").get<std::string>();
    const auto role = j.at("passage_role").get<std::string>();
    if (role == "Original") s.passage_role = PassageRole::Original;
    else if (role == "Perturbed") s.passage_role = PassageRole::Perturbed;
    else throw ValidationError("unknown passage role: " + role);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed training sample: ") + e.what());
  }
  return s;
}

std::string training_answer(const TrainInput& in, const AnswerMatchPolicy& policy) {
  if (in.original_passage.empty() || in.perturbed_passage.empty()) {
    throw MissingPassage(in.pair_id);
  }
  for (const auto& a : in.answers) {
    if (a.empty()) continue;
    if (contains_answer(in.original_passage, {a}, policy) &&
        contains_answer(in.perturbed_passage, {a}, policy)) {
      return a;
    }
  }
  throw AnswerAbsent(in.pair_id);
}

namespace {

template <typename Fill>
std::vector<TrainSample> export_both(const std::vector<TrainInput>& inputs, TrainMode mode,
                                     Fill fill) {
  std::vector<TrainSample> out;
  out.reserve(inputs.size() * 2);
  for (const auto& in : inputs) {
    for (auto role : {PassageRole::Original, PassageRole::Perturbed}) {
      TrainSample s;
      s.mode = mode;
      s.source_pair_id = in.pair_id;
      s.passage_role = role;
      s.prompt = build_reader_prompt(
          role == PassageRole::Original ? in.original_passage : in.perturbed_passage, in.question);
      fill(in, s);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

std::vector<TrainSample> export_sft(const std::vector<TrainInput>& inputs,
                                    const AnswerMatchPolicy& policy) {
  std::vector<std::string> answers;
  for (const auto& in : inputs) answers.push_back(training_answer(in, policy));
  std::size_t idx = 0;
  return export_both(inputs, TrainMode::Sft, [&](const TrainInput&, TrainSample& s) {
    s.response = answers[idx / 2];
    ++idx;
  });
}

std::vector<TrainSample> export_dpo(const std::vector<TrainInput>& inputs,
                                    const AnswerMatchPolicy& policy) {
  std::vector<std::string> answers;
  for (const auto& in : inputs) {
    const auto chosen = training_answer(in, policy);
    if (!in.incorrect_answer) {
      throw ValidationError("DPO input lacks an incorrect answer: " + in.pair_id);
    }
    if (*in.incorrect_answer == chosen) {
      throw DegeneratePreference(in.pair_id);
    }
    answers.push_back(chosen);
  }
  std::size_t idx = 0;
  return export_both(inputs, TrainMode::Dpo, [&](const TrainInput& in, TrainSample& s) {
    s.chosen = answers[idx / 2];
    s.rejected = *in.incorrect_answer;
    ++idx;
  });
}

}  // namespace sure
