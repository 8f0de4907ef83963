#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/evaluate.hpp"
#include "sure/perturb.hpp"

namespace sure {

struct SigSelection {
  std::size_t quota_per_perturbation = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> required_models;  // at least two
};

struct SigEntry {
  std::string pair_id;
  Variant variant = Variant::Simple;
  std::map<std::string, int> c_by_model;
};

struct SigVariantStats {
  Variant variant = Variant::Simple;
  std::size_t pool = 0;
  std::size_t selected = 0;
  bool short_pool = false;
  std::map<std::string, std::size_t> lose_by_model;  // C = 1
  std::map<std::string, std::size_t> win_by_model;   // C = -1
};

struct SigResult {
  std::vector<SigEntry> entries;  // sorted (variant, pair_id)
  std::vector<SigVariantStats> stats;
};

/// Pairs unrobust (C != 0) under every required model, sampled per
/// variant with a seeded shuffle. `results` maps model name to its records.
SigResult select_sig(const std::map<std::string, std::vector<ComparisonRecord>>& results,
                     const SigSelection& sel);

enum class TrainMode { Sft, Dpo };
enum class PassageRole { Original, Perturbed };

std::string_view passage_role_name(PassageRole r);

struct TrainInput {
  std::string pair_id;
  std::string question;
  std::vector<std::string> answers;
  std::string original_passage;
  std::string perturbed_passage;
  std::optional<std::string> incorrect_answer;  // needed for DPO
};

struct TrainSample {
  TrainMode mode = TrainMode::Sft;
  std::string prompt;
  std::string response;  // SFT
  std::string chosen;    // DPO
  std::string rejected;  // DPO
  std::string source_pair_id;
  PassageRole passage_role = PassageRole::Original;

  nlohmann::json to_json() const;
  static TrainSample from_json(const nlohmann::json& j, TrainMode mode);
  bool operator==(const TrainSample&) const = default;
};

/// The answer alias emitted as the target: the first one contained in both
/// passages. Throws MissingPassage / AnswerAbsent.
std::string training_answer(const TrainInput& in, const AnswerMatchPolicy& policy);

std::vector<TrainSample> export_sft(const std::vector<TrainInput>& inputs,
                                    const AnswerMatchPolicy& policy = {});
std::vector<TrainSample> export_dpo(const std::vector<TrainInput>& inputs,
                                    const AnswerMatchPolicy& policy = {});

}  // namespace sure
