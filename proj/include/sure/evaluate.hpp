#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sure/corpus.hpp"
#include "sure/gateway.hpp"
#include "sure/perturb.hpp"

namespace sure {

inline constexpr std::string_view kReaderInstruction =
    "You are given a question and you MUST respond by EXTRACTING the answer (max 5 tokens) from "
    "the provided document. If the document does not contain the answer, respond with NO-RES.";

inline constexpr std::string_view kClosedBookInstruction =
    "You are given a question and you MUST respond with the answer (max 5 tokens). If you do not "
    "know the answer, respond with NO-RES.";

struct PromptBundle {
  std::string instruction{kReaderInstruction};
  std::string grounding;
  std::string question;

  std::string render() const;
};

std::string build_reader_prompt(std::string_view grounding, std::string_view question);
std::string build_closedbook_prompt(std::string_view question);

int judge_string(std::string_view response, const std::vector<std::string>& answers,
                 const AnswerMatchPolicy& policy = {});

std::string build_judge_prompt(std::string_view question, const std::vector<std::string>& answers,
                               std::string_view response);
/// Last line of the form "VERDICT: CORRECT|INCORRECT" (case-insensitive).
std::optional<int> parse_judge_verdict(std::string_view completion);
int judge_llm(const std::string& question, const std::vector<std::string>& answers,
              const std::string& response, LlmGateway& gateway, int max_retries = 2);

int compare(int y, int y_hat);

enum class Subset { KG, KN, UG, UN };

inline constexpr std::array<Subset, 4> kAllSubsets = {Subset::KG, Subset::KN, Subset::UG,
                                                      Subset::UN};

std::string_view subset_name(Subset s);
Subset parse_subset(std::string_view s);
Subset partition(int closedbook_correct, bool golden);
inline bool is_golden_subset(Subset s) { return s == Subset::KG || s == Subset::UG; }

struct ComparisonRecord {
  std::string pair_id;
  std::string model;
  int y = 0;
  int y_hat = 0;
  int c = 0;
  Subset subset = Subset::KG;
  Category category = Category::Style;
  Variant variant = Variant::Simple;
  std::string response;            // reader answer on the original document
  std::string perturbed_response;  // reader answer on the perturbed document

  nlohmann::json to_json() const;
  static ComparisonRecord from_json(const nlohmann::json& j);
};

/// Percentages at full precision; rounding happens only when reporting.
struct MetricsSummary {
  std::size_t n = 0;
  double lr = 0.0;
  double rr = 0.0;
  double wr = 0.0;
  double org = 0.0;
  double acc = 0.0;
};

MetricsSummary compute_metrics(std::span<const ComparisonRecord> records);

struct ReportRow {
  Category category;
  Variant variant;
  Subset subset;
  MetricsSummary metrics;
};

struct CategoryRr {
  Category category;
  Subset subset;
  double mean_rr;
};

struct Aggregate {
  std::vector<ReportRow> rows;           // sorted (category, variant, subset)
  std::vector<CategoryRr> category_rr;   // sorted (category, subset)
};

/// Records of one model. Cells without records are absent, not zero.
Aggregate aggregate(std::span<const ComparisonRecord> records);

enum class JudgeMode { String, Llm };

struct EvalOptions {
  JudgeMode judge = JudgeMode::String;
  std::size_t workers = 8;
  int judge_retries = 2;
};

/// Closed-book correctness per query id for `reader`.
struct ClosedBookEntry {
  std::string query_id;
  std::string model;
  std::string response;
  int correct = 0;

  nlohmann::json to_json() const;
  static ClosedBookEntry from_json(const nlohmann::json& j);
};

std::vector<ClosedBookEntry> classify_closedbook(const QuerySet& queries, const ModelRef& reader,
                                                 LlmGateway& gateway,
                                                 const AnswerMatchPolicy& policy,
                                                 const EvalOptions& opts = {});

/// Asks `reader` about the original and the perturbed grounding of every
/// kept pair and labels the outcome. Output order follows `pairs`.
std::vector<ComparisonRecord> evaluate_pairs(const std::vector<PerturbedPair>& pairs,
                                             const InstanceSet& instances,
                                             const QuerySet& queries,
                                             const std::map<std::string, int>& closedbook,
                                             const ModelRef& reader, LlmGateway& gateway,
                                             const AnswerMatchPolicy& policy,
                                             const EvalOptions& opts = {});

}  // namespace sure
