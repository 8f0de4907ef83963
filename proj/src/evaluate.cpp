#include "sure/evaluate.hpp"

#include <algorithm>
#include <tuple>

#include "sure/error.hpp"
#include "sure/text.hpp"
#include "sure/util.hpp"

namespace sure {

using nlohmann::json;

std::string PromptBundle::render() const {
  return instruction + "\n\nDocument: " + grounding + "\nQuestion: " + question + "\nAnswer:";
}

std::string build_reader_prompt(std::string_view grounding, std::string_view question) {
  return PromptBundle{std::string(kReaderInstruction), std::string(grounding),
                      std::string(question)}
      .render();
}

std::string build_closedbook_prompt(std::string_view question) {
  return std::string(kClosedBookInstruction) + "\n\nQuestion: " + std::string(question) +
         "\nAnswer:";
}

int judge_string(std::string_view response, const std::vector<std::string>& answers,
                 const AnswerMatchPolicy& policy) {
  return contains_answer(response, answers, policy) ? 1 : 0;
}

std::string build_judge_prompt(std::string_view question, const std::vector<std::string>& answers,
                               std::string_view response) {
  std::string p =
      "You are grading answers to questions. Compare the response with the gold answers and "
      "reason step by step about whether the response expresses one of them. Then finish with a "
      "final line that is exactly \"VERDICT: CORRECT\" or \"VERDICT: INCORRECT\".\n\n"
      "Question: Who wrote the novel Pride and Prejudice?\n"
      "Gold answers: [\"Jane Austen\"]\n"
      "Response: Austen\n"
      "Reasoning: The response gives the surname of Jane Austen, which identifies the same "
      "person as the gold answer.\n"
      "VERDICT: CORRECT\n\n"
      "Question: What is the capital of Australia?\n"
      "Gold answers: [\"Canberra\"]\n"
      "Response: Sydney\n"
      "Reasoning: Sydney is the largest city in Australia but not its capital, so the response "
      "does not match the gold answer.\n"
      "VERDICT: INCORRECT\n\n";
  p += "Question: ";
  p += question;
  p += "\nGold answers: ";
  p += json(answers).dump(-1, ' ', false, json::error_handler_t::replace);
  p += "\nResponse: ";
  p += response;
  p += "\nReasoning:";
  return p;
}

std::optional<int> parse_judge_verdict(std::string_view completion) {
  std::optional<int> verdict;
  std::size_t start = 0;
  while (start <= completion.size()) {
    auto end = completion.find('\n', start);
    if (end == std::string_view::npos) end = completion.size();
    const std::string line = text::fold_case(text::trim(completion.substr(start, end - start)));
    constexpr std::string_view kTag = "verdict:";
    if (text::starts_with(line, kTag)) {
      const std::string value = text::trim(std::string_view(line).substr(kTag.size()));
      if (value == "correct") verdict = 1;
      else if (value == "incorrect") verdict = 0;
    }
    start = end + 1;
  }
  return verdict;
}

int judge_llm(const std::string& question, const std::vector<std::string>& answers,
              const std::string& response, LlmGateway& gateway, int max_retries) {
  const std::string prompt = build_judge_prompt(question, answers, response);
  const ModelRef model = gateway.model(Role::Judge);
  std::string reply;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    reply = gateway.chat(model, prompt, attempt);
    if (auto v = parse_judge_verdict(reply)) return *v;
  }
  throw JudgeParseError(reply);
}

int compare(int y, int y_hat) {
  if ((y != 0 && y != 1) || (y_hat != 0 && y_hat != 1)) {
    throw ValidationError("correctness labels must be 0 or 1");
  }
  return y - y_hat;
}

std::string_view subset_name(Subset s) {
  switch (s) {
    case Subset::KG: return "KG";
    case Subset::KN: return "KN";
    case Subset::UG: return "UG";
    case Subset::UN: return "UN";
  }
  return "";
}

Subset parse_subset(std::string_view s) {
  for (Subset x : kAllSubsets) {
    if (subset_name(x) == s) return x;
  }
  throw ValidationError("unknown subset: " + std::string(s));
}

Subset partition(int closedbook_correct, bool golden) {
  if (closedbook_correct) return golden ? Subset::KG : Subset::KN;
  return golden ? Subset::UG : Subset::UN;
}

json ComparisonRecord::to_json() const {
  return json{{"pair_id", pair_id},
              {"model", model},
              {"subset", subset_name(subset)},
              {"y", y},
              {"y_hat", y_hat},
              {"c", c},
              {"category", category_key(category)},
              {"variant", variant_key(variant)},
              {"response", response},
              {"perturbed_response", perturbed_response}};
}

ComparisonRecord ComparisonRecord::from_json(const json& j) {
  ComparisonRecord r;
  try {
    r.pair_id = j.at("pair_id").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.subset = parse_subset(j.at("subset").get<std::string>());
    r.y = j.at("y").get<int>();
    r.y_hat = j.at("y_hat").get<int>();
    r.c = j.at("c").get<int>();
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.category = category_of(r.variant);
    r.response = j.value("response", std::string());
    r.perturbed_response = j.value("perturbed_response", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed result record: ") + e.what());
  }
  if (r.c != compare(r.y, r.y_hat)) throw ValidationError("c != y - y_hat for " + r.pair_id);
  return r;
}

MetricsSummary compute_metrics(std::span<const ComparisonRecord> records) {
  if (records.empty()) throw EmptyCell();
  std::size_t lose = 0, robust = 0, win = 0, y = 0, y_hat = 0;
  for (const auto& r : records) {
    switch (r.c) {
      case 1: ++lose; break;
      case 0: ++robust; break;
      case -1: ++win; break;
      default: throw ValidationError("comparison label out of range for " + r.pair_id);
    }
    y += static_cast<std::size_t>(r.y);
    y_hat += static_cast<std::size_t>(r.y_hat);
  }
  const double n = static_cast<double>(records.size());
  MetricsSummary m;
  m.n = records.size();
  m.lr = 100.0 * static_cast<double>(lose) / n;
  m.rr = 100.0 * static_cast<double>(robust) / n;
  m.wr = 100.0 * static_cast<double>(win) / n;
  m.org = 100.0 * static_cast<double>(y) / n;
  m.acc = 100.0 * static_cast<double>(y_hat) / n;
  return m;
}

Aggregate aggregate(std::span<const ComparisonRecord> records) {
  std::map<std::tuple<Category, Variant, Subset>, std::vector<ComparisonRecord>> cells;
  for (const auto& r : records) cells[{r.category, r.variant, r.subset}].push_back(r);

  Aggregate out;
  std::map<std::pair<Category, Subset>, std::vector<double>> by_category;
  for (const auto& [key, cell] : cells) {
    const auto& [cat, var, sub] = key;
    auto m = compute_metrics(cell);
    out.rows.push_back(ReportRow{cat, var, sub, m});
    by_category[{cat, sub}].push_back(m.rr);
  }
  for (const auto& [key, rrs] : by_category) {
    double sum = 0.0;
    for (double v : rrs) sum += v;
    out.category_rr.push_back(
        CategoryRr{key.first, key.second, sum / static_cast<double>(rrs.size())});
  }
  return out;
}

json ClosedBookEntry::to_json() const {
  return json{{"query_id", query_id}, {"model", model}, {"response", response},
              {"correct", correct}};
}

ClosedBookEntry ClosedBookEntry::from_json(const json& j) {
  try {
    return ClosedBookEntry{j.at("query_id").get<std::string>(), j.at("model").get<std::string>(),
                           j.value("response", std::string()), j.at("correct").get<int>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed closed-book record: ") + e.what());
  }
}

namespace {

int judge(const Query& q, const std::string& response, LlmGateway& gateway,
          const AnswerMatchPolicy& policy, const EvalOptions& opts) {
  if (opts.judge == JudgeMode::Llm) {
    return judge_llm(q.question, q.answers, response, gateway, opts.judge_retries);
  }
  return judge_string(response, q.answers, policy);
}

}  // namespace

std::vector<ClosedBookEntry> classify_closedbook(const QuerySet& queries, const ModelRef& reader,
                                                 LlmGateway& gateway,
                                                 const AnswerMatchPolicy& policy,
                                                 const EvalOptions& opts) {
  const auto& qs = queries.items();
  return parallel_map<ClosedBookEntry>(qs.size(), opts.workers, [&](std::size_t i) {
    const Query& q = qs[i];
    const std::string response = text::trim(gateway.chat(reader, build_closedbook_prompt(q.question)));
    return ClosedBookEntry{q.id, reader.name, response, judge(q, response, gateway, policy, opts)};
  });
}

std::vector<ComparisonRecord> evaluate_pairs(const std::vector<PerturbedPair>& pairs,
                                             const InstanceSet& instances,
                                             const QuerySet& queries,
                                             const std::map<std::string, int>& closedbook,
                                             const ModelRef& reader, LlmGateway& gateway,
                                             const AnswerMatchPolicy& policy,
                                             const EvalOptions& opts) {
  struct Resolved {
    const Query* query;
    bool golden;
    int known;
  };
  std::vector<Resolved> resolved;
  resolved.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Instance* inst = instances.find(p.instance_id);
    if (!inst) throw ReferenceError("instance " + p.instance_id);
    const Query* q = queries.find(inst->query_id);
    if (!q) throw ReferenceError("query " + inst->query_id);
    auto cb = closedbook.find(q->id);
    if (cb == closedbook.end()) throw ReferenceError("closed-book label for query " + q->id);
    resolved.push_back(Resolved{q, inst->golden, cb->second});
  }

  return parallel_map<ComparisonRecord>(pairs.size(), opts.workers, [&](std::size_t i) {
    const auto& p = pairs[i];
    const auto& res = resolved[i];
    ComparisonRecord r;
    r.pair_id = p.pair_id;
    r.model = reader.name;
    r.category = p.kind.category();
    r.variant = p.kind.variant();
    r.subset = partition(res.known, res.golden);
    r.response = text::trim(
        gateway.chat(reader, build_reader_prompt(p.original_text, res.query->question)));
    r.perturbed_response = text::trim(
        gateway.chat(reader, build_reader_prompt(p.perturbed_text, res.query->question)));
    r.y = judge(*res.query, r.response, gateway, policy, opts);
    r.y_hat = judge(*res.query, r.perturbed_response, gateway, policy, opts);
    r.c = compare(r.y, r.y_hat);
    return r;
  });
}

}  // namespace sure
