#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sure {

struct Query {
  std::string id;
  std::string question;
  std::vector<std::string> answers;  // gold aliases, never empty
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
};

/// One (query, document) evaluation unit. `golden` is fixed at creation as
/// contains_answer(document.text, query.answers).
struct Instance {
  std::string instance_id;
  std::string query_id;
  std::string doc_id;
  bool golden = false;
};

struct AnswerMatchPolicy {
  bool case_fold = true;
  bool whitespace_collapse = true;

  nlohmann::json to_json() const;
  static AnswerMatchPolicy from_json(const nlohmann::json& j);
};

/// Id-indexed, insertion-ordered collection with unique ids.
template <typename T>
class Keyed {
public:
  const T* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &items_[it->second];
  }
  const T& at(std::string_view id) const;
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const std::vector<T>& items() const noexcept { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  /// Throws DuplicateId if the id is already present.
  void add(T item);

private:
  std::vector<T> items_;
  std::map<std::string, std::size_t> index_;
};

using QuerySet = Keyed<Query>;
using Corpus = Keyed<Document>;
using InstanceSet = Keyed<Instance>;

/// Normalization applied on both sides of every answer check.
std::string normalize_for_match(std::string_view s, const AnswerMatchPolicy& policy);

/// True iff some normalized, non-empty answer is a substring of the
/// normalized text.
bool contains_answer(std::string_view text, const std::vector<std::string>& answers,
                     const AnswerMatchPolicy& policy = {});

std::vector<std::string> chunk_text(std::string_view text, std::size_t words_per_chunk);

Query query_from_json(const nlohmann::json& j);
Document document_from_json(const nlohmann::json& j);
Instance instance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Query& q);
nlohmann::json to_json(const Document& d);
nlohmann::json to_json(const Instance& i);

QuerySet load_queries(const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);
/// Loads instances and re-checks every golden flag against the referenced
/// query and document.
InstanceSet load_instances(const std::filesystem::path& path, const QuerySet& queries,
                           const Corpus& corpus, const AnswerMatchPolicy& policy);

Instance make_instance(const Query& q, const Document& d, const AnswerMatchPolicy& policy);

// JSONL plumbing shared by every stage.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

}  // namespace sure
