#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sure {

class LlmGateway;

using Vector = std::vector<double>;

/// Fixed-dimension id → vector map. Read-only once loaded.
class EmbeddingStore {
public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  /// Throws DimensionMismatch or DuplicateId.
  void add(std::string id, Vector v);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Vector* find(const std::string& id) const;
  const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

  /// Copy holding only the given ids (missing ids are an error).
  EmbeddingStore subset(const std::vector<std::string>& ids) const;

private:
  std::size_t dim_ = 0;
  std::map<std::string, Vector> entries_;
};

struct RetrievalConfig {
  std::size_t k = 1;  // ties broken by doc_id ascending
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const ScoredDoc&) const = default;
};

/// Dot product, no normalization.
double similarity(std::span<const double> q, std::span<const double> d);

/// Exact brute-force top-k: score descending, doc_id ascending on ties.
std::vector<ScoredDoc> top_k(std::span<const double> query_vec, const EmbeddingStore& store,
                             const RetrievalConfig& cfg);

/// embeddings.jsonl: {"id", "vector": [...]} per line.
EmbeddingStore load_embeddings(const std::filesystem::path& path);

/// One vector per text, in input order, from the gateway's embedder model.
std::vector<Vector> embed_texts(const std::vector<std::string>& texts, LlmGateway& gateway);

}  // namespace sure
