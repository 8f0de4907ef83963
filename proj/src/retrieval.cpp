#include "sure/retrieval.hpp"

#include <algorithm>

#include "sure/corpus.hpp"
#include "sure/error.hpp"
#include "sure/gateway.hpp"

namespace sure {

void EmbeddingStore::add(std::string id, Vector v) {
  if (entries_.empty() && dim_ == 0) dim_ = v.size();
  if (v.size() != dim_) throw DimensionMismatch(dim_, v.size());
  if (entries_.count(id)) throw DuplicateId(id);
  entries_.emplace(std::move(id), std::move(v));
}

const Vector* EmbeddingStore::find(const std::string& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingStore EmbeddingStore::subset(const std::vector<std::string>& ids) const {
  EmbeddingStore out(dim_);
  for (const auto& id : ids) {
    const Vector* v = find(id);
    if (!v) throw ReferenceError("embedding for " + id);
    out.add(id, *v);
  }
  return out;
}

double similarity(std::span<const double> q, std::span<const double> d) {
  if (q.size() != d.size()) throw DimensionMismatch(q.size(), d.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sum += q[i] * d[i];
  return sum;
}

std::vector<ScoredDoc> top_k(std::span<const double> query_vec, const EmbeddingStore& store,
                             const RetrievalConfig& cfg) {
  if (store.empty() || cfg.k > store.size()) throw KTooLarge(cfg.k, store.size());
  if (cfg.k == 0) throw ValidationError("k must be positive");
  std::vector<ScoredDoc> scored;
  scored.reserve(store.size());
  for (const auto& [id, vec] : store.entries()) {
    scored.push_back({id, similarity(query_vec, vec)});
  }
  const auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  };
  const auto mid = scored.begin() + static_cast<std::ptrdiff_t>(cfg.k);
  std::partial_sort(scored.begin(), mid, scored.end(), better);
  scored.erase(mid, scored.end());
  return scored;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  EmbeddingStore store;
  std::size_t line_no = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line_no;
    if (!row.contains("id") || !row.at("id").is_string() || !row.contains("vector") ||
        !row.at("vector").is_array()) {
      throw ParseError(path.string(), line_no, "expected {\"id\", \"vector\"}");
    }
    Vector v;
    for (const auto& x : row.at("vector")) {
      if (!x.is_number()) throw ParseError(path.string(), line_no, "non-numeric vector entry");
      v.push_back(x.get<double>());
    }
    if (v.empty()) throw ParseError(path.string(), line_no, "empty vector");
    store.add(row.at("id").get<std::string>(), std::move(v));
  }
  return store;
}

std::vector<Vector> embed_texts(const std::vector<std::string>& texts, LlmGateway& gateway) {
  if (texts.empty()) return {};
  return gateway.embed(gateway.model(Role::Embedder), texts);
}

}  // namespace sure
