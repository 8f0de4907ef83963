#include "sure/corpus.hpp"

#include <fstream>

#include "sure/error.hpp"
#include "sure/text.hpp"

namespace sure {

using nlohmann::json;

template <typename T>
const T& Keyed<T>::at(std::string_view id) const {
  if (const T* p = find(id)) return *p;
  throw ReferenceError(std::string(id));
}

namespace {
const std::string& id_of(const Query& q) { return q.id; }
const std::string& id_of(const Document& d) { return d.doc_id; }
const std::string& id_of(const Instance& i) { return i.instance_id; }
}  // namespace

template <typename T>
void Keyed<T>::add(T item) {
  const std::string id = id_of(item);
  if (index_.count(id)) throw DuplicateId(id);
  index_.emplace(id, items_.size());
  items_.push_back(std::move(item));
}

template class Keyed<Query>;
template class Keyed<Document>;
template class Keyed<Instance>;

json AnswerMatchPolicy::to_json() const {
  return json{{"case_fold", case_fold}, {"whitespace_collapse", whitespace_collapse}};
}

AnswerMatchPolicy AnswerMatchPolicy::from_json(const json& j) {
  AnswerMatchPolicy p;
  if (j.is_object()) {
    p.case_fold = j.value("case_fold", true);
    p.whitespace_collapse = j.value("whitespace_collapse", true);
  }
  return p;
}

std::string normalize_for_match(std::string_view s, const AnswerMatchPolicy& policy) {
  std::string out(s);
  if (policy.case_fold) out = text::fold_case(out);
  if (policy.whitespace_collapse) out = text::collapse_whitespace(out);
  return out;
}

bool contains_answer(std::string_view text, const std::vector<std::string>& answers,
                     const AnswerMatchPolicy& policy) {
  const std::string hay = normalize_for_match(text, policy);
  for (const auto& a : answers) {
    std::string needle = normalize_for_match(a, policy);
    if (policy.whitespace_collapse) needle = text::trim(needle);
    if (needle.empty()) continue;
    if (hay.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::vector<std::string> chunk_text(std::string_view text, std::size_t words_per_chunk) {
  if (words_per_chunk == 0) throw ValidationError("words_per_chunk must be >= 1");
  const auto words = text::split_words(text);
  std::vector<std::string> chunks;
  for (std::size_t i = 0; i < words.size(); i += words_per_chunk) {
    const std::size_t end = std::min(words.size(), i + words_per_chunk);
    std::string chunk;
    for (std::size_t w = i; w < end; ++w) {
      if (w > i) chunk.push_back(' ');
      chunk += words[w];
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

namespace {

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(std::string("missing string field '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

Query query_from_json(const json& j) {
  Query q;
  q.id = require_string(j, "id");
  q.question = require_string(j, "question");
  if (!j.contains("answers") || !j.at("answers").is_array()) {
    throw ValidationError("missing array field 'answers'");
  }
  for (const auto& a : j.at("answers")) {
    if (!a.is_string()) throw ValidationError("answers must be strings");
    q.answers.push_back(a.get<std::string>());
  }
  if (q.answers.empty()) throw EmptyAnswers(q.id);
  if (q.question.empty()) throw ValidationError("empty question for " + q.id);
  return q;
}

Document document_from_json(const json& j) {
  Document d;
  d.doc_id = require_string(j, "doc_id");
  d.title = j.contains("title") && j.at("title").is_string() ? j.at("title").get<std::string>()
                                                              : std::string();
  d.text = require_string(j, "text");
  if (d.text.empty()) throw ValidationError("empty text for document " + d.doc_id);
  return d;
}

Instance instance_from_json(const json& j) {
  Instance i;
  i.instance_id = require_string(j, "instance_id");
  i.query_id = require_string(j, "query_id");
  i.doc_id = require_string(j, "doc_id");
  if (!j.contains("golden") || !j.at("golden").is_boolean()) {
    throw ValidationError("missing boolean field 'golden'");
  }
  i.golden = j.at("golden").get<bool>();
  return i;
}

json to_json(const Query& q) {
  return json{{"id", q.id}, {"question", q.question}, {"answers", q.answers}};
}
json to_json(const Document& d) {
  return json{{"doc_id", d.doc_id}, {"title", d.title}, {"text", d.text}};
}
json to_json(const Instance& i) {
  return json{{"instance_id", i.instance_id},
              {"query_id", i.query_id},
              {"doc_id", i.doc_id},
              {"golden", i.golden}};
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (!rows.back().is_object()) throw ParseError(path.string(), line_no, "not a JSON object");
  }
  return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

namespace {

// Validation errors on a given line are reported as ParseError(line_no),
// except the id-level errors that carry their own type.
template <typename T, typename F>
Keyed<T> load_keyed(const std::filesystem::path& path, F&& convert) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  Keyed<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (!j.is_object()) throw ParseError(path.string(), line_no, "not a JSON object");
    T item;
    try {
      item = convert(j);
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    out.add(std::move(item));
  }
  return out;
}

}  // namespace

QuerySet load_queries(const std::filesystem::path& path) {
  return load_keyed<Query>(path, query_from_json);
}

Corpus load_corpus(const std::filesystem::path& path) {
  return load_keyed<Document>(path, document_from_json);
}

Instance make_instance(const Query& q, const Document& d, const AnswerMatchPolicy& policy) {
  Instance i;
  i.instance_id = q.id + ":" + d.doc_id;
  i.query_id = q.id;
  i.doc_id = d.doc_id;
  i.golden = contains_answer(d.text, q.answers, policy);
  return i;
}

InstanceSet load_instances(const std::filesystem::path& path, const QuerySet& queries,
                           const Corpus& corpus, const AnswerMatchPolicy& policy) {
  auto set = load_keyed<Instance>(path, instance_from_json);
  for (const auto& inst : set) {
    const Query& q = queries.at(inst.query_id);
    const Document& d = corpus.at(inst.doc_id);
    if (contains_answer(d.text, q.answers, policy) != inst.golden) {
      throw ValidationError("golden flag of instance " + inst.instance_id +
                            " does not match its document under the answer policy");
    }
  }
  return set;
}

}  // namespace sure
