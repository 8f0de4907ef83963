#include <doctest.h>

#include "helpers.hpp"
#include "sure/corpus.hpp"
#include "sure/error.hpp"
#include "sure/text.hpp"

using namespace sure;
using sure::testing::TempDir;
using sure::testing::write_jsonl;
using nlohmann::json;

TEST_CASE("text: whitespace collapse and trim") {
  CHECK(text::collapse_whitespace("a \t\n b") == "a b");
  CHECK(text::collapse_whitespace("  a  ") == " a ");
  CHECK(text::trim("  X  ") == "X");
  CHECK(text::trim("\n") == "");
  CHECK(text::split_words(" a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("text: utf-8 round trip and case folding") {
  const std::string s = "Été 東京 Ωmega";
  CHECK(text::encode_utf8(text::decode_utf8(s)) == s);
  CHECK(text::fold_case("ÉTÉ ΩMEGA") == "été ωmega");
  CHECK(text::decode_utf8("\xff").at(0) == U'�');
}

TEST_CASE("contains_answer") {
  CHECK(contains_answer("President Roosevelt spoke", {"Roosevelt"}));
  CHECK(contains_answer("roosevelt  was  here", {"Roosevelt"}, AnswerMatchPolicy{true, true}));
  CHECK_FALSE(contains_answer("Lincoln era", {"Roosevelt"}));
  CHECK_FALSE(contains_answer("roosevelt", {"Roosevelt"}, AnswerMatchPolicy{false, true}));
  CHECK_FALSE(contains_answer("Franklin  Roosevelt", {"Franklin Roosevelt"},
                              AnswerMatchPolicy{true, false}));
  CHECK(contains_answer("Franklin \n Roosevelt", {"franklin roosevelt"}));
  CHECK_FALSE(contains_answer("anything", {""}));
}

TEST_CASE("contains_answer is monotone under extension") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    std::string base = testing::random_word(rng) + " " + testing::random_word(rng);
    const std::string ans = base.substr(0, 1 + rng() % base.size());
    REQUIRE(contains_answer(base, {ans}));
    CHECK(contains_answer(testing::random_word(rng) + " " + base + testing::random_word(rng),
                          {ans}));
  }
}

TEST_CASE("chunk_text") {
  std::string words;
  for (int i = 0; i < 250; ++i) words += "w" + std::to_string(i) + " ";
  const auto chunks = chunk_text(words, 100);
  REQUIRE(chunks.size() == 3);
  CHECK(text::split_words(chunks[0]).size() == 100);
  CHECK(text::split_words(chunks[1]).size() == 100);
  CHECK(text::split_words(chunks[2]).size() == 50);
  CHECK(text::split_words(text::join(chunks, " ")) == text::split_words(words));

  std::string hundred;
  for (int i = 0; i < 100; ++i) hundred += "x ";
  CHECK(chunk_text(hundred, 100).size() == 1);
  CHECK(chunk_text("", 100).empty());
  CHECK_THROWS_AS(chunk_text("a", 0), ValidationError);
}

TEST_CASE("load_queries validation") {
  TempDir dir;
  const auto ok = write_jsonl(dir / "q.jsonl",
                              {json{{"id", "q1"}, {"question", "Who?"}, {"answers", {"A"}}},
                               json{{"id", "q2"}, {"question", "What?"}, {"answers", {"B", "C"}}}});
  const auto qs = load_queries(ok);
  CHECK(qs.size() == 2);
  CHECK(qs.at("q2").answers.size() == 2);

  const auto dup = write_jsonl(dir / "dup.jsonl",
                               {json{{"id", "q1"}, {"question", "Who?"}, {"answers", {"A"}}},
                                json{{"id", "q1"}, {"question", "Who?"}, {"answers", {"A"}}}});
  try {
    load_queries(dup);
    FAIL("expected DuplicateId");
  } catch (const DuplicateId& e) {
    CHECK(e.id() == "q1");
  }

  const auto empty = write_jsonl(
      dir / "empty.jsonl", {json{{"id", "q1"}, {"question", "Who?"}, {"answers", json::array()}}});
  CHECK_THROWS_AS(load_queries(empty), EmptyAnswers);

  write_file_atomic(dir / "bad.jsonl", "{\"id\": \"q1\"}\n{not json\n");
  try {
    load_queries(dir / "bad.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_no() == 1);
  }
}

TEST_CASE("instances recheck golden flags") {
  TempDir dir;
  QuerySet qs;
  qs.add(Query{"q1", "Who led?", {"Roosevelt"}});
  Corpus corpus;
  corpus.add(Document{"d1", "T", "Roosevelt led the country."});
  corpus.add(Document{"d2", "T", "Lincoln led."});
  const auto i1 = make_instance(qs.at("q1"), corpus.at("d1"), {});
  const auto i2 = make_instance(qs.at("q1"), corpus.at("d2"), {});
  CHECK(i1.golden);
  CHECK_FALSE(i2.golden);

  write_jsonl(dir / "i.jsonl", {to_json(i1), to_json(i2)});
  CHECK(load_instances(dir / "i.jsonl", qs, corpus, {}).size() == 2);

  auto tampered = to_json(i2);
  tampered["golden"] = true;
  write_jsonl(dir / "bad.jsonl", {tampered});
  CHECK_THROWS_AS(load_instances(dir / "bad.jsonl", qs, corpus, {}), ValidationError);

  auto dangling = to_json(i1);
  dangling["doc_id"] = "nope";
  write_jsonl(dir / "dangling.jsonl", {dangling});
  CHECK_THROWS_AS(load_instances(dir / "dangling.jsonl", qs, corpus, {}), Error);
}
