#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "sure/rng.hpp"

using namespace sure;
using nlohmann::json;

namespace {

const json& golden() {
  static const json g = json::parse(read_file(testing::data_dir() / "data/shuffle_golden.json"));
  return g;
}

}  // namespace

TEST_CASE("SplitMix64 raw stream matches the frozen golden file") {
  for (const auto& row : golden().at("raw")) {
    SplitMix64 rng(std::stoull(row.at("seed").get<std::string>()));
    for (const auto& v : row.at("values")) CHECK(rng.next() == std::stoull(v.get<std::string>()));
  }
}

TEST_CASE("Fisher-Yates shuffle matches the frozen golden file") {
  std::size_t checked = 0;
  for (const auto& row : golden().at("shuffles")) {
    const auto n = row.at("n").get<std::size_t>();
    std::vector<std::size_t> items(n);
    std::iota(items.begin(), items.end(), 0);
    SplitMix64 rng(std::stoull(row.at("seed").get<std::string>()));
    fisher_yates(items, rng);
    CHECK(items == row.at("perm").get<std::vector<std::size_t>>());
    ++checked;
  }
  CHECK(checked == 36);
}

TEST_CASE("seed 7 on four items") {
  std::vector<std::string> items{"a", "b", "c", "d"};
  SplitMix64 rng(7);
  fisher_yates(items, rng);
  CHECK(items == std::vector<std::string>{"b", "c", "a", "d"});
}

TEST_CASE("derive_seed matches the frozen golden file") {
  for (const auto& row : golden().at("derived")) {
    CHECK(derive_seed(std::stoull(row.at("seed").get<std::string>()),
                      row.at("key").get<std::string>()) ==
          std::stoull(row.at("value").get<std::string>()));
  }
}

TEST_CASE("below is in range and uniform-ish") {
  SplitMix64 rng(99);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    const auto v = rng.below(6);
    REQUIRE(v < 6);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
