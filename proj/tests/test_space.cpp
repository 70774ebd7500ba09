#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"

using namespace s3;
using namespace s3::test;

TEST_CASE("cardinality of an all-singleton space is 1") {
  CHECK(cardinality(singleton_space()) == 1);
}

TEST_CASE("cardinality matches brute-force enumeration on a one-stage variant") {
  // Stage 1 free in depth/embed, everything else singleton.
  auto space = make_space({
      {DimensionKind::Depth, {{{1, 2}, {1}, {1}, {1}}, 1.0}},
      {DimensionKind::EmbedDim, {{{8, 16}, {8}, {8}, {8}}, 1.0}},
      {DimensionKind::MlpRatio, same({2})},
      {DimensionKind::WindowSize, same({2})},
      {DimensionKind::NumHeads, same({2})},
      {DimensionKind::QkvDim, same({8})},
  });
  // 2 embeds * (1^1 + 1^2) depth assignments = 4.
  CHECK(cardinality(space) == 4);
  auto all = enumerate_all(space);
  CHECK(all.size() == 4);
  std::set<std::string> encodings;
  for (const auto& a : all) encodings.insert(encode(a));
  CHECK(encodings.size() == 4);
}

TEST_CASE("cardinality of the published initial space") {
  // Per stage: 3 embeds * 3 mlps * sum_{d in {2,3,4}} (2*3*3)^d
  //          = 9 * (18^2 + 18^3 + 18^4) = 9 * 111132 = 1000188.
  BigInt per_stage = 9 * (BigInt(18 * 18) + BigInt(18 * 18 * 18) + BigInt(18 * 18 * 18 * 18));
  CHECK(per_stage == 1000188);
  CHECK(cardinality(initial_space()) == boost::multiprecision::pow(per_stage, 4));

  // Truncated one-stage variant, cross-checked by full enumeration.
  auto truncated = make_space({
      {DimensionKind::Depth, {{{2, 3}, {1}, {1}, {1}}, 1.0}},
      {DimensionKind::EmbedDim, {{{224, 256, 288}, {8}, {8}, {8}}, 64.0}},
      {DimensionKind::MlpRatio, {{{3, 3.5, 4}, {2}, {2}, {2}}, 0.5}},
      {DimensionKind::WindowSize, {{{7, 14}, {2}, {2}, {2}}, 7.0}},
      {DimensionKind::NumHeads, {{{7, 8, 9}, {2}, {2}, {2}}, 1.0}},
      {DimensionKind::QkvDim, {{{224, 256, 288}, {8}, {8}, {8}}, 64.0}},
  });
  auto all = enumerate_all(truncated);
  CHECK(BigInt(all.size()) == cardinality(truncated));
  std::set<std::string> encodings;
  for (const auto& a : all) encodings.insert(encode(a));
  CHECK(encodings.size() == all.size());
}

TEST_CASE("cardinality equals distinct encodings on an enumerable space") {
  auto space = enum_space();
  auto all = enumerate_all(space);
  std::set<std::string> encodings;
  for (const auto& a : all) encodings.insert(encode(a));
  CHECK(BigInt(encodings.size()) == cardinality(space));
}

TEST_CASE("sampling a singleton space always yields the single architecture") {
  auto space = singleton_space();
  std::mt19937_64 rng(1);
  auto first = sample_uniform(space, rng);
  for (int i = 0; i < 20; ++i) CHECK(sample_uniform(space, rng) == first);
}

TEST_CASE("sampling with an unsatisfiable divisibility constraint exhausts") {
  auto space = make_space({
      {DimensionKind::Depth, same({1})},
      {DimensionKind::EmbedDim, same({8})},
      {DimensionKind::MlpRatio, same({2})},
      {DimensionKind::WindowSize, same({2})},
      {DimensionKind::NumHeads, same({3})},
      {DimensionKind::QkvDim, same({224})},
  });
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_uniform(space, rng), SamplingExhausted);
}

TEST_CASE("uniform marginals within 3 sigma over 10000 samples") {
  auto space = toy_space();
  std::mt19937_64 rng(7);
  const int n = 10000;
  int depth1 = 0, embed8 = 0, mlp1 = 0;
  for (int i = 0; i < n; ++i) {
    auto a = sample_uniform(space, rng);
    a.validate_in(space);
    if (a.stages[0].depth == 1) depth1++;
    if (a.stages[1].embed == 8) embed8++;
    if (a.stages[2].mlp == 1.0) mlp1++;
  }
  // Two-choice marginals: p = 0.5, sigma = sqrt(0.25 / n) = 0.005.
  const double band = 3 * 0.005;
  CHECK(std::abs(depth1 / double(n) - 0.5) < band);
  CHECK(std::abs(embed8 / double(n) - 0.5) < band);
  CHECK(std::abs(mlp1 / double(n) - 0.5) < band);
}

TEST_CASE("encode/decode round-trips random samples exactly") {
  auto space = initial_space();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    auto a = sample_uniform(space, rng);
    auto text = encode(a);
    CHECK(decode(text) == a);
    CHECK(encode(decode(text)) == text);
  }
}

TEST_CASE("decode rejects malformed text with a position") {
  // Declared depth 3 but only two block entries.
  std::string bad = "d3:e8:m2:w2n1q8,w2n1q8/d1:e8:m2:w2n1q8/d1:e8:m2:w2n1q8/d1:e8:m2:w1n1q8";
  CHECK_THROWS_AS(decode(bad), ParseError);
  CHECK_THROWS_AS(decode("garbage"), ParseError);
  CHECK_THROWS_AS(decode(""), ParseError);
  try {
    decode(bad);
  } catch (const ParseError& e) {
    CHECK(e.position > 0);
  }
}

TEST_CASE("partition_by_choice handles stage- and block-level kinds") {
  auto space = toy_space();
  Architecture a = decode("d1:e8:m1:w2n1q8/d1:e8:m1:w2n1q8/d1:e8:m1:w2n1q8/d1:e8:m1:w1n1q8");
  Architecture b = decode("d2:e8:m1:w2n1q8,w4n1q8/d1:e8:m1:w2n1q8/d1:e8:m1:w2n1q8/d1:e8:m1:w1n1q8");
  a.validate_in(space);
  b.validate_in(space);

  SUBCASE("single sample, stage-level") {
    auto groups = partition_by_choice({{a, 0.3}}, DimensionKind::Depth, 3);
    REQUIRE(groups.size() == 1);
    CHECK(groups.at(1.0) == std::vector<double>{0.3});
  }

  SUBCASE("two samples split into singleton groups") {
    auto groups = partition_by_choice({{a, 0.3}, {b, 0.4}}, DimensionKind::Depth, 1);
    REQUIRE(groups.size() == 2);
    CHECK(groups.at(1.0) == std::vector<double>{0.3});
    CHECK(groups.at(2.0) == std::vector<double>{0.4});
  }

  SUBCASE("block-level sample appears in every group it uses") {
    auto groups = partition_by_choice({{a, 0.3}, {b, 0.4}}, DimensionKind::WindowSize, 1);
    REQUIRE(groups.size() == 2);
    CHECK(groups.at(2.0) == std::vector<double>{0.3, 0.4});
    CHECK(groups.at(4.0) == std::vector<double>{0.4});
  }

  SUBCASE("stage-level groups are disjoint and sizes sum to N") {
    std::vector<std::pair<Architecture, double>> samples;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 64; ++i) samples.emplace_back(sample_uniform(space, rng), i * 0.01);
    for (auto kind : {DimensionKind::Depth, DimensionKind::EmbedDim, DimensionKind::MlpRatio}) {
      for (int s = 1; s <= 4; ++s) {
        auto groups = partition_by_choice(samples, kind, s);
        std::size_t total = 0;
        for (const auto& [v, errs] : groups) total += errs.size();
        CHECK(total == samples.size());
      }
    }
  }
}

TEST_CASE("space json round-trip") {
  auto space = initial_space();
  auto text = space.to_json();
  auto back = SearchSpace::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(cardinality(back) == cardinality(space));
  CHECK_THROWS_AS(SearchSpace::from_json("{"), ConfigError);
  CHECK_THROWS_AS(SearchSpace::from_json("{\"stages\": 3}"), ConfigError);
}
