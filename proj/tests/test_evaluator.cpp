#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/evaluator.hpp"
#include "helpers.hpp"

using namespace s3;
using namespace s3::test;

namespace {

std::vector<std::pair<Architecture, double>> with_errors(const std::vector<double>& errs) {
  // distinct architectures carrying the given error values
  std::vector<std::pair<Architecture, double>> out;
  auto space = toy_space();
  std::mt19937_64 rng(3);
  for (double e : errs) out.emplace_back(sample_uniform(space, rng), e);
  return out;
}

}  // namespace

TEST_CASE("E-T arithmetic on the hand-computed case") {
  auto report = et_error(with_errors({0.1, 0.2, 0.3, 0.4}), 2);
  CHECK(report.q_e == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(report.q_t == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(report.q == doctest::Approx(0.20).epsilon(1e-12));
  CHECK(report.top_k == 2);
}

TEST_CASE("E-T degenerate and invariant cases") {
  auto single = et_error(with_errors({0.37}), 1);
  CHECK(single.q_e == 0.37);
  CHECK(single.q_t == 0.37);
  CHECK(single.q == 0.37);

  auto equal = et_error(with_errors({0.3, 0.3, 0.3}), 2);
  CHECK(equal.q_t == equal.q_e);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> errs;
  for (int i = 0; i < 40; ++i) errs.push_back(uni(rng));
  auto rep = et_error(with_errors(errs), 7);
  CHECK(rep.q_t <= rep.q);
  CHECK(rep.q <= rep.q_e);
  CHECK(rep.q >= *std::min_element(errs.begin(), errs.end()));
  CHECK(rep.q <= *std::max_element(errs.begin(), errs.end()));

  CHECK_THROWS_AS(et_error({}), EmptySample);
  CHECK_THROWS_AS(et_error(with_errors({0.1, 0.2}), 3), ConfigError);
}

TEST_CASE("default top-k keeps the 5 percent rule capped at 50") {
  CHECK(default_top_k(1000) == 50);
  CHECK(default_top_k(2000) == 50);
  CHECK(default_top_k(100) == 5);
  CHECK(default_top_k(10) == 1);
  CHECK(default_top_k(30) == 2);  // ceil(1.5)
  auto rep = et_error(with_errors({0.1, 0.2, 0.3}));
  CHECK(rep.top_k == 1);
}

TEST_CASE("E-T report serialization is ordered by encoding") {
  auto rep = et_error(with_errors({0.4, 0.1, 0.3}), 1);
  for (std::size_t i = 1; i < rep.samples.size(); ++i)
    CHECK(encode(rep.samples[i - 1].first) <= encode(rep.samples[i].first));
  auto text = rep.to_json();
  CHECK(text.find("\"q_e\"") != std::string::npos);
  CHECK(text.find("\"samples\"") != std::string::npos);
}

TEST_CASE("EDF basics") {
  auto pts = edf({0.2, 0.4});
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == std::pair{0.2, 0.5});
  CHECK(pts[1] == std::pair{0.4, 1.0});
  CHECK(edf_at(pts, 0.1) == 0.0);
  CHECK(edf_at(pts, 0.2) == 0.5);
  CHECK(edf_at(pts, 0.3) == 0.5);
  CHECK(edf_at(pts, 1.0) == 1.0);

  auto tied = edf({0.3, 0.3, 0.5});
  REQUIRE(tied.size() == 2);
  CHECK(tied[0].second == doctest::Approx(2.0 / 3));
  CHECK(tied.back().second == 1.0);
}

TEST_CASE("EDF of uniform pseudo-errors stays near the identity CDF") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> errs;
  for (int i = 0; i < 1000; ++i) errs.push_back(uni(rng));
  auto pts = edf(errs);
  double sup = 0.0;
  double prev = 0.0;
  for (const auto& [e, f] : pts) {
    // deviation attains its extremes at sample points from either side
    sup = std::max(sup, std::abs(f - e));
    sup = std::max(sup, std::abs(prev - e));
    CHECK(f >= prev);
    prev = f;
  }
  CHECK(pts.back().second == 1.0);
  CHECK(sup < 0.06);  // Kolmogorov bound at 3 sigma for n = 1000
}

TEST_CASE("unbounded sampling accepts everything") {
  SampleDiag diag;
  auto archs = sample_constrained(toy_space(), toy_shape(), {}, 64, 5, &diag);
  CHECK(archs.size() == 64);
  CHECK(diag.attempts == 64);
  for (const auto& a : archs) a.validate_in(toy_space());
}

TEST_CASE("infeasible budgets fail with diagnostics") {
  ResourceBudget tiny;
  tiny.max_params = 1;
  try {
    sample_constrained(toy_space(), toy_shape(), tiny, 3, 5);
    FAIL("expected ConstraintInfeasible");
  } catch (const ConstraintInfeasible& e) {
    CHECK(std::string(e.what()).find("rate") != std::string::npos);
  }
}

TEST_CASE("acceptance rate matches the enumerated feasible fraction") {
  auto space = enum_space();
  auto shape = toy_shape();
  auto all = enumerate_all(space);
  std::vector<std::int64_t> params;
  for (const auto& a : all) params.push_back(param_count(a, shape));
  std::vector<std::int64_t> sorted = params;
  std::sort(sorted.begin(), sorted.end());
  ResourceBudget budget;
  budget.max_params = sorted[sorted.size() / 2];  // ~half feasible
  // Sampling draws each stage's depth before its blocks, so an architecture's
  // draw probability depends on its depths; weight the enumeration accordingly.
  auto draw_prob = [](const Architecture& a) {
    double p = 1.0;
    for (const auto& st : a.stages) p *= 0.5 * std::pow(0.5, st.depth);
    return p;
  };
  double p_true = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (params[i] < *budget.max_params) p_true += draw_prob(all[i]);

  SampleDiag diag;
  auto archs = sample_constrained(space, shape, budget, 2000, 7, &diag);
  CHECK(archs.size() == 2000);
  const double rate = static_cast<double>(diag.accepted) / static_cast<double>(diag.attempts);
  const double sigma = std::sqrt(p_true * (1 - p_true) / static_cast<double>(diag.attempts));
  CHECK(std::abs(rate - p_true) <= 3 * sigma + 1e-9);
  for (const auto& a : archs) CHECK(within_budget(a, shape, budget));
}

TEST_CASE("windows that do not fit the grid are rejected during sampling") {
  auto space = toy_space();
  for (int s = 1; s <= 4; ++s)
    space.sub(DimensionKind::WindowSize, s).choices = {2, 3};  // 3 never divides 16/8/4/2
  auto archs = sample_constrained(space, toy_shape(), {}, 50, 11);
  for (const auto& a : archs)
    for (const auto& st : a.stages)
      for (const auto& blk : st.blocks) CHECK(blk.window == 2);
}

TEST_CASE("tabular landscape is deterministic, cached and bounded") {
  TabularConfig cfg;
  cfg.base = 0.8;
  cfg.eta = 0.05;
  cfg.terms = {{DimensionKind::Depth, 3, 0.02}, {DimensionKind::EmbedDim, 1, 0.001}};
  TabularOracle oracle(cfg);
  std::mt19937_64 rng(2);
  auto space = toy_space();
  for (int i = 0; i < 100; ++i) {
    auto a = sample_uniform(space, rng);
    double e1 = oracle.error(a);
    CHECK(e1 >= 0.0);
    CHECK(e1 <= 1.0);
    CHECK(oracle.error(a) == e1);
  }
  CHECK(oracle.cache_size() <= 100);

  TabularOracle again(cfg);
  std::mt19937_64 rng2(2);
  for (int i = 0; i < 100; ++i) {
    auto a = sample_uniform(space, rng2);
    CHECK(again.error(a) == oracle.error(a));
  }
}

TEST_CASE("tabular group means follow the configured direction") {
  TabularConfig cfg;
  cfg.base = 0.7;
  cfg.terms = {{DimensionKind::Depth, 3, 0.03},        // deeper stage 3 helps
               {DimensionKind::WindowSize, 1, -0.02}}; // big stage-1 windows hurt
  TabularOracle oracle(cfg);
  auto all = enumerate_all(enum_space());

  auto group_mean = [&](DimensionKind kind, int stage) {
    std::map<double, std::pair<double, int>> acc;
    for (const auto& a : all) {
      double key = TabularOracle::contribution(a, kind, stage);
      auto& slot = acc[key];
      slot.first += oracle.error(a);
      slot.second++;
    }
    std::vector<std::pair<double, double>> means;
    for (auto& [k, v] : acc) means.emplace_back(k, v.first / v.second);
    return means;
  };

  auto depth3 = group_mean(DimensionKind::Depth, 3);
  for (std::size_t i = 1; i < depth3.size(); ++i) CHECK(depth3[i].second < depth3[i - 1].second);
  auto win1 = group_mean(DimensionKind::WindowSize, 1);
  for (std::size_t i = 1; i < win1.size(); ++i) CHECK(win1[i].second > win1[i - 1].second);
}

TEST_CASE("supernet oracle is deterministic across prepare calls") {
  ModelShape shape;
  shape.side = 16;
  shape.channels = 1;
  shape.patch = 2;
  shape.classes = 2;
  SearchSpace space = make_space({
      {DimensionKind::Depth, same({1})},
      {DimensionKind::EmbedDim, same({4, 8})},
      {DimensionKind::MlpRatio, same({1})},
      {DimensionKind::WindowSize, {{{2}, {2}, {2}, {1}}, 1.0}},
      {DimensionKind::NumHeads, same({1})},
      {DimensionKind::QkvDim, same({4, 8})},
  });
  SyntheticConfig dcfg;
  dcfg.n_train = 128;
  dcfg.n_val = 64;
  dcfg.side = 16;
  dcfg.classes = 2;
  auto [train, val] = generate_synthetic(31, dcfg);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch = 16;

  SupernetOracle a(shape, train, val, tc), b(shape, train, val, tc);
  CHECK_THROWS_AS(a.error(maximal_arch(space)), ConfigError);  // not prepared
  a.prepare(space, 77);
  b.prepare(space, 77);
  auto arch = maximal_arch(space);
  CHECK(a.error(arch) == b.error(arch));
  CHECK(a.error(minimal_arch(space)) == b.error(minimal_arch(space)));
}
