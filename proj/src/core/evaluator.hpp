#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "supernet.hpp"

namespace s3 {

// Architecture -> top-1 error in [0,1]. Deterministic; results are cached by
// canonical encoding so re-sampling an architecture is free.
class PerformanceOracle {
 public:
  virtual ~PerformanceOracle() = default;

  double error(const Architecture& arch);

  // Hook run before a space is measured (supernet-backed oracles retrain
  // here). Default: nothing.
  virtual void prepare(const SearchSpace& space, std::uint64_t seed);

  void clear_cache() { cache_.clear(); }
  std::size_t cache_size() const { return cache_.size(); }

 protected:
  virtual double compute(const Architecture& arch) = 0;

 private:
  std::map<std::string, double> cache_;
};

// Wraps a sandwich-trained supernet. prepare() builds a fresh supernet for
// the space and trains it; with `finetune` the previous weights are carried
// into the new allocation first.
class SupernetOracle : public PerformanceOracle {
 public:
  SupernetOracle(const ModelShape& shape, const Dataset& train, const Dataset& val,
                 const TrainConfig& cfg, bool finetune = false);
  // Adopt an already trained supernet; prepare() keeps retraining behavior.
  SupernetOracle(Supernet net, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                 bool finetune = false);

  void prepare(const SearchSpace& space, std::uint64_t seed) override;
  Supernet& net();

 protected:
  double compute(const Architecture& arch) override;

 private:
  ModelShape shape_;
  Dataset train_;
  Dataset val_;
  TrainConfig cfg_;
  bool finetune_;
  std::optional<Supernet> net_;
};

// One additive term of the synthetic landscape: err decreases with the
// dimension when coeff > 0 (the term is subtracted).
struct TabularTerm {
  DimensionKind kind = DimensionKind::Depth;
  int stage = 1;
  double coeff = 0.0;
};

struct TabularConfig {
  double base = 0.9;
  double eta = 0.0;  // bounded pseudo-noise amplitude
  std::vector<TabularTerm> terms;
};

// Deterministic closed-form landscape with known monotone tendencies:
// err(a) = clamp(base - sum coeff * phi(a) + eta * noise(encode(a)), 0, 1),
// phi = the dimension's stage value (block-level kinds: mean over blocks),
// noise = hash-derived value in [-1, 1].
class TabularOracle : public PerformanceOracle {
 public:
  explicit TabularOracle(TabularConfig cfg) : cfg_(std::move(cfg)) {}
  const TabularConfig& config() const { return cfg_; }

  // phi for one term, exposed so tests can enumerate the landscape.
  static double contribution(const Architecture& arch, DimensionKind kind, int stage);
  static double noise(const std::string& encoding);

 protected:
  double compute(const Architecture& arch) override;

 private:
  TabularConfig cfg_;
};

struct SampleDiag {
  std::int64_t attempts = 0;
  std::int64_t accepted = 0;
};

// Rejection-sample N architectures satisfying the budget (and the window
// geometry of `shape`). Throws ConstraintInfeasible after 1000*N attempts,
// reporting the acceptance rate seen so far.
std::vector<Architecture> sample_constrained(const SearchSpace& space, const ModelShape& shape,
                                             const ResourceBudget& budget, int n,
                                             std::uint64_t seed, SampleDiag* diag = nullptr);

struct EtReport {
  std::vector<std::pair<Architecture, double>> samples;
  double q_e = 0.0;  // expected error
  double q_t = 0.0;  // top-tier error
  double q = 0.0;    // (q_e + q_t) / 2
  int top_k = 0;
  ResourceBudget budget;

  std::string to_json() const;
};

// min(50, ceil(0.05 * n)): a 50-of-1000 top-tier ratio kept at any scale.
int default_top_k(int n);

// top_k <= 0 selects the default rule.
EtReport et_error(std::vector<std::pair<Architecture, double>> samples, int top_k = 0,
                  const ResourceBudget& budget = {});

// Empirical distribution function at the sorted unique error values.
std::vector<std::pair<double, double>> edf(const std::vector<double>& errors);

// F(x) from precomputed EDF points (0 below the smallest sample).
double edf_at(const std::vector<std::pair<double, double>>& points, double x);

}  // namespace s3
