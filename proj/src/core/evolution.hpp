#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evaluator.hpp"

namespace s3 {

// Ordinary least squares y = w*x + b over (choice value, E-T error) points.
struct FitResult {
  double w = 0.0;
  double b = 0.0;
  int points = 0;
  bool degenerate = false;  // single distinct x: w = 0, b = mean y
};

FitResult linear_fit(const std::vector<std::pair<double, double>>& points);

// Floor implements the shift -floor(w/tau)*gamma literally; symmetric uses
// sign(w)*floor(|w|/tau), which does not over-shift for negative slopes.
enum class ShiftMode { Floor, Symmetric };

struct EvolutionConfig {
  int iterations = 3;  // T
  double tau = 0.4;
  // per-kind shift steps, indexed by DimensionKind
  std::array<double, kNumKinds> gamma = {1.0, 64.0, 0.5, 7.0, 1.0, 64.0};
  int samples = 500;  // N per iteration
  int top_k = 0;      // 0 = min(50, ceil(0.05 N)) rule
  ShiftMode mode = ShiftMode::Floor;

  void validate() const;
};

// One step of choice-set evolution. `fallback`, when given, reports that
// pruning emptied the set and the clamped smallest value was kept.
Subspace evolve_subspace(const Subspace& sub, const FitResult& fit, double tau, double gamma,
                         ShiftMode mode, bool* fallback = nullptr);

struct IterationRecord {
  SearchSpace space;
  std::map<std::string, FitResult> fits;  // "kind/stage"; empty at the final t
  EtReport report;
  std::vector<std::string> fallbacks;
};

struct SpaceHistory {
  std::vector<IterationRecord> iterations;  // t = 0..T
  bool collapsed = false;  // some subspace hit the fallback twice in a row

  const SearchSpace& final_space() const { return iterations.back().space; }
  std::string to_json() const;
};

// The full space-evolution loop: per iteration, prepare the oracle on the
// current space, measure N constrained samples, fit per-subspace tendencies
// and shift every choice set. Deterministic in (seed, oracle).
SpaceHistory evolve_space(const SearchSpace& space, PerformanceOracle& oracle,
                          const ModelShape& shape, const ResourceBudget& budget,
                          const EvolutionConfig& cfg, std::uint64_t seed);

struct SearchConfig {
  int population = 50;   // P
  int generations = 20;  // T_g
  int parents = 10;      // K
  double p_depth = 0.2;
  double p_embed = 0.2;
  double p_mut = 0.4;
  ResourceBudget budget;

  void validate() const;
};

struct SearchLogRow {
  int generation = 0;
  std::string encoding;
  double error = 0.0;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

struct SearchResult {
  Architecture best;
  double best_error = 1.0;
  std::vector<SearchLogRow> log;

  std::string log_csv() const;
};

// Constrained evolutionary search: elitist top-K selection with the total
// order (error asc, params asc, encoding asc), uniform crossover, per-field
// mutation, fresh-random top-up. Never returns a budget-violating arch.
SearchResult evolutionary_search(const SearchSpace& space, PerformanceOracle& oracle,
                                 const ModelShape& shape, const SearchConfig& cfg,
                                 std::uint64_t seed);

}  // namespace s3
