#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "common.hpp"

namespace s3 {

using BigInt = boost::multiprecision::cpp_int;

// The six searchable dimensions. Depth, EmbedDim and MlpRatio are chosen once
// per stage; WindowSize, NumHeads and QkvDim are chosen per block.
enum class DimensionKind { Depth, EmbedDim, MlpRatio, WindowSize, NumHeads, QkvDim };

constexpr int kNumKinds = 6;
constexpr int kNumStages = 4;

bool stage_level(DimensionKind k);
const char* kind_name(DimensionKind k);
std::optional<DimensionKind> kind_from_name(std::string_view name);

// Choice values are integers for every kind except MlpRatio, which also
// allows halves. Both are exact in double.
std::string choice_to_string(double v);

// One (kind, stage) choice set together with its evolution step.
struct Subspace {
  DimensionKind kind;
  int stage = 1;  // 1..4
  std::vector<double> choices;
  double step = 1.0;

  void validate() const;
  double lower_bound() const;  // Depth >= 1, everything else > 0
  double min_choice() const { return choices.front(); }
  double max_choice() const { return choices.back(); }
  bool contains(double v) const;
};

// Cartesian product of 24 subspaces (6 kinds x 4 stages).
struct SearchSpace {
  std::vector<Subspace> subspaces;  // exactly 24, one per (kind, stage)

  const Subspace& sub(DimensionKind k, int stage) const;
  Subspace& sub(DimensionKind k, int stage);
  void validate() const;

  std::string to_json() const;
  static SearchSpace from_json(const std::string& text);
};

struct BlockChoice {
  int window = 1;
  int heads = 1;
  int qkv = 1;
  bool operator==(const BlockChoice&) const = default;
};

struct StageChoice {
  int depth = 1;
  int embed = 1;
  double mlp = 1.0;
  std::vector<BlockChoice> blocks;  // size == depth
  bool operator==(const StageChoice&) const = default;
};

// One concrete assignment of every searchable dimension.
struct Architecture {
  std::vector<StageChoice> stages;  // exactly 4

  // Structural invariants only (depth matches block count, q divisible by n).
  void validate() const;
  // Structural plus membership in the given space.
  void validate_in(const SearchSpace& space) const;

  bool operator==(const Architecture&) const = default;
};

struct SpaceLimit {
  BigInt max_size = 1;
};

// Exact |A| = prod_i |E_i|*|M_i| * sum_{d in D_i} (|W_i|*|N_i|*|Q_i|)^d.
BigInt cardinality(const SearchSpace& space);

// Uniform sampling; block-level picks violating q % n == 0 are rejected and
// redrawn, at most `max_attempts` times per block.
Architecture sample_uniform(const SearchSpace& space, std::mt19937_64& rng,
                            int max_attempts = 1000);

// Canonical single-line encoding: stages joined by '/', each stage
// "d<depth>:e<embed>:m<mlp>:" then blocks "w<w>n<n>q<q>" joined by ','.
std::string encode(const Architecture& arch);
Architecture decode(const std::string& text);

// All raw assignments of the space in deterministic order (no divisibility
// filtering). Throws ConfigError if the cardinality exceeds `limit`.
std::vector<Architecture> enumerate_all(const SearchSpace& space, std::uint64_t limit = 200000);

// Group sampled errors by the choice taken for (kind, stage). Stage-level
// kinds partition the samples; block-level kinds put a sample in every group
// whose value appears in some block of that stage.
std::map<double, std::vector<double>> partition_by_choice(
    const std::vector<std::pair<Architecture, double>>& samples, DimensionKind kind, int stage);

}  // namespace s3
