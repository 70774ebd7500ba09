#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evolution.hpp"

namespace s3 {

// Which error oracle backs evolve-space and search.
enum class OracleKind { Supernet, Tabular };

struct OracleConfig {
  OracleKind kind = OracleKind::Supernet;
  bool finetune = false;  // carry supernet weights across space iterations
  TabularConfig tabular;
};

struct EvalConfig {
  int samples = 8;                 // constrained random archs to score
  std::vector<std::string> archs;  // extra encodings to score
};

struct AttentionConfig {
  int top_k = 2;
  int batch = 8;
  std::string arch = "max";  // "max", "min" or an encoding
};

struct AblationConfig {
  int archs = 10;
};

// One experiment: a single JSON document holds every knob, and the master
// seed derives all substreams through labeled hashing, so a committed config
// file reproduces a run exactly.
struct RunConfig {
  std::string out_dir = "runs/out";
  std::uint64_t seed = 1;
  int workers = 1;
  SyntheticConfig dataset;
  ModelShape shape;
  SearchSpace space;
  ResourceBudget budget;
  TrainConfig train;
  EvolutionConfig evolution;
  SearchConfig search;  // search.budget mirrors the top-level budget
  OracleConfig oracle;
  EvalConfig eval;
  AttentionConfig attention;
  AblationConfig ablation;

  void validate() const;

  // Canonical serialization (sorted keys, fixed layout); hash and byte
  // comparisons of configs go through this form.
  std::string to_json() const;
  std::uint64_t config_hash() const;

  static RunConfig from_json(const std::string& text);
  // Parse a file, then apply "dotted.path=value" overrides in order. Values
  // are parsed as JSON when possible, otherwise taken as strings.
  static RunConfig load_file(const std::string& path,
                             const std::vector<std::string>& overrides = {});
};

// The out-of-the-box experiment: a small windowed-transformer space over the
// 32x32 synthetic task, hardened (16 classes, sigma 1.0) so that architecture
// quality differences are measurable.
RunConfig default_config();

}  // namespace s3
