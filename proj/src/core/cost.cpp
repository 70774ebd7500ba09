#include "cost.hpp"

#include <cmath>

namespace s3 {

void ModelShape::validate() const {
  if (side <= 0 || channels <= 0 || patch <= 0 || classes <= 0)
    throw ConfigError("model shape fields must be positive");
  if (side % patch != 0) throw ConfigError("resolution not divisible by patch size");
  for (int i = 1; i <= kNumStages; ++i)
    if (stage_side(i) < 1)
      throw ConfigError("stage " + std::to_string(i) + " feature side collapses to zero");
}

int ModelShape::stage_side(int stage) const {
  int s = side / patch;
  for (int i = 1; i < stage; ++i) {
    if (s % 2 != 0) return 0;
    s /= 2;
  }
  return s;
}

void validate_for_shape(const Architecture& arch, const ModelShape& shape) {
  arch.validate();
  shape.validate();
  for (int i = 1; i <= kNumStages; ++i) {
    int s = shape.stage_side(i);
    for (const auto& b : arch.stages[i - 1].blocks) {
      if (s % b.window != 0)
        throw InvalidArchitecture("stage " + std::to_string(i) + ": window " +
                                  std::to_string(b.window) + " does not divide feature side " +
                                  std::to_string(s));
    }
  }
}

std::int64_t param_count(const Architecture& arch, const ModelShape& shape) {
  validate_for_shape(arch, shape);
  std::int64_t total = 0;
  std::int64_t h1 = arch.stages[0].embed;
  total += static_cast<std::int64_t>(shape.patch) * shape.patch * shape.channels * h1 + h1;

  for (int i = 0; i < kNumStages; ++i) {
    const auto& st = arch.stages[i];
    std::int64_t h = st.embed;
    std::int64_t f = ffn_width(st.mlp, st.embed);
    for (const auto& b : st.blocks) {
      std::int64_t q = b.qkv;
      std::int64_t w = b.window;
      total += 4 * h;                    // two layernorms, scale + bias
      total += h * 3 * q + 3 * q;        // qkv projection
      total += q * h + h;                // output projection
      total += (2 * w - 1) * (2 * w - 1) * b.heads;  // relative position bias
      total += h * f + f + f * h + h;    // ffn
    }
    if (i < kNumStages - 1) {
      std::int64_t hn = arch.stages[i + 1].embed;
      total += 2 * (4 * h) + (4 * h) * hn + hn;  // merge layernorm + reduction
    }
  }
  std::int64_t h4 = arch.stages[kNumStages - 1].embed;
  total += 2 * h4 + h4 * shape.classes + shape.classes;
  return total;
}

std::int64_t flop_count(const Architecture& arch, const ModelShape& shape) {
  validate_for_shape(arch, shape);
  std::int64_t total = 0;
  std::int64_t t0 = static_cast<std::int64_t>(shape.stage_side(1)) * shape.stage_side(1);
  total += t0 * (static_cast<std::int64_t>(shape.patch) * shape.patch * shape.channels) *
           arch.stages[0].embed;

  for (int i = 0; i < kNumStages; ++i) {
    const auto& st = arch.stages[i];
    std::int64_t s = shape.stage_side(i + 1);
    std::int64_t t = s * s;
    std::int64_t h = st.embed;
    std::int64_t f = ffn_width(st.mlp, st.embed);
    for (const auto& b : st.blocks) {
      std::int64_t q = b.qkv;
      std::int64_t u = static_cast<std::int64_t>(b.window) * b.window;
      total += t * h * 3 * q;            // qkv projection
      total += (t / u) * u * u * q;      // attention scores
      total += (t / u) * u * u * q;      // attention x values
      total += t * q * h;                // output projection
      total += 2 * t * h * f;            // ffn
    }
    if (i < kNumStages - 1) {
      std::int64_t hn = arch.stages[i + 1].embed;
      total += (t / 4) * (4 * h) * hn;   // patch merge reduction
    }
  }
  total += static_cast<std::int64_t>(arch.stages[kNumStages - 1].embed) * shape.classes;
  return total;
}

bool within_budget(const Architecture& arch, const ModelShape& shape,
                   const ResourceBudget& budget) {
  if (budget.max_params && param_count(arch, shape) >= *budget.max_params) return false;
  if (budget.max_flops && flop_count(arch, shape) >= *budget.max_flops) return false;
  return true;
}

}  // namespace s3
