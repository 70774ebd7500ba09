#pragma once

#include <cstdint>
#include <optional>

#include "space.hpp"

namespace s3 {

// Geometry of the toy classifier: square input, patch embedding, then four
// stages whose feature side halves at each transition.
struct ModelShape {
  int side = 32;
  int channels = 1;
  int patch = 2;
  int classes = 4;

  void validate() const;
  // Feature side of stage i (1-based): side / patch / 2^(i-1).
  int stage_side(int stage) const;
};

struct ResourceBudget {
  std::optional<std::int64_t> max_params;
  std::optional<std::int64_t> max_flops;  // multiply-accumulates

  bool unbounded() const { return !max_params && !max_flops; }
};

// Inner FFN width; rounding up for fractional ratios. The supernet uses the
// identical rule so the analytical counts stay exact.
inline int ffn_width(double mlp_ratio, int embed) {
  return static_cast<int>(std::ceil(mlp_ratio * embed));
}

// Throws InvalidArchitecture if a window does not divide its stage side.
void validate_for_shape(const Architecture& arch, const ModelShape& shape);

// Exact scalar-weight count of the standalone network for `arch`.
std::int64_t param_count(const Architecture& arch, const ModelShape& shape);

// Exact multiply-accumulate count of one forward pass on a single image.
// Only matrix products are counted; softmax, layernorm, gelu and bias adds
// are excluded.
std::int64_t flop_count(const Architecture& arch, const ModelShape& shape);

// Strict inequality on both bounds; an unbounded side always passes.
bool within_budget(const Architecture& arch, const ModelShape& shape, const ResourceBudget& budget);

}  // namespace s3
