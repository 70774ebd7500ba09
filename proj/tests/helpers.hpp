#pragma once

#include <map>
#include <vector>

#include "core/cost.hpp"
#include "core/space.hpp"

namespace s3::test {

struct KindChoices {
  std::vector<std::vector<double>> per_stage;  // 4 entries
  double step = 1.0;
};

inline SearchSpace make_space(const std::map<DimensionKind, KindChoices>& dims) {
  SearchSpace space;
  for (int k = 0; k < kNumKinds; ++k) {
    auto kind = static_cast<DimensionKind>(k);
    const auto& kc = dims.at(kind);
    for (int s = 1; s <= kNumStages; ++s) {
      Subspace sub;
      sub.kind = kind;
      sub.stage = s;
      sub.choices = kc.per_stage[static_cast<std::size_t>(s - 1)];
      sub.step = kc.step;
      space.subspaces.push_back(std::move(sub));
    }
  }
  space.validate();
  return space;
}

inline KindChoices same(std::vector<double> choices, double step = 1.0) {
  return {{choices, choices, choices, choices}, step};
}

// Every dimension a single value: exactly one architecture.
inline SearchSpace singleton_space() {
  return make_space({
      {DimensionKind::Depth, same({2})},
      {DimensionKind::EmbedDim, same({8})},
      {DimensionKind::MlpRatio, same({2})},
      {DimensionKind::WindowSize, {{{2}, {2}, {2}, {1}}, 1.0}},
      {DimensionKind::NumHeads, same({2})},
      {DimensionKind::QkvDim, same({8})},
  });
}

// Small multi-choice space whose windows divide the toy_shape() stage sides
// (16/8/4/2) and whose every (heads, qkv) pair is divisible.
inline SearchSpace toy_space() {
  return make_space({
      {DimensionKind::Depth, same({1, 2})},
      {DimensionKind::EmbedDim, same({8, 16})},
      {DimensionKind::MlpRatio, same({1, 2}, 0.5)},
      {DimensionKind::WindowSize, {{{2, 4}, {2, 4}, {2, 4}, {1, 2}}, 1.0}},
      {DimensionKind::NumHeads, same({1, 2})},
      {DimensionKind::QkvDim, same({8, 16})},
  });
}

// Fully enumerable space (6^4 = 1296 architectures): depth and window free,
// everything else pinned. Windows divide the toy_shape() stage sides.
inline SearchSpace enum_space() {
  return make_space({
      {DimensionKind::Depth, same({1, 2})},
      {DimensionKind::EmbedDim, same({8})},
      {DimensionKind::MlpRatio, same({2})},
      {DimensionKind::WindowSize, {{{2, 4}, {2, 4}, {2, 4}, {1, 2}}, 1.0}},
      {DimensionKind::NumHeads, same({2})},
      {DimensionKind::QkvDim, same({8})},
  });
}

inline ModelShape toy_shape() {
  ModelShape shape;
  shape.side = 32;
  shape.channels = 1;
  shape.patch = 2;
  shape.classes = 4;
  return shape;
}

// The published initial space (window/heads/mlp assignment resolved as
// documented in the README).
inline SearchSpace initial_space() {
  return make_space({
      {DimensionKind::Depth, same({2, 3, 4}, 1.0)},
      {DimensionKind::EmbedDim, same({224, 256, 288}, 64.0)},
      {DimensionKind::MlpRatio, same({3, 3.5, 4}, 0.5)},
      {DimensionKind::WindowSize, same({7, 14}, 7.0)},
      {DimensionKind::NumHeads, same({7, 8, 9}, 1.0)},
      {DimensionKind::QkvDim, same({224, 256, 288}, 64.0)},
  });
}

}  // namespace s3::test
