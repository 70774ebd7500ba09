#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cost.hpp"
#include "data.hpp"
#include "tensor.hpp"

namespace s3 {

// Allocated (maximal) sizes of one block slot.
struct SlotBounds {
  int window = 1;
  int heads = 1;
  int qkv = 1;
};

struct StageBounds {
  int depth = 1;
  int embed = 1;
  int ffn = 1;  // inner FFN width allocation
  std::vector<SlotBounds> slots;  // size == depth
};

// Maximal tensor sizes the elastic network allocates. Derived either from a
// search space (supernet: every slot carries the stage maxima) or from one
// architecture (standalone: every slot is exact).
struct ElasticBounds {
  std::array<StageBounds, kNumStages> stages;

  static ElasticBounds for_space(const SearchSpace& space);
  static ElasticBounds for_arch(const Architecture& arch);

  // Throws OutOfBounds naming the violating dimension.
  void check(const Architecture& arch) const;
};

// All-maximal / all-minimal member of a space (the sandwich endpoints).
Architecture maximal_arch(const SearchSpace& space);
Architecture minimal_arch(const SearchSpace& space);

struct Param {
  std::string name;
  Tensor tensor;
  AdamState adam;
};

class ParamStore {
 public:
  Tensor& add(const std::string& name, std::vector<int> shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  std::int64_t total_scalars() const;

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
};

// Raw attention probabilities of one executed block, for analysis.
struct AttnCapture {
  int stage = 1;   // 1..4
  int block = 0;   // 0-based
  int window = 1;
  int heads = 1;
  Tensor attn;     // [batch*windows, heads, u, u], u = window^2
};

// Elastic windowed transformer. Subnets execute by taking leading slices of
// the maximal weights; the relative-bias table is sliced centrally so the
// zero-displacement entry is preserved. A standalone network for a single
// architecture is the same class with exact-size allocations, which makes
// the slicing-equivalence and weight-count oracles one code path.
class Supernet {
 public:
  Supernet(const SearchSpace& space, const ModelShape& shape, std::uint64_t seed);
  Supernet(const Architecture& arch, const ModelShape& shape, std::uint64_t seed);

  const ElasticBounds& bounds() const { return bounds_; }
  const ModelShape& shape() const { return shape_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::int64_t weight_count() const { return params_.total_scalars(); }

  // images: [B, C, S, S]. Returns logits [B, K].
  Tensor forward(Graph& g, const Architecture& arch, const Tensor& images,
                 std::vector<AttnCapture>* capture = nullptr);

  // One sandwich update on a single batch: largest, smallest, two uniform
  // random subnets; gradients fused into the shared accumulators, one
  // optimizer step. Returns the four losses in that order.
  std::array<float, 4> sandwich_step(const SearchSpace& space, const Tensor& images,
                                     const std::vector<int>& labels, const AdamConfig& opt,
                                     std::mt19937_64& rng);

  // One plain update of a single architecture (standalone training).
  float train_step(const Architecture& arch, const Tensor& images,
                   const std::vector<int>& labels, const AdamConfig& opt);

  // Top-1 error on the dataset; argmax ties break toward the lowest class.
  double evaluate(const Architecture& arch, const Dataset& val, int batch = 256);

  // Standalone network initialized from this supernet's weight slices.
  Supernet extract(const Architecture& arch) const;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  void allocate(std::uint64_t seed);

  ModelShape shape_;
  ElasticBounds bounds_;
  ParamStore params_;
};

// Copy the shared region of two elastic networks: leading slices for most
// tensors, centered sub-blocks for relative bias tables, per-group slices for
// the merge projections. Used both to extract standalone subnets and to carry
// weights across reallocation when the search space moves.
void transfer_weights(const Supernet& src, Supernet& dst);

// Batch assembly: images tensor [B, C, S, S] plus labels.
std::pair<Tensor, std::vector<int>> make_batch(const Dataset& ds, const std::vector<int>& idx);

struct TrainConfig {
  int steps = 400;
  int batch = 32;
  float lr = 1e-3f;
  float min_lr = 1e-5f;  // cosine floor
  float weight_decay = 0.05f;
};

// Cosine-decayed learning rate for step t of `steps`.
float cosine_lr(const TrainConfig& cfg, int t);

// Sandwich-train the supernet over the space. Deterministic in the seed.
void train_supernet(Supernet& net, const SearchSpace& space, const Dataset& train,
                    const TrainConfig& cfg, std::uint64_t seed);

// From-scratch training of one architecture; returns the trained network and
// its validation error.
std::pair<Supernet, double> retrain_standalone(const Architecture& arch, const ModelShape& shape,
                                               const Dataset& train, const Dataset& val,
                                               const TrainConfig& cfg, std::uint64_t seed);

struct LayerAttnStats {
  int stage = 1;
  int block = 0;
  double mean = 0.0;
  double median = 0.0;
};

// Attention-locality statistic: for every query and head, the Euclidean grid
// distances to its k most-attended keys (the query's own position excluded),
// aggregated per layer. Requires 1 <= k < window token count for every block.
std::vector<LayerAttnStats> attention_stats(Supernet& net, const Architecture& arch,
                                            const Tensor& images, int k);

}  // namespace s3
