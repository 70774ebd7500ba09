#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "common.hpp"

namespace s3 {

// Dense row-major f32 tensor. Data is shared; a tensor with a grad buffer
// participates in reverse-mode differentiation on whichever Graph its ops
// were recorded.
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<float>> data;
  std::shared_ptr<std::vector<float>> grad;  // null unless gradients required

  Tensor() = default;

  std::size_t numel() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  float* ptr() { return data->data(); }
  const float* ptr() const { return data->data(); }
  float* gptr() { return grad->data(); }

  void ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<float>>(numel(), 0.0f);
  }
  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0f);
  }

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from_data(std::vector<int> shape, std::vector<float> values);
};

// Records ops for one forward pass; backward replays them in reverse. A graph
// is single-threaded and single-use. With recording off the same op set runs
// in pure inference mode.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  // Multiply-accumulates performed by matrix products on this graph.
  std::int64_t macs() const { return macs_; }

  Tensor matmul(const Tensor& a, const Tensor& b);
  // x: [..., in], weight: [out, in], bias: [out] or empty tensor.
  Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
  // b.shape must equal a.shape or be a trailing suffix of it.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, float s);
  Tensor permute(const Tensor& a, const std::vector<int>& axes);
  Tensor transpose(const Tensor& a);  // swap last two axes
  Tensor reshape(const Tensor& a, std::vector<int> shape);
  Tensor slice(const Tensor& a, int axis, int start, int len);
  Tensor concat(const std::vector<Tensor>& parts, int axis);
  // rows of a 2-D table selected by index; backward scatter-adds.
  Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);
  Tensor softmax(const Tensor& a, int axis = -1);
  Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
  Tensor gelu(const Tensor& a);  // tanh approximation
  Tensor mean_all(const Tensor& a);
  Tensor mean_axis(const Tensor& a, int axis);
  // logits: [N, K]; loss averaged over rows, accumulated in f64.
  Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

  void backward(const Tensor& loss);

 private:
  Tensor make_output(std::vector<int> shape, bool needs_grad);
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }
  bool wants_grad(const Tensor& t) const { return recording_ && t.grad != nullptr; }

  bool recording_;
  bool consumed_ = false;
  std::int64_t macs_ = 0;
  std::vector<std::function<void()>> tape_;
};

// AdamW with decoupled weight decay; moments live beside each parameter.
struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.05f;
};

void adamw_step(Tensor& param, AdamState& state, const AdamConfig& cfg);

}  // namespace s3
