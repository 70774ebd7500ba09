#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace s3 {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
  out << ']';
  return out.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw ShapeMismatch(std::string(op) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

// C[m,n] += A[m,k] * B[k,n]
void mm_nn(const float* __restrict a, const float* __restrict b, float* __restrict c, int m, int k,
           int n) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<std::size_t>(i) * k;
    float* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      float av = ai[p];
      if (av == 0.0f) continue;
      const float* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m,k] += A[m,n] * B[k,n]^T
void mm_nt(const float* __restrict a, const float* __restrict b, float* __restrict c, int m, int n,
           int k) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<std::size_t>(i) * n;
    float* ci = c + static_cast<std::size_t>(i) * k;
    for (int q = 0; q < k; ++q) {
      const float* bq = b + static_cast<std::size_t>(q) * n;
      float acc = 0.0f;
      for (int j = 0; j < n; ++j) acc += ai[j] * bq[j];
      ci[q] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
void mm_tn(const float* __restrict a, const float* __restrict b, float* __restrict c, int m, int k,
           int n) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<std::size_t>(i) * k;
    const float* bi = b + static_cast<std::size_t>(i) * n;
    for (int q = 0; q < k; ++q) {
      float av = ai[q];
      if (av == 0.0f) continue;
      float* cq = c + static_cast<std::size_t>(q) * n;
      for (int j = 0; j < n; ++j) cq[j] += av * bi[j];
    }
  }
}

std::vector<std::size_t> strides_of(const std::vector<int>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    s[i] = s[i + 1] * static_cast<std::size_t>(shape[i + 1]);
  return s;
}

// Applies f(out_linear, in_linear) for every element of the permuted view.
template <typename F>
void for_each_permuted(const std::vector<int>& in_shape, const std::vector<int>& axes, F&& f) {
  const int nd = static_cast<int>(in_shape.size());
  std::vector<int> out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = in_shape[axes[i]];
  auto in_strides = strides_of(in_shape);
  std::vector<std::size_t> mapped(nd);
  for (int i = 0; i < nd; ++i) mapped[i] = in_strides[axes[i]];

  std::size_t total = 1;
  for (int d : out_shape) total *= static_cast<std::size_t>(d);
  std::vector<int> idx(nd, 0);
  std::size_t in_lin = 0;
  for (std::size_t out_lin = 0; out_lin < total; ++out_lin) {
    f(out_lin, in_lin);
    for (int ax = nd - 1; ax >= 0; --ax) {
      in_lin += mapped[ax];
      if (++idx[ax] < out_shape[ax]) break;
      in_lin -= mapped[ax] * static_cast<std::size_t>(out_shape[ax]);
      idx[ax] = 0;
    }
  }
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<float>>(t.numel(), 0.0f);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data->begin(), t.data->end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> values) {
  Tensor t;
  t.shape = std::move(shape);
  if (t.numel() != values.size())
    throw ShapeMismatch("from_data: " + shape_str(t.shape) + " vs " +
                        std::to_string(values.size()) + " values");
  t.data = std::make_shared<std::vector<float>>(std::move(values));
  return t;
}

Tensor Graph::make_output(std::vector<int> shape, bool needs_grad) {
  Tensor t = Tensor::zeros(std::move(shape));
  if (recording_ && needs_grad) t.ensure_grad();
  return t;
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeMismatch("matmul: operands must have >= 2 dims, got " + shape_str(a.shape) +
                        " and " + shape_str(b.shape));
  const int m = a.dim(a.ndim() - 2);
  const int k = a.dim(a.ndim() - 1);
  const bool batched_b = b.ndim() > 2;
  if (b.dim(b.ndim() - 2) != k)
    throw ShapeMismatch("matmul: inner dims " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  const int n = b.dim(b.ndim() - 1);
  std::vector<int> lead(a.shape.begin(), a.shape.end() - 2);
  if (batched_b) {
    std::vector<int> lead_b(b.shape.begin(), b.shape.end() - 2);
    if (lead != lead_b)
      throw ShapeMismatch("matmul: batch dims " + shape_str(a.shape) + " vs " +
                          shape_str(b.shape));
  }
  std::size_t batch = 1;
  for (int d : lead) batch *= static_cast<std::size_t>(d);

  std::vector<int> out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = make_output(out_shape, a.grad || b.grad);

  const std::size_t a_sz = static_cast<std::size_t>(m) * k;
  const std::size_t b_sz = static_cast<std::size_t>(k) * n;
  const std::size_t o_sz = static_cast<std::size_t>(m) * n;
  for (std::size_t i = 0; i < batch; ++i)
    mm_nn(a.ptr() + i * a_sz, b.ptr() + (batched_b ? i * b_sz : 0), out.ptr() + i * o_sz, m, k, n);
  macs_ += static_cast<std::int64_t>(batch) * m * k * n;

  if (wants_grad(a) || wants_grad(b)) {
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, batch, batched_b, m, k, n, a_sz, b_sz, o_sz]() mutable {
      for (std::size_t i = 0; i < batch; ++i) {
        const float* dy = oc.gptr() + i * o_sz;
        if (ac.grad) mm_nt(dy, bc.ptr() + (batched_b ? i * b_sz : 0), ac.gptr() + i * a_sz, m, n, k);
        if (bc.grad) mm_tn(ac.ptr() + i * a_sz, dy, bc.gptr() + (batched_b ? i * b_sz : 0), m, k, n);
      }
    });
  }
  return out;
}

Tensor Graph::linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.ndim() != 2) throw ShapeMismatch("linear: weight must be 2-D");
  const int in = weight.dim(1);
  const int out_dim = weight.dim(0);
  if (x.ndim() < 1 || x.dim(x.ndim() - 1) != in)
    throw ShapeMismatch("linear: input " + shape_str(x.shape) + " vs weight " +
                        shape_str(weight.shape));
  const bool has_bias = bias.data && bias.numel() > 0;
  if (has_bias && bias.numel() != static_cast<std::size_t>(out_dim))
    throw ShapeMismatch("linear: bias " + shape_str(bias.shape) + " vs out dim " +
                        std::to_string(out_dim));
  const int rows = static_cast<int>(x.numel() / static_cast<std::size_t>(in));

  std::vector<int> out_shape(x.shape.begin(), x.shape.end() - 1);
  out_shape.push_back(out_dim);
  Tensor out = make_output(out_shape, x.grad || weight.grad || (has_bias && bias.grad));

  mm_nt(x.ptr(), weight.ptr(), out.ptr(), rows, in, out_dim);
  macs_ += static_cast<std::int64_t>(rows) * in * out_dim;
  if (has_bias) {
    float* o = out.ptr();
    const float* bptr = bias.ptr();
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < out_dim; ++j) o[static_cast<std::size_t>(r) * out_dim + j] += bptr[j];
  }

  if (wants_grad(x) || wants_grad(weight) || (has_bias && wants_grad(bias))) {
    Tensor xc = x, wc = weight, bc = bias, oc = out;
    record([xc, wc, bc, oc, rows, in, out_dim, has_bias]() mutable {
      const float* dy = oc.gptr();
      if (xc.grad) mm_nn(dy, wc.ptr(), xc.gptr(), rows, out_dim, in);
      if (wc.grad) mm_tn(dy, xc.ptr(), wc.gptr(), rows, out_dim, in);
      if (has_bias && bc.grad) {
        float* db = bc.gptr();
        for (int r = 0; r < rows; ++r)
          for (int j = 0; j < out_dim; ++j) db[j] += dy[static_cast<std::size_t>(r) * out_dim + j];
      }
    });
  }
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  const bool suffix = b.ndim() < a.ndim() ||
                      (b.ndim() == a.ndim() && b.shape != a.shape);
  if (suffix) {
    if (b.ndim() >= a.ndim() ||
        !std::equal(b.shape.begin(), b.shape.end(), a.shape.end() - b.ndim()))
      throw ShapeMismatch("add: " + shape_str(b.shape) + " is not a trailing suffix of " +
                          shape_str(a.shape));
  }
  Tensor out = make_output(a.shape, a.grad || b.grad);
  const std::size_t n = a.numel();
  const std::size_t bn = b.numel();
  const float* ap = a.ptr();
  const float* bp = b.ptr();
  float* op = out.ptr();
  for (std::size_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i % bn];

  if (wants_grad(a) || wants_grad(b)) {
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, n, bn]() mutable {
      const float* dy = oc.gptr();
      if (ac.grad) {
        float* da = ac.gptr();
        for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
      }
      if (bc.grad) {
        float* db = bc.gptr();
        for (std::size_t i = 0; i < n; ++i) db[i % bn] += dy[i];
      }
    });
  }
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_output(a.shape, a.grad || b.grad);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
  if (wants_grad(a) || wants_grad(b)) {
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, n]() mutable {
      const float* dy = oc.gptr();
      if (ac.grad)
        for (std::size_t i = 0; i < n; ++i) ac.gptr()[i] += dy[i] * bc.ptr()[i];
      if (bc.grad)
        for (std::size_t i = 0; i < n; ++i) bc.gptr()[i] += dy[i] * ac.ptr()[i];
    });
  }
  return out;
}

Tensor Graph::scale(const Tensor& a, float s) {
  Tensor out = make_output(a.shape, a.grad != nullptr);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * s;
  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, s, n]() mutable {
      for (std::size_t i = 0; i < n; ++i) ac.gptr()[i] += oc.gptr()[i] * s;
    });
  }
  return out;
}

Tensor Graph::permute(const Tensor& a, const std::vector<int>& axes) {
  if (static_cast<int>(axes.size()) != a.ndim())
    throw ShapeMismatch("permute: axes size " + std::to_string(axes.size()) + " vs ndim " +
                        std::to_string(a.ndim()));
  std::vector<int> out_shape(a.ndim());
  std::vector<bool> seen(a.ndim(), false);
  for (int i = 0; i < a.ndim(); ++i) {
    if (axes[i] < 0 || axes[i] >= a.ndim() || seen[axes[i]])
      throw ShapeMismatch("permute: invalid axes for " + shape_str(a.shape));
    seen[axes[i]] = true;
    out_shape[i] = a.dim(axes[i]);
  }
  Tensor out = make_output(out_shape, a.grad != nullptr);
  const float* in = a.ptr();
  float* o = out.ptr();
  for_each_permuted(a.shape, axes, [&](std::size_t ol, std::size_t il) { o[ol] = in[il]; });
  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    std::vector<int> ax = axes;
    record([ac, oc, ax]() mutable {
      const float* dy = oc.gptr();
      float* da = ac.gptr();
      for_each_permuted(ac.shape, ax, [&](std::size_t ol, std::size_t il) { da[il] += dy[ol]; });
    });
  }
  return out;
}

Tensor Graph::transpose(const Tensor& a) {
  std::vector<int> axes(a.ndim());
  std::iota(axes.begin(), axes.end(), 0);
  if (a.ndim() < 2) throw ShapeMismatch("transpose: needs >= 2 dims");
  std::swap(axes[a.ndim() - 1], axes[a.ndim() - 2]);
  return permute(a, axes);
}

Tensor Graph::reshape(const Tensor& a, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (n != a.numel())
    throw ShapeMismatch("reshape: " + shape_str(a.shape) + " to " + shape_str(shape));
  // Shares storage (and the grad buffer), so no tape entry is needed.
  Tensor out;
  out.shape = std::move(shape);
  out.data = a.data;
  out.grad = recording_ ? a.grad : nullptr;
  return out;
}

Tensor Graph::slice(const Tensor& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.ndim()) throw ShapeMismatch("slice: bad axis");
  if (start < 0 || len < 1 || start + len > a.dim(axis))
    throw ShapeMismatch("slice: range [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") out of dim " +
                        std::to_string(a.dim(axis)));
  std::vector<int> out_shape = a.shape;
  out_shape[axis] = len;
  Tensor out = make_output(out_shape, a.grad != nullptr);

  std::size_t inner = 1;
  for (int i = axis + 1; i < a.ndim(); ++i) inner *= static_cast<std::size_t>(a.dim(i));
  std::size_t outer = a.numel() / (inner * static_cast<std::size_t>(a.dim(axis)));
  const std::size_t dim = static_cast<std::size_t>(a.dim(axis));
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(out.ptr() + o * len * inner, a.ptr() + (o * dim + start) * inner,
                len * inner * sizeof(float));

  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, outer, inner, dim, start, len]() mutable {
      const float* dy = oc.gptr();
      float* da = ac.gptr();
      for (std::size_t o = 0; o < outer; ++o) {
        float* dst = da + (o * dim + start) * inner;
        const float* src = dy + o * len * inner;
        for (std::size_t i = 0; i < static_cast<std::size_t>(len) * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor Graph::concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  const Tensor& first = parts[0];
  if (axis < 0 || axis >= first.ndim()) throw ShapeMismatch("concat: bad axis");
  int total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    if (p.ndim() != first.ndim())
      throw ShapeMismatch("concat: rank mismatch " + shape_str(p.shape));
    for (int i = 0; i < first.ndim(); ++i)
      if (i != axis && p.dim(i) != first.dim(i))
        throw ShapeMismatch("concat: " + shape_str(p.shape) + " vs " + shape_str(first.shape));
    total += p.dim(axis);
    needs_grad = needs_grad || p.grad;
  }
  std::vector<int> out_shape = first.shape;
  out_shape[axis] = total;
  Tensor out = make_output(out_shape, needs_grad);

  std::size_t inner = 1;
  for (int i = axis + 1; i < first.ndim(); ++i) inner *= static_cast<std::size_t>(first.dim(i));
  std::size_t outer = out.numel() / (inner * static_cast<std::size_t>(total));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pd = static_cast<std::size_t>(p.dim(axis));
    for (std::size_t o = 0; o < outer; ++o)
      std::memcpy(out.ptr() + (o * total + offset) * inner, p.ptr() + o * pd * inner,
                  pd * inner * sizeof(float));
    offset += pd;
  }

  if (recording_ && needs_grad) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    record([pc, oc, outer, inner, total]() mutable {
      const float* dy = oc.gptr();
      std::size_t offset = 0;
      for (auto& p : pc) {
        const std::size_t d = p.numel() / (outer * inner);
        if (p.grad) {
          float* dp = p.gptr();
          for (std::size_t o = 0; o < outer; ++o) {
            const float* src = dy + (o * total + offset) * inner;
            float* dst = dp + o * d * inner;
            for (std::size_t i = 0; i < d * inner; ++i) dst[i] += src[i];
          }
        }
        offset += d;
      }
    });
  }
  return out;
}

Tensor Graph::gather_rows(const Tensor& table, const std::vector<int>& indices) {
  if (table.ndim() != 2) throw ShapeMismatch("gather_rows: table must be 2-D");
  const int rows = table.dim(0);
  const int cols = table.dim(1);
  for (int idx : indices)
    if (idx < 0 || idx >= rows)
      throw ShapeMismatch("gather_rows: index " + std::to_string(idx) + " out of " +
                          std::to_string(rows));
  Tensor out = make_output({static_cast<int>(indices.size()), cols}, table.grad != nullptr);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::memcpy(out.ptr() + i * cols, table.ptr() + static_cast<std::size_t>(indices[i]) * cols,
                static_cast<std::size_t>(cols) * sizeof(float));
  if (wants_grad(table)) {
    Tensor tc = table, oc = out;
    std::vector<int> idx = indices;
    record([tc, oc, idx, cols]() mutable {
      const float* dy = oc.gptr();
      float* dt = tc.gptr();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        float* dst = dt + static_cast<std::size_t>(idx[i]) * cols;
        const float* src = dy + i * cols;
        for (int j = 0; j < cols; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

Tensor Graph::softmax(const Tensor& a, int axis) {
  if (axis < 0) axis += a.ndim();
  if (axis != a.ndim() - 1) {
    std::vector<int> axes(a.ndim());
    std::iota(axes.begin(), axes.end(), 0);
    std::swap(axes[axis], axes[a.ndim() - 1]);
    return permute(softmax(permute(a, axes), -1), axes);
  }
  const int cols = a.dim(a.ndim() - 1);
  const std::size_t rows = a.numel() / static_cast<std::size_t>(cols);
  Tensor out = make_output(a.shape, a.grad != nullptr);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* x = a.ptr() + r * cols;
    float* y = out.ptr() + r * cols;
    float mx = x[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < cols; ++j) y[j] *= inv;
  }
  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, rows, cols]() mutable {
      for (std::size_t r = 0; r < rows; ++r) {
        const float* y = oc.ptr() + r * cols;
        const float* dy = oc.gptr() + r * cols;
        float* dx = ac.gptr() + r * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += static_cast<double>(dy[j]) * y[j];
        for (int j = 0; j < cols; ++j) dx[j] += (dy[j] - static_cast<float>(dot)) * y[j];
      }
    });
  }
  return out;
}

Tensor Graph::layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int cols = x.dim(x.ndim() - 1);
  if (gamma.numel() != static_cast<std::size_t>(cols) ||
      beta.numel() != static_cast<std::size_t>(cols))
    throw ShapeMismatch("layernorm: scale/bias " + shape_str(gamma.shape) + " vs channels " +
                        std::to_string(cols));
  const std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
  Tensor out = make_output(x.shape, x.grad || gamma.grad || beta.grad);

  auto xhat = std::make_shared<std::vector<float>>(x.numel());
  auto inv_std = std::make_shared<std::vector<float>>(rows);
  const float* g = gamma.ptr();
  const float* b = beta.ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xi = x.ptr() + r * cols;
    float* yi = out.ptr() + r * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += xi[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      double d = xi[j] - mean;
      var += d * d;
    }
    var /= cols;
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*inv_std)[r] = is;
    for (int j = 0; j < cols; ++j) {
      float xh = (xi[j] - static_cast<float>(mean)) * is;
      (*xhat)[r * cols + j] = xh;
      yi[j] = xh * g[j] + b[j];
    }
  }

  if (wants_grad(x) || wants_grad(gamma) || wants_grad(beta)) {
    Tensor xc = x, gc = gamma, bc = beta, oc = out;
    record([xc, gc, bc, oc, xhat, inv_std, rows, cols]() mutable {
      const float* dy = oc.gptr();
      for (std::size_t r = 0; r < rows; ++r) {
        const float* dyr = dy + r * cols;
        const float* xh = xhat->data() + r * cols;
        if (gc.grad || bc.grad) {
          for (int j = 0; j < cols; ++j) {
            if (gc.grad) gc.gptr()[j] += dyr[j] * xh[j];
            if (bc.grad) bc.gptr()[j] += dyr[j];
          }
        }
        if (xc.grad) {
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < cols; ++j) {
            double dyh = static_cast<double>(dyr[j]) * gc.ptr()[j];
            m1 += dyh;
            m2 += dyh * xh[j];
          }
          m1 /= cols;
          m2 /= cols;
          float* dx = xc.gptr() + r * cols;
          const float is = (*inv_std)[r];
          for (int j = 0; j < cols; ++j) {
            double dyh = static_cast<double>(dyr[j]) * gc.ptr()[j];
            dx[j] += static_cast<float>((dyh - m1 - xh[j] * m2) * is);
          }
        }
      }
    });
  }
  return out;
}

Tensor Graph::gelu(const Tensor& a) {
  constexpr float c0 = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float c1 = 0.044715f;
  Tensor out = make_output(a.shape, a.grad != nullptr);
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) {
    float x = a.ptr()[i];
    float t = std::tanh(c0 * (x + c1 * x * x * x));
    out.ptr()[i] = 0.5f * x * (1.0f + t);
  }
  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (std::size_t i = 0; i < n; ++i) {
        float x = ac.ptr()[i];
        float u = c0 * (x + c1 * x * x * x);
        float t = std::tanh(u);
        float du = c0 * (1.0f + 3.0f * c1 * x * x);
        float d = 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
        ac.gptr()[i] += oc.gptr()[i] * d;
      }
    });
  }
  return out;
}

Tensor Graph::mean_all(const Tensor& a) {
  const std::size_t n = a.numel();
  Tensor out = make_output({1}, a.grad != nullptr);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a.ptr()[i];
  out.ptr()[0] = static_cast<float>(sum / static_cast<double>(n));
  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      const float d = oc.gptr()[0] / static_cast<float>(n);
      for (std::size_t i = 0; i < n; ++i) ac.gptr()[i] += d;
    });
  }
  return out;
}

Tensor Graph::mean_axis(const Tensor& a, int axis) {
  if (axis < 0) axis += a.ndim();
  if (axis < 0 || axis >= a.ndim()) throw ShapeMismatch("mean_axis: bad axis");
  std::vector<int> out_shape;
  for (int i = 0; i < a.ndim(); ++i)
    if (i != axis) out_shape.push_back(a.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = make_output(out_shape, a.grad != nullptr);

  std::size_t inner = 1;
  for (int i = axis + 1; i < a.ndim(); ++i) inner *= static_cast<std::size_t>(a.dim(i));
  const std::size_t dim = static_cast<std::size_t>(a.dim(axis));
  const std::size_t outer = a.numel() / (inner * dim);
  const float inv = 1.0f / static_cast<float>(dim);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t d = 0; d < dim; ++d) {
      const float* src = a.ptr() + (o * dim + d) * inner;
      float* dst = out.ptr() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
    }

  if (wants_grad(a)) {
    Tensor ac = a, oc = out;
    record([ac, oc, outer, inner, dim, inv]() mutable {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t d = 0; d < dim; ++d) {
          float* dst = ac.gptr() + (o * dim + d) * inner;
          const float* src = oc.gptr() + o * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
        }
    });
  }
  return out;
}

Tensor Graph::cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ShapeMismatch("cross_entropy: logits must be [N, K]");
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeMismatch("cross_entropy: " + std::to_string(labels.size()) + " labels vs " +
                        std::to_string(n) + " rows");
  for (int lab : labels)
    if (lab < 0 || lab >= k) throw ShapeMismatch("cross_entropy: label out of range");

  Tensor out = make_output({1}, logits.grad != nullptr);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.ptr() + static_cast<std::size_t>(i) * k;
    float mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    total += std::log(sum) + mx - row[labels[i]];
  }
  out.ptr()[0] = static_cast<float>(total / n);

  if (wants_grad(logits)) {
    Tensor lc = logits, oc = out;
    std::vector<int> lab = labels;
    record([lc, oc, lab, n, k]() mutable {
      const float d = oc.gptr()[0] / static_cast<float>(n);
      for (int i = 0; i < n; ++i) {
        const float* row = lc.ptr() + static_cast<std::size_t>(i) * k;
        float* dst = lc.gptr() + static_cast<std::size_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        for (int j = 0; j < k; ++j) {
          float p = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / sum);
          dst[j] += d * (p - (j == lab[i] ? 1.0f : 0.0f));
        }
      }
    });
  }
  return out;
}

void Graph::backward(const Tensor& loss) {
  if (!recording_) throw GraphConsumed("backward on a non-recording graph");
  if (consumed_) throw GraphConsumed("backward invoked twice without rebuilding the graph");
  if (loss.numel() != 1) throw ShapeMismatch("backward: loss must be scalar");
  if (!loss.grad) throw ShapeMismatch("backward: loss does not require gradients");
  consumed_ = true;
  (*loss.grad)[0] = 1.0f;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

void adamw_step(Tensor& param, AdamState& state, const AdamConfig& cfg) {
  const std::size_t n = param.numel();
  if (!param.grad) throw ShapeMismatch("adamw: parameter has no gradient");
  if (state.m.empty()) {
    state.m.assign(n, 0.0f);
    state.v.assign(n, 0.0f);
  }
  if (state.m.size() != n) throw ShapeMismatch("adamw: state size mismatch");
  state.step += 1;
  const float bc1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(state.step));
  const float bc2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(state.step));
  float* p = param.ptr();
  const float* g = param.grad->data();
  for (std::size_t i = 0; i < n; ++i) {
    p[i] -= cfg.lr * cfg.weight_decay * p[i];  // decoupled decay
    state.m[i] = cfg.beta1 * state.m[i] + (1.0f - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
    const float mhat = state.m[i] / bc1;
    const float vhat = state.v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace s3
