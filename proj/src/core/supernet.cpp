#include "supernet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace s3 {

namespace {

int imax(const std::vector<double>& v) { return static_cast<int>(v.back()); }

// Flattened (dy, dx) displacement index into a (2w-1)^2 bias table for every
// (query, key) pair of a w x w window.
std::vector<int> rel_index(int w) {
  const int u = w * w;
  std::vector<int> idx(static_cast<std::size_t>(u) * u);
  for (int qy = 0; qy < w; ++qy)
    for (int qx = 0; qx < w; ++qx)
      for (int ky = 0; ky < w; ++ky)
        for (int kx = 0; kx < w; ++kx) {
          int qi = qy * w + qx, ki = ky * w + kx;
          idx[static_cast<std::size_t>(qi) * u + ki] =
              (ky - qy + w - 1) * (2 * w - 1) + (kx - qx + w - 1);
        }
  return idx;
}

std::string block_prefix(int stage0, int slot) {
  return "s" + std::to_string(stage0 + 1) + ".b" + std::to_string(slot) + ".";
}

// Row-major 2-D sub-block copy between tensors of row widths sw and dw.
void copy2(const Tensor& src, int sw, int sr, int sc, Tensor& dst, int dw, int dr, int dc,
           int rows, int cols) {
  const float* s = src.ptr();
  float* d = dst.ptr();
  for (int r = 0; r < rows; ++r)
    std::memcpy(d + static_cast<std::size_t>(dr + r) * dw + dc,
                s + static_cast<std::size_t>(sr + r) * sw + sc,
                static_cast<std::size_t>(cols) * sizeof(float));
}

}  // namespace

ElasticBounds ElasticBounds::for_space(const SearchSpace& space) {
  space.validate();
  ElasticBounds b;
  for (int s = 1; s <= kNumStages; ++s) {
    StageBounds& st = b.stages[static_cast<std::size_t>(s - 1)];
    st.depth = imax(space.sub(DimensionKind::Depth, s).choices);
    st.embed = imax(space.sub(DimensionKind::EmbedDim, s).choices);
    st.ffn = ffn_width(space.sub(DimensionKind::MlpRatio, s).choices.back(), st.embed);
    SlotBounds slot;
    slot.window = imax(space.sub(DimensionKind::WindowSize, s).choices);
    slot.heads = imax(space.sub(DimensionKind::NumHeads, s).choices);
    slot.qkv = imax(space.sub(DimensionKind::QkvDim, s).choices);
    st.slots.assign(static_cast<std::size_t>(st.depth), slot);
  }
  return b;
}

ElasticBounds ElasticBounds::for_arch(const Architecture& arch) {
  arch.validate();
  ElasticBounds b;
  for (int s = 0; s < kNumStages; ++s) {
    const StageChoice& st = arch.stages[static_cast<std::size_t>(s)];
    StageBounds& sb = b.stages[static_cast<std::size_t>(s)];
    sb.depth = st.depth;
    sb.embed = st.embed;
    sb.ffn = ffn_width(st.mlp, st.embed);
    for (const BlockChoice& blk : st.blocks) sb.slots.push_back({blk.window, blk.heads, blk.qkv});
  }
  return b;
}

void ElasticBounds::check(const Architecture& arch) const {
  arch.validate();
  for (int s = 0; s < kNumStages; ++s) {
    const StageChoice& st = arch.stages[static_cast<std::size_t>(s)];
    const StageBounds& sb = stages[static_cast<std::size_t>(s)];
    const std::string where = " in stage " + std::to_string(s + 1);
    if (st.depth > sb.depth) throw OutOfBounds("depth " + std::to_string(st.depth) + where);
    if (st.embed > sb.embed) throw OutOfBounds("embed_dim " + std::to_string(st.embed) + where);
    if (ffn_width(st.mlp, st.embed) > sb.ffn)
      throw OutOfBounds("mlp_ratio " + choice_to_string(st.mlp) + where);
    for (std::size_t j = 0; j < st.blocks.size(); ++j) {
      const BlockChoice& blk = st.blocks[j];
      const SlotBounds& slot = sb.slots[j];
      if (blk.window > slot.window)
        throw OutOfBounds("window_size " + std::to_string(blk.window) + where);
      if (blk.heads > slot.heads)
        throw OutOfBounds("num_heads " + std::to_string(blk.heads) + where);
      if (blk.qkv > slot.qkv) throw OutOfBounds("qkv_dim " + std::to_string(blk.qkv) + where);
    }
  }
}

namespace {

Architecture endpoint_arch(const SearchSpace& space, bool maximal) {
  space.validate();
  auto pick = [&](DimensionKind k, int s) {
    const auto& c = space.sub(k, s).choices;
    return maximal ? c.back() : c.front();
  };
  Architecture arch;
  for (int s = 1; s <= kNumStages; ++s) {
    StageChoice st;
    st.depth = static_cast<int>(pick(DimensionKind::Depth, s));
    st.embed = static_cast<int>(pick(DimensionKind::EmbedDim, s));
    st.mlp = pick(DimensionKind::MlpRatio, s);
    BlockChoice blk;
    blk.window = static_cast<int>(pick(DimensionKind::WindowSize, s));
    // heads and qkv interact (q % n == 0): take the extreme qkv, then the
    // extreme head count that divides it, falling back to the next qkv when
    // the choice sets are misaligned
    const auto& heads = space.sub(DimensionKind::NumHeads, s).choices;
    auto qkvs = space.sub(DimensionKind::QkvDim, s).choices;
    if (maximal) std::reverse(qkvs.begin(), qkvs.end());
    blk.qkv = 0;
    for (double q : qkvs) {
      const int qi = static_cast<int>(q);
      for (std::size_t j = 0; j < heads.size() && blk.qkv == 0; ++j) {
        const int n = static_cast<int>(heads[maximal ? heads.size() - 1 - j : j]);
        if (qi % n == 0) {
          blk.qkv = qi;
          blk.heads = n;
        }
      }
      if (blk.qkv != 0) break;
    }
    if (blk.qkv == 0)
      throw InvalidArchitecture("stage " + std::to_string(s) +
                                ": no head count divides any qkv width");
    st.blocks.assign(static_cast<std::size_t>(st.depth), blk);
    arch.stages.push_back(std::move(st));
  }
  arch.validate();
  return arch;
}

}  // namespace

Architecture maximal_arch(const SearchSpace& space) { return endpoint_arch(space, true); }
Architecture minimal_arch(const SearchSpace& space) { return endpoint_arch(space, false); }

Tensor& ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  Param p;
  p.name = name;
  p.tensor = Tensor::zeros(std::move(shape));
  p.tensor.ensure_grad();
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return params_[it->second].tensor;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return params_[it->second].tensor;
}

std::int64_t ParamStore::total_scalars() const {
  std::int64_t n = 0;
  for (const Param& p : params_) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

Supernet::Supernet(const SearchSpace& space, const ModelShape& shape, std::uint64_t seed)
    : shape_(shape), bounds_(ElasticBounds::for_space(space)) {
  shape_.validate();
  allocate(seed);
}

Supernet::Supernet(const Architecture& arch, const ModelShape& shape, std::uint64_t seed)
    : shape_(shape), bounds_(ElasticBounds::for_arch(arch)) {
  shape_.validate();
  allocate(seed);
}

void Supernet::allocate(std::uint64_t seed) {
  auto gauss = [&](const std::string& name, std::vector<int> shape) {
    Tensor& t = params_.add(name, std::move(shape));
    std::mt19937_64 rng(derive_seed(seed, name));
    std::normal_distribution<float> d(0.0f, 0.02f);
    for (float& v : *t.data) v = d(rng);
  };
  auto zero = [&](const std::string& name, std::vector<int> shape) {
    params_.add(name, std::move(shape));
  };
  auto ones = [&](const std::string& name, std::vector<int> shape) {
    Tensor& t = params_.add(name, std::move(shape));
    std::fill(t.data->begin(), t.data->end(), 1.0f);
  };

  const int p2c = shape_.patch * shape_.patch * shape_.channels;
  gauss("patch.w", {bounds_.stages[0].embed, p2c});
  zero("patch.b", {bounds_.stages[0].embed});

  for (int i = 0; i < kNumStages; ++i) {
    const StageBounds& sb = bounds_.stages[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < sb.slots.size(); ++j) {
      const SlotBounds& slot = sb.slots[j];
      const std::string pre = block_prefix(i, static_cast<int>(j));
      ones(pre + "ln1.g", {sb.embed});
      zero(pre + "ln1.b", {sb.embed});
      gauss(pre + "qkv.w", {3 * slot.qkv, sb.embed});
      zero(pre + "qkv.b", {3 * slot.qkv});
      gauss(pre + "proj.w", {sb.embed, slot.qkv});
      zero(pre + "proj.b", {sb.embed});
      zero(pre + "rel", {(2 * slot.window - 1) * (2 * slot.window - 1), slot.heads});
      ones(pre + "ln2.g", {sb.embed});
      zero(pre + "ln2.b", {sb.embed});
      gauss(pre + "ffn.w1", {sb.ffn, sb.embed});
      zero(pre + "ffn.b1", {sb.ffn});
      gauss(pre + "ffn.w2", {sb.embed, sb.ffn});
      zero(pre + "ffn.b2", {sb.embed});
    }
    if (i < kNumStages - 1) {
      const int h2 = bounds_.stages[static_cast<std::size_t>(i) + 1].embed;
      const std::string pre = "merge" + std::to_string(i + 1) + ".";
      ones(pre + "ln.g", {4 * sb.embed});
      zero(pre + "ln.b", {4 * sb.embed});
      gauss(pre + "w", {h2, 4 * sb.embed});
      zero(pre + "b", {h2});
    }
  }

  const int h4 = bounds_.stages[3].embed;
  ones("head.ln.g", {h4});
  zero("head.ln.b", {h4});
  gauss("head.w", {shape_.classes, h4});
  zero("head.b", {shape_.classes});
}

Tensor Supernet::forward(Graph& g, const Architecture& arch, const Tensor& images,
                         std::vector<AttnCapture>* capture) {
  bounds_.check(arch);
  if (images.ndim() != 4 || images.dim(1) != shape_.channels || images.dim(2) != shape_.side ||
      images.dim(3) != shape_.side)
    throw ShapeMismatch("forward: batch does not match the model geometry");
  const int B = images.dim(0);
  const int p = shape_.patch, C = shape_.channels;

  // Patch embedding.
  int side = shape_.stage_side(1);
  int h = arch.stages[0].embed;
  Tensor x = g.reshape(images, {B, C, side, p, side, p});
  x = g.permute(x, {0, 2, 4, 3, 5, 1});
  x = g.reshape(x, {B, side * side, p * p * C});
  x = g.linear(x, g.slice(params_.get("patch.w"), 0, 0, h),
               g.slice(params_.get("patch.b"), 0, 0, h));

  for (int i = 0; i < kNumStages; ++i) {
    const StageChoice& st = arch.stages[static_cast<std::size_t>(i)];
    const StageBounds& sb = bounds_.stages[static_cast<std::size_t>(i)];
    h = st.embed;
    const int f = ffn_width(st.mlp, h);
    const int t = side * side;

    for (int j = 0; j < st.depth; ++j) {
      const BlockChoice& blk = st.blocks[static_cast<std::size_t>(j)];
      const SlotBounds& slot = sb.slots[static_cast<std::size_t>(j)];
      const int w = blk.window, n = blk.heads, q = blk.qkv, hd = q / n;
      if (side % w != 0)
        throw WindowMismatch("window " + std::to_string(w) + " does not divide side " +
                             std::to_string(side) + " in stage " + std::to_string(i + 1));
      const int u = w * w, nw = (side / w) * (side / w);
      const std::string pre = block_prefix(i, j);
      auto P = [&](const char* nm) -> const Tensor& { return params_.get(pre + nm); };

      Tensor y = g.layernorm(x, g.slice(P("ln1.g"), 0, 0, h), g.slice(P("ln1.b"), 0, 0, h));
      y = g.reshape(y, {B, side / w, w, side / w, w, h});
      y = g.permute(y, {0, 1, 3, 2, 4, 5});
      y = g.reshape(y, {B * nw, u, h});

      // q/k/v from the entangled projection: per third, the leading q rows.
      Tensor qkv_cols = g.slice(P("qkv.w"), 1, 0, h);
      auto piece = [&](int c) {
        Tensor z = g.linear(y, g.slice(qkv_cols, 0, c * slot.qkv, q),
                            g.slice(P("qkv.b"), 0, c * slot.qkv, q));
        z = g.reshape(z, {B * nw, u, n, hd});
        return g.permute(z, {0, 2, 1, 3});  // [B*nw, n, u, hd]
      };
      Tensor qh = piece(0), kh = piece(1), vh = piece(2);

      Tensor scores = g.matmul(qh, g.permute(kh, {0, 1, 3, 2}));
      scores = g.scale(scores, 1.0f / std::sqrt(static_cast<float>(hd)));

      // Centered sub-block of the relative bias table, leading heads.
      const int W = slot.window;
      Tensor tab = g.reshape(P("rel"), {2 * W - 1, 2 * W - 1, slot.heads});
      tab = g.slice(tab, 0, W - w, 2 * w - 1);
      tab = g.slice(tab, 1, W - w, 2 * w - 1);
      tab = g.slice(tab, 2, 0, n);
      tab = g.reshape(tab, {(2 * w - 1) * (2 * w - 1), n});
      Tensor bias = g.gather_rows(tab, rel_index(w));  // [u*u, n]
      bias = g.reshape(g.permute(bias, {1, 0}), {n, u, u});
      scores = g.add(scores, bias);

      Tensor attn = g.softmax(scores, -1);
      if (capture) capture->push_back({i + 1, j, w, n, attn});

      Tensor out = g.matmul(attn, vh);
      out = g.permute(out, {0, 2, 1, 3});
      out = g.reshape(out, {B * nw, u, q});
      out = g.linear(out, g.slice(g.slice(P("proj.w"), 0, 0, h), 1, 0, q),
                     g.slice(P("proj.b"), 0, 0, h));
      out = g.reshape(out, {B, side / w, side / w, w, w, h});
      out = g.permute(out, {0, 1, 3, 2, 4, 5});
      out = g.reshape(out, {B, t, h});
      x = g.add(x, out);

      Tensor z = g.layernorm(x, g.slice(P("ln2.g"), 0, 0, h), g.slice(P("ln2.b"), 0, 0, h));
      z = g.gelu(g.linear(z, g.slice(g.slice(P("ffn.w1"), 0, 0, f), 1, 0, h),
                          g.slice(P("ffn.b1"), 0, 0, f)));
      z = g.linear(z, g.slice(g.slice(P("ffn.w2"), 0, 0, h), 1, 0, f),
                   g.slice(P("ffn.b2"), 0, 0, h));
      x = g.add(x, z);
    }

    if (i < kNumStages - 1) {
      // 2x2 patch merging: concat the four neighbors, normalize, project.
      const int h2 = arch.stages[static_cast<std::size_t>(i) + 1].embed;
      const int H = sb.embed;
      const std::string pre = "merge" + std::to_string(i + 1) + ".";
      x = g.reshape(x, {B, side / 2, 2, side / 2, 2, h});
      x = g.permute(x, {0, 1, 3, 2, 4, 5});
      x = g.reshape(x, {B, (side / 2) * (side / 2), 4 * h});
      auto ln_slice = [&](const char* nm) {
        Tensor v = g.slice(g.reshape(params_.get(pre + nm), {4, H}), 1, 0, h);
        return g.reshape(v, {4 * h});
      };
      x = g.layernorm(x, ln_slice("ln.g"), ln_slice("ln.b"));
      Tensor mw = g.slice(params_.get(pre + "w"), 0, 0, h2);
      mw = g.reshape(g.slice(g.reshape(mw, {h2, 4, H}), 2, 0, h), {h2, 4 * h});
      x = g.linear(x, mw, g.slice(params_.get(pre + "b"), 0, 0, h2));
      side /= 2;
    }
  }

  x = g.layernorm(x, g.slice(params_.get("head.ln.g"), 0, 0, h),
                  g.slice(params_.get("head.ln.b"), 0, 0, h));
  x = g.mean_axis(x, 1);
  return g.linear(x, g.slice(params_.get("head.w"), 1, 0, h), params_.get("head.b"));
}

std::array<float, 4> Supernet::sandwich_step(const SearchSpace& space, const Tensor& images,
                                             const std::vector<int>& labels,
                                             const AdamConfig& opt, std::mt19937_64& rng) {
  std::array<Architecture, 4> archs = {maximal_arch(space), minimal_arch(space),
                                       sample_uniform(space, rng), sample_uniform(space, rng)};
  for (Param& p : params_.all()) p.tensor.zero_grad();
  std::array<float, 4> losses{};
  for (std::size_t k = 0; k < archs.size(); ++k) {
    Graph g;
    Tensor loss = g.cross_entropy(forward(g, archs[k], images), labels);
    losses[k] = loss.ptr()[0];
    g.backward(loss);  // accumulates into the shared grad buffers
  }
  for (Param& p : params_.all()) adamw_step(p.tensor, p.adam, opt);
  return losses;
}

float Supernet::train_step(const Architecture& arch, const Tensor& images,
                           const std::vector<int>& labels, const AdamConfig& opt) {
  for (Param& p : params_.all()) p.tensor.zero_grad();
  Graph g;
  Tensor loss = g.cross_entropy(forward(g, arch, images), labels);
  g.backward(loss);
  for (Param& p : params_.all()) adamw_step(p.tensor, p.adam, opt);
  return loss.ptr()[0];
}

double Supernet::evaluate(const Architecture& arch, const Dataset& val, int batch) {
  int wrong = 0;
  for (int start = 0; start < val.n; start += batch) {
    const int b = std::min(batch, val.n - start);
    std::vector<int> idx(static_cast<std::size_t>(b));
    std::iota(idx.begin(), idx.end(), start);
    auto [images, labels] = make_batch(val, idx);
    Graph g(false);
    Tensor logits = forward(g, arch, images);
    const float* lp = logits.ptr();
    const int k = logits.dim(1);
    for (int r = 0; r < b; ++r) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (lp[static_cast<std::size_t>(r) * k + c] > lp[static_cast<std::size_t>(r) * k + best])
          best = c;
      if (best != labels[static_cast<std::size_t>(r)]) wrong++;
    }
  }
  return static_cast<double>(wrong) / val.n;
}

Supernet Supernet::extract(const Architecture& arch) const {
  bounds_.check(arch);
  Supernet out(arch, shape_, 0);
  transfer_weights(*this, out);
  return out;
}

void transfer_weights(const Supernet& src, Supernet& dst) {
  const ModelShape& ms = src.shape();
  if (ms.side != dst.shape().side || ms.patch != dst.shape().patch ||
      ms.channels != dst.shape().channels || ms.classes != dst.shape().classes)
    throw ShapeMismatch("transfer: model geometries differ");
  const int p2c = ms.patch * ms.patch * ms.channels;

  auto cp = [&](const std::string& name, int sw, int sr, int sc, int dw, int dr, int dc,
                int rows, int cols) {
    copy2(src.params().get(name), sw, sr, sc, dst.params().get(name), dw, dr, dc, rows, cols);
  };

  const auto& sbs = src.bounds().stages;
  const auto& dbs = dst.bounds().stages;

  const int h1 = std::min(sbs[0].embed, dbs[0].embed);
  cp("patch.w", p2c, 0, 0, p2c, 0, 0, h1, p2c);
  cp("patch.b", sbs[0].embed, 0, 0, dbs[0].embed, 0, 0, 1, h1);

  for (int i = 0; i < kNumStages; ++i) {
    const StageBounds& sb = sbs[static_cast<std::size_t>(i)];
    const StageBounds& db = dbs[static_cast<std::size_t>(i)];
    const int Hs = sb.embed, Hd = db.embed, h = std::min(Hs, Hd);
    const int Fs = sb.ffn, Fd = db.ffn, f = std::min(Fs, Fd);
    const std::size_t slots = std::min(sb.slots.size(), db.slots.size());
    for (std::size_t j = 0; j < slots; ++j) {
      const SlotBounds& ss = sb.slots[j];
      const SlotBounds& ds = db.slots[j];
      const int Qs = ss.qkv, Qd = ds.qkv, q = std::min(Qs, Qd);
      const int Ws = ss.window, Wd = ds.window, w = std::min(Ws, Wd);
      const int Ns = ss.heads, Nd = ds.heads, n = std::min(Ns, Nd);
      const std::string pre = block_prefix(i, static_cast<int>(j));
      for (const char* nm : {"ln1.g", "ln1.b", "ln2.g", "ln2.b"})
        cp(pre + nm, Hs, 0, 0, Hd, 0, 0, 1, h);
      for (int c = 0; c < 3; ++c) {
        cp(pre + "qkv.w", Hs, c * Qs, 0, Hd, c * Qd, 0, q, h);
        cp(pre + "qkv.b", 3 * Qs, 0, c * Qs, 3 * Qd, 0, c * Qd, 1, q);
      }
      cp(pre + "proj.w", Qs, 0, 0, Qd, 0, 0, h, q);
      cp(pre + "proj.b", Hs, 0, 0, Hd, 0, 0, 1, h);
      for (int dy = 0; dy < 2 * w - 1; ++dy)
        cp(pre + "rel", Ns, (dy + Ws - w) * (2 * Ws - 1) + (Ws - w), 0, Nd,
           (dy + Wd - w) * (2 * Wd - 1) + (Wd - w), 0, 2 * w - 1, n);
      cp(pre + "ffn.w1", Hs, 0, 0, Hd, 0, 0, f, h);
      cp(pre + "ffn.b1", Fs, 0, 0, Fd, 0, 0, 1, f);
      cp(pre + "ffn.w2", Fs, 0, 0, Fd, 0, 0, h, f);
      cp(pre + "ffn.b2", Hs, 0, 0, Hd, 0, 0, 1, h);
    }
    if (i < kNumStages - 1) {
      const int H2s = sbs[static_cast<std::size_t>(i) + 1].embed;
      const int H2d = dbs[static_cast<std::size_t>(i) + 1].embed;
      const int h2 = std::min(H2s, H2d);
      const std::string pre = "merge" + std::to_string(i + 1) + ".";
      cp(pre + "ln.g", Hs, 0, 0, Hd, 0, 0, 4, h);
      cp(pre + "ln.b", Hs, 0, 0, Hd, 0, 0, 4, h);
      for (int grp = 0; grp < 4; ++grp)
        cp(pre + "w", 4 * Hs, 0, grp * Hs, 4 * Hd, 0, grp * Hd, h2, h);
      cp(pre + "b", H2s, 0, 0, H2d, 0, 0, 1, h2);
    }
  }

  const int H4s = sbs[3].embed, H4d = dbs[3].embed, h4 = std::min(H4s, H4d);
  const int K = ms.classes;
  cp("head.ln.g", H4s, 0, 0, H4d, 0, 0, 1, h4);
  cp("head.ln.b", H4s, 0, 0, H4d, 0, 0, 1, h4);
  cp("head.w", H4s, 0, 0, H4d, 0, 0, K, h4);
  cp("head.b", K, 0, 0, K, 0, 0, 1, K);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(field);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void Supernet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("S3CK", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(params_.all().size()));
  for (const Param& p : params_.all()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor.ndim()));
    for (int d : p.tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(p.tensor.ptr()),
              static_cast<std::streamsize>(p.tensor.numel() * sizeof(float)));
  }
  if (!out) throw IoError("write failed for " + path);
}

void Supernet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "S3CK", 4) != 0) throw FormatError("magic");
  if (get_u32(in, "version") != 1) throw FormatError("version");
  const std::uint32_t count = get_u32(in, "tensor count");
  if (count != params_.all().size()) throw FormatError("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = get_u32(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("tensor name");
    Tensor& t = params_.get(name);
    const std::uint32_t nd = get_u32(in, "rank");
    if (nd != static_cast<std::uint32_t>(t.ndim())) throw FormatError("shape of " + name);
    for (std::uint32_t d = 0; d < nd; ++d)
      if (get_u32(in, "shape") != static_cast<std::uint32_t>(t.shape[d]))
        throw FormatError("shape of " + name);
    if (!in.read(reinterpret_cast<char*>(t.ptr()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float))))
      throw FormatError("payload of " + name);
  }
}

std::pair<Tensor, std::vector<int>> make_batch(const Dataset& ds, const std::vector<int>& idx) {
  const int B = static_cast<int>(idx.size());
  Tensor images = Tensor::zeros({B, ds.channels, ds.side, ds.side});
  const std::size_t sz = ds.image_size();
  std::vector<int> labels(idx.size());
  for (int b = 0; b < B; ++b) {
    std::memcpy(images.ptr() + static_cast<std::size_t>(b) * sz, ds.image(idx[static_cast<std::size_t>(b)]),
                sz * sizeof(float));
    labels[static_cast<std::size_t>(b)] = ds.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
  }
  return {std::move(images), std::move(labels)};
}

float cosine_lr(const TrainConfig& cfg, int t) {
  const double frac = cfg.steps > 1 ? static_cast<double>(t) / (cfg.steps - 1) : 0.0;
  return cfg.min_lr +
         0.5f * (cfg.lr - cfg.min_lr) * static_cast<float>(1.0 + std::cos(frac * 3.14159265358979323846));
}

void train_supernet(Supernet& net, const SearchSpace& space, const Dataset& train,
                    const TrainConfig& cfg, std::uint64_t seed) {
  BatchIterator it(train.n, cfg.batch, derive_seed(seed, "batches"));
  std::mt19937_64 rng(derive_seed(seed, "sandwich"));
  for (int t = 0; t < cfg.steps; ++t) {
    AdamConfig opt;
    opt.lr = cosine_lr(cfg, t);
    opt.weight_decay = cfg.weight_decay;
    auto [images, labels] = make_batch(train, it.next());
    net.sandwich_step(space, images, labels, opt, rng);
  }
}

std::pair<Supernet, double> retrain_standalone(const Architecture& arch, const ModelShape& shape,
                                               const Dataset& train, const Dataset& val,
                                               const TrainConfig& cfg, std::uint64_t seed) {
  Supernet net(arch, shape, derive_seed(seed, "init"));
  BatchIterator it(train.n, cfg.batch, derive_seed(seed, "batches"));
  for (int t = 0; t < cfg.steps; ++t) {
    AdamConfig opt;
    opt.lr = cosine_lr(cfg, t);
    opt.weight_decay = cfg.weight_decay;
    auto [images, labels] = make_batch(train, it.next());
    net.train_step(arch, images, labels, opt);
  }
  double err = net.evaluate(arch, val);
  return {std::move(net), err};
}

std::vector<LayerAttnStats> attention_stats(Supernet& net, const Architecture& arch,
                                            const Tensor& images, int k) {
  if (k < 1) throw ConfigError("attention top-k must be >= 1");
  std::vector<AttnCapture> caps;
  Graph g(false);
  net.forward(g, arch, images, &caps);
  std::vector<LayerAttnStats> out;
  for (const AttnCapture& c : caps) {
    const int w = c.window, u = w * w, n = c.heads;
    std::vector<double> dists;
    if (u == 1) {
      // Degenerate single-token windows: the query can only attend to itself.
      dists.assign(static_cast<std::size_t>(c.attn.dim(0)) * n, 0.0);
    } else {
      if (k >= u)
        throw ConfigError("attention top-k " + std::to_string(k) +
                          " must be below the window token count " + std::to_string(u));
      const float* a = c.attn.ptr();
      const int bn = c.attn.dim(0);
      std::vector<int> cand(static_cast<std::size_t>(u) - 1);
      for (int b = 0; b < bn; ++b)
        for (int hh = 0; hh < n; ++hh)
          for (int qi = 0; qi < u; ++qi) {
            const float* row = a + ((static_cast<std::size_t>(b) * n + hh) * u + qi) * u;
            int m = 0;
            for (int ki = 0; ki < u; ++ki)
              if (ki != qi) cand[static_cast<std::size_t>(m++)] = ki;
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), [&](int x, int y) {
              if (row[x] != row[y]) return row[x] > row[y];
              return x < y;
            });
            for (int s = 0; s < k; ++s) {
              const int ki = cand[static_cast<std::size_t>(s)];
              dists.push_back(std::hypot(static_cast<double>(ki / w - qi / w),
                                         static_cast<double>(ki % w - qi % w)));
            }
          }
    }
    double mean = 0.0;
    for (double d : dists) mean += d;
    mean /= static_cast<double>(dists.size());
    std::vector<double> sorted = dists;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    out.push_back({c.stage, c.block, mean, median});
  }
  return out;
}

}  // namespace s3
