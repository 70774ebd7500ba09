#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace s3 {

void Dataset::validate() const {
  if (n <= 0 || channels <= 0 || side <= 0 || classes <= 0)
    throw FormatError("dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(n) * image_size())
    throw FormatError("payload length");
  if (labels.size() != static_cast<std::size_t>(n)) throw FormatError("label count");
  std::vector<int> per_class(classes, 0);
  for (std::int32_t lab : labels) {
    if (lab < 0 || lab >= classes) throw FormatError("label range");
    per_class[lab]++;
  }
  for (int k = 0; k < classes; ++k)
    if (per_class[k] == 0) throw FormatError("class " + std::to_string(k) + " has no samples");
}

namespace {

float gaussian(std::mt19937_64& rng) {
  // Box-Muller on explicit uniforms; keeps the stream layout in our hands.
  std::uniform_real_distribution<double> uni(1e-12, 1.0);
  double u1 = uni(rng);
  double u2 = uni(rng);
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
}

Dataset make_split(std::uint64_t seed, const SyntheticConfig& cfg, int n, Split split) {
  Dataset ds;
  ds.n = n;
  ds.channels = cfg.channels;
  ds.side = cfg.side;
  ds.classes = cfg.classes;
  ds.split = split;
  ds.pixels.resize(static_cast<std::size_t>(n) * ds.image_size());
  ds.labels.resize(n);

  // Fixed per-class stripe templates.
  std::vector<std::vector<float>> templates(cfg.classes);
  for (int k = 0; k < cfg.classes; ++k) {
    templates[k].resize(ds.image_size());
    const double theta = M_PI * k / cfg.classes;
    const double freq = 2.0 * M_PI * (2.0 + k % 3) / cfg.side;
    const double phase = 0.7 * k;
    for (int c = 0; c < cfg.channels; ++c)
      for (int y = 0; y < cfg.side; ++y)
        for (int x = 0; x < cfg.side; ++x) {
          double proj = x * std::cos(theta) + y * std::sin(theta);
          double v = 0.5 + 0.4 * std::sin(freq * proj + phase + 0.3 * c);
          templates[k][(static_cast<std::size_t>(c) * cfg.side + y) * cfg.side + x] =
              static_cast<float>(v);
        }
  }

  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const int k = i % cfg.classes;
    ds.labels[i] = k;
    float* img = ds.pixels.data() + static_cast<std::size_t>(i) * ds.image_size();
    for (std::size_t p = 0; p < ds.image_size(); ++p) {
      float v = templates[k][p] + cfg.noise_sigma * gaussian(rng);
      img[p] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  ds.validate();
  return ds;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(field);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::pair<Dataset, Dataset> generate_synthetic(std::uint64_t seed, const SyntheticConfig& cfg) {
  if (cfg.classes < 2 || cfg.side < 8 || cfg.n_train <= 0 || cfg.n_val <= 0 || cfg.channels <= 0)
    throw ConfigError("synthetic data: classes >= 2, side >= 8, positive sizes required");
  if (cfg.n_train < cfg.classes || cfg.n_val < cfg.classes)
    throw ConfigError("synthetic data: each split needs at least one sample per class");
  Dataset train = make_split(derive_seed(seed, "data.train"), cfg, cfg.n_train, Split::Train);
  Dataset val = make_split(derive_seed(seed, "data.val"), cfg, cfg.n_val, Split::Val);
  return {std::move(train), std::move(val)};
}

void save_flat(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("S3DS", 4);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(ds.n));
  put_u32(out, static_cast<std::uint32_t>(ds.channels));
  put_u32(out, static_cast<std::uint32_t>(ds.side));
  put_u32(out, static_cast<std::uint32_t>(ds.classes));
  out.put(static_cast<char>(ds.split));
  for (float v : ds.pixels) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  for (std::int32_t lab : ds.labels) put_u32(out, static_cast<std::uint32_t>(lab));
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_flat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "S3DS", 4) != 0) throw FormatError("magic");
  if (get_u32(in, "version") != 1) throw FormatError("version");
  Dataset ds;
  ds.n = static_cast<int>(get_u32(in, "samples"));
  ds.channels = static_cast<int>(get_u32(in, "channels"));
  ds.side = static_cast<int>(get_u32(in, "side"));
  ds.classes = static_cast<int>(get_u32(in, "classes"));
  if (ds.n <= 0) throw FormatError("samples");
  if (ds.channels <= 0) throw FormatError("channels");
  if (ds.side <= 0) throw FormatError("side");
  if (ds.classes <= 0) throw FormatError("classes");
  int split_byte = in.get();
  if (split_byte != 0 && split_byte != 1) throw FormatError("split");
  ds.split = static_cast<Split>(split_byte);

  ds.pixels.resize(static_cast<std::size_t>(ds.n) * ds.image_size());
  for (auto& v : ds.pixels) {
    std::uint32_t bits = get_u32(in, "payload length");
    std::memcpy(&v, &bits, 4);
  }
  ds.labels.resize(ds.n);
  for (auto& lab : ds.labels) lab = static_cast<std::int32_t>(get_u32(in, "payload length"));
  ds.validate();
  return ds;
}

BatchIterator::BatchIterator(int n, int batch, std::uint64_t seed)
    : n_(n), batch_(std::min(batch, n)), rng_(seed) {
  if (n <= 0 || batch <= 0) throw ConfigError("batch iterator: positive sizes required");
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_.resize(n_);
  for (int i = 0; i < n_; ++i) order_[i] = i;
  std::shuffle(order_.begin(), order_.end(), rng_);
  pos_ = 0;
}

std::vector<int> BatchIterator::next() {
  if (pos_ + static_cast<std::size_t>(batch_) > order_.size()) reshuffle();
  std::vector<int> out(order_.begin() + pos_, order_.begin() + pos_ + batch_);
  pos_ += static_cast<std::size_t>(batch_);
  return out;
}

}  // namespace s3
