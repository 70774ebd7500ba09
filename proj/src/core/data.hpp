#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "common.hpp"

namespace s3 {

enum class Split : std::uint8_t { Train = 0, Val = 1 };

// Immutable image-classification dataset: n images of channels x side x side
// f32 pixels in [0,1] with integer labels in [0, classes).
struct Dataset {
  int n = 0;
  int channels = 0;
  int side = 0;
  int classes = 0;
  Split split = Split::Train;
  std::vector<float> pixels;        // n * channels * side * side
  std::vector<std::int32_t> labels;  // n

  std::size_t image_size() const {
    return static_cast<std::size_t>(channels) * side * side;
  }
  const float* image(int i) const { return pixels.data() + static_cast<std::size_t>(i) * image_size(); }
  void validate() const;
};

struct SyntheticConfig {
  int n_train = 2048;
  int n_val = 512;
  int side = 32;
  int channels = 1;
  int classes = 4;
  float noise_sigma = 0.1f;
};

// Class k is a fixed oriented-stripe template (orientation, frequency and
// phase derived from k) plus per-image Gaussian pixel noise, clamped to
// [0,1]. Deterministic in the seed; train and val use distinct substreams.
std::pair<Dataset, Dataset> generate_synthetic(std::uint64_t seed, const SyntheticConfig& cfg);

// Flat little-endian file: magic "S3DS", u32 version, u32 n/channels/side/
// classes, u8 split, f32 pixels, i32 labels.
void save_flat(const Dataset& ds, const std::string& path);
Dataset load_flat(const std::string& path);

// Deterministic minibatch index iterator: reshuffles every epoch from its
// own stream.
class BatchIterator {
 public:
  BatchIterator(int n, int batch, std::uint64_t seed);
  // Next batch of indices; reshuffles when the epoch is exhausted.
  std::vector<int> next();

 private:
  int n_;
  int batch_;
  std::size_t pos_ = 0;
  std::vector<int> order_;
  std::mt19937_64 rng_;
  void reshuffle();
};

}  // namespace s3
