#include "evaluator.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace s3 {

double PerformanceOracle::error(const Architecture& arch) {
  const std::string key = encode(arch);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const double e = compute(arch);
  cache_.emplace(key, e);
  return e;
}

void PerformanceOracle::prepare(const SearchSpace&, std::uint64_t) {}

SupernetOracle::SupernetOracle(const ModelShape& shape, const Dataset& train, const Dataset& val,
                               const TrainConfig& cfg, bool finetune)
    : shape_(shape), train_(train), val_(val), cfg_(cfg), finetune_(finetune) {}

SupernetOracle::SupernetOracle(Supernet net, const Dataset& train, const Dataset& val,
                               const TrainConfig& cfg, bool finetune)
    : shape_(net.shape()), train_(train), val_(val), cfg_(cfg), finetune_(finetune),
      net_(std::move(net)) {}

void SupernetOracle::prepare(const SearchSpace& space, std::uint64_t seed) {
  Supernet fresh(space, shape_, derive_seed(seed, "supernet.init"));
  if (finetune_ && net_) transfer_weights(*net_, fresh);
  net_ = std::move(fresh);
  train_supernet(*net_, space, train_, cfg_, seed);
  clear_cache();
}

Supernet& SupernetOracle::net() {
  if (!net_) throw ConfigError("supernet oracle used before prepare()");
  return *net_;
}

double SupernetOracle::compute(const Architecture& arch) { return net().evaluate(arch, val_); }

double TabularOracle::contribution(const Architecture& arch, DimensionKind kind, int stage) {
  const StageChoice& st = arch.stages[static_cast<std::size_t>(stage - 1)];
  switch (kind) {
    case DimensionKind::Depth: return st.depth;
    case DimensionKind::EmbedDim: return st.embed;
    case DimensionKind::MlpRatio: return st.mlp;
    default: break;
  }
  double sum = 0;
  for (const BlockChoice& blk : st.blocks)
    sum += kind == DimensionKind::WindowSize ? blk.window
           : kind == DimensionKind::NumHeads ? blk.heads
                                             : blk.qkv;
  return sum / static_cast<double>(st.blocks.size());
}

double TabularOracle::noise(const std::string& encoding) {
  return static_cast<double>(fnv1a64(encoding) % 2000001ULL) / 1000000.0 - 1.0;
}

double TabularOracle::compute(const Architecture& arch) {
  double e = cfg_.base;
  for (const TabularTerm& t : cfg_.terms) e -= t.coeff * contribution(arch, t.kind, t.stage);
  if (cfg_.eta != 0.0) e += cfg_.eta * noise(encode(arch));
  return std::clamp(e, 0.0, 1.0);
}

std::vector<Architecture> sample_constrained(const SearchSpace& space, const ModelShape& shape,
                                             const ResourceBudget& budget, int n,
                                             std::uint64_t seed, SampleDiag* diag) {
  if (n <= 0) throw ConfigError("sample_constrained: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Architecture> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::int64_t max_attempts = 1000LL * n;
  std::int64_t attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    if (attempts >= max_attempts) {
      const double rate = static_cast<double>(out.size()) / static_cast<double>(attempts);
      throw ConstraintInfeasible(
          "accepted " + std::to_string(out.size()) + " of " + std::to_string(attempts) +
          " attempts (rate " + std::to_string(rate) + ") while sampling " + std::to_string(n));
    }
    attempts++;
    Architecture arch = sample_uniform(space, rng);
    try {
      validate_for_shape(arch, shape);
    } catch (const InvalidArchitecture&) {
      continue;  // window does not fit the feature grid
    }
    if (!budget.unbounded() && !within_budget(arch, shape, budget)) continue;
    out.push_back(std::move(arch));
  }
  if (diag) *diag = {attempts, static_cast<std::int64_t>(out.size())};
  return out;
}

int default_top_k(int n) {
  return std::min(50, static_cast<int>(std::ceil(0.05 * n)));
}

EtReport et_error(std::vector<std::pair<Architecture, double>> samples, int top_k,
                  const ResourceBudget& budget) {
  if (samples.empty()) throw EmptySample("et_error needs at least one sample");
  const int n = static_cast<int>(samples.size());
  if (top_k <= 0) top_k = default_top_k(n);
  if (top_k > n) throw ConfigError("top_k exceeds the sample count");

  EtReport report;
  report.top_k = top_k;
  report.budget = budget;
  report.samples = std::move(samples);
  std::sort(report.samples.begin(), report.samples.end(),
            [](const auto& a, const auto& b) { return encode(a.first) < encode(b.first); });

  std::vector<double> errors;
  errors.reserve(report.samples.size());
  for (const auto& [arch, e] : report.samples) errors.push_back(e);
  double sum = 0;
  for (double e : errors) sum += e;
  report.q_e = sum / n;
  std::sort(errors.begin(), errors.end());
  double tsum = 0;
  for (int i = 0; i < top_k; ++i) tsum += errors[static_cast<std::size_t>(i)];
  report.q_t = tsum / top_k;
  report.q = 0.5 * (report.q_e + report.q_t);
  return report;
}

std::string EtReport::to_json() const {
  nlohmann::json j;
  j["q_e"] = q_e;
  j["q_t"] = q_t;
  j["q"] = q;
  j["top_k"] = top_k;
  j["n"] = samples.size();
  if (budget.max_params) j["budget"]["max_params"] = *budget.max_params;
  if (budget.max_flops) j["budget"]["max_flops"] = *budget.max_flops;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& [arch, e] : samples) arr.push_back({{"arch", encode(arch)}, {"error", e}});
  return j.dump(2);
}

std::vector<std::pair<double, double>> edf(const std::vector<double>& errors) {
  if (errors.empty()) throw EmptySample("edf needs at least one error");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> points;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const bool last_of_value = i + 1 == sorted.size() || sorted[i + 1] != sorted[i];
    if (last_of_value) points.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return points;
}

double edf_at(const std::vector<std::pair<double, double>>& points, double x) {
  double f = 0.0;
  for (const auto& [e, v] : points) {
    if (e > x) break;
    f = v;
  }
  return f;
}

}  // namespace s3
