#include "evolution.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace s3 {

namespace {

std::string fit_key(DimensionKind kind, int stage) {
  return std::string(kind_name(kind)) + "/" + std::to_string(stage);
}

// Within-group E-T error: the whole-space top_k rule applied to one choice's
// error list.
double group_q(std::vector<double> errs, int top_k_cfg) {
  const int n = static_cast<int>(errs.size());
  const int k = top_k_cfg > 0 ? std::min(top_k_cfg, n) : default_top_k(n);
  double qe = 0;
  for (double e : errs) qe += e;
  qe /= n;
  std::sort(errs.begin(), errs.end());
  double qt = 0;
  for (int i = 0; i < k; ++i) qt += errs[static_cast<std::size_t>(i)];
  qt /= k;
  return 0.5 * (qe + qt);
}

BlockChoice sample_block(const SearchSpace& space, int stage, std::mt19937_64& rng) {
  const auto& ws = space.sub(DimensionKind::WindowSize, stage).choices;
  const auto& ns = space.sub(DimensionKind::NumHeads, stage).choices;
  const auto& qs = space.sub(DimensionKind::QkvDim, stage).choices;
  auto pick = [&](const std::vector<double>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    BlockChoice blk;
    blk.window = static_cast<int>(pick(ws));
    blk.heads = static_cast<int>(pick(ns));
    blk.qkv = static_cast<int>(pick(qs));
    if (blk.qkv % blk.heads == 0) return blk;
  }
  throw SamplingExhausted("no divisible (heads, qkv) pair in stage " + std::to_string(stage));
}

}  // namespace

FitResult linear_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) throw EmptySample("linear_fit needs at least one point");
  FitResult fit;
  fit.points = static_cast<int>(points.size());
  bool same_y = true;
  for (const auto& [x, y] : points) same_y = same_y && y == points.front().second;
  if (same_y) {  // exact zero slope; the mean below would round
    fit.b = points.front().second;
    return fit;
  }
  double xbar = 0, ybar = 0;
  for (const auto& [x, y] : points) {
    xbar += x;
    ybar += y;
  }
  xbar /= fit.points;
  ybar /= fit.points;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - xbar) * (x - xbar);
    sxy += (x - xbar) * (y - ybar);
  }
  if (sxx == 0.0) {
    fit.degenerate = true;
    fit.w = 0.0;
    fit.b = ybar;
    return fit;
  }
  fit.w = sxy / sxx;
  fit.b = ybar - fit.w * xbar;
  return fit;
}

void EvolutionConfig::validate() const {
  if (iterations < 1) throw ConfigError("evolution: iterations must be >= 1");
  if (tau <= 0) throw ConfigError("evolution: tau must be positive");
  if (samples < 1) throw ConfigError("evolution: sample count must be >= 1");
  for (int k = 0; k < kNumKinds; ++k) {
    const double g = gamma[static_cast<std::size_t>(k)];
    if (g <= 0) throw ConfigError("evolution: gamma must be positive");
    double ip;
    if (static_cast<DimensionKind>(k) != DimensionKind::MlpRatio && std::modf(g, &ip) != 0.0)
      throw ConfigError(std::string("evolution: gamma for ") +
                        kind_name(static_cast<DimensionKind>(k)) + " must be integral");
  }
}

Subspace evolve_subspace(const Subspace& sub, const FitResult& fit, double tau, double gamma,
                         ShiftMode mode, bool* fallback) {
  if (tau <= 0) throw ConfigError("evolve_subspace: tau must be positive");
  if (fallback) *fallback = false;
  long long k;
  if (mode == ShiftMode::Floor) {
    k = static_cast<long long>(std::floor(fit.w / tau));
  } else {
    const long long mag = static_cast<long long>(std::floor(std::abs(fit.w) / tau));
    k = fit.w < 0 ? -mag : mag;
  }
  Subspace out = sub;
  if (k == 0) return out;
  out.choices.clear();
  const double lo = sub.kind == DimensionKind::Depth ? 1.0 : 0.0;
  double smallest_shifted = 0.0;
  for (std::size_t i = 0; i < sub.choices.size(); ++i) {
    const double v = sub.choices[i] - static_cast<double>(k) * gamma;
    if (i == 0) smallest_shifted = v;
    const bool keep = sub.kind == DimensionKind::Depth ? v >= lo : v > lo;
    if (keep) out.choices.push_back(v);
  }
  if (out.choices.empty()) {
    // keep the smallest shifted value clamped up to the dimension's smallest
    // legal quantum (1 for depth, one step otherwise)
    const double clamp = sub.kind == DimensionKind::Depth ? 1.0 : sub.step;
    out.choices.push_back(std::max(smallest_shifted, clamp));
    if (fallback) *fallback = true;
  }
  out.validate();
  return out;
}

SpaceHistory evolve_space(const SearchSpace& space, PerformanceOracle& oracle,
                          const ModelShape& shape, const ResourceBudget& budget,
                          const EvolutionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  space.validate();
  SpaceHistory hist;
  SearchSpace cur = space;
  std::vector<std::string> prev_fb;
  for (int t = 0; t <= cfg.iterations; ++t) {
    const std::string tag = std::to_string(t);
    oracle.prepare(cur, derive_seed(seed, "evolve.prepare." + tag));
    auto archs = sample_constrained(cur, shape, budget, cfg.samples,
                                    derive_seed(seed, "evolve.sample." + tag));
    std::vector<std::pair<Architecture, double>> pairs;
    pairs.reserve(archs.size());
    for (auto& a : archs) {
      const double e = oracle.error(a);
      pairs.emplace_back(std::move(a), e);
    }
    IterationRecord rec;
    rec.space = cur;
    rec.report = et_error(pairs, cfg.top_k, budget);
    if (t == cfg.iterations) {
      hist.iterations.push_back(std::move(rec));
      break;
    }
    SearchSpace next = cur;
    std::vector<std::string> fb;
    for (int k = 0; k < kNumKinds; ++k) {
      const auto kind = static_cast<DimensionKind>(k);
      for (int s = 1; s <= kNumStages; ++s) {
        auto groups = partition_by_choice(pairs, kind, s);
        std::vector<std::pair<double, double>> pts;
        for (auto& [choice, errs] : groups)
          pts.emplace_back(choice, group_q(std::move(errs), cfg.top_k));
        const FitResult fit = linear_fit(pts);
        bool fell = false;
        next.sub(kind, s) = evolve_subspace(cur.sub(kind, s), fit, cfg.tau,
                                            cfg.gamma[static_cast<std::size_t>(k)], cfg.mode,
                                            &fell);
        const std::string key = fit_key(kind, s);
        rec.fits[key] = fit;
        if (fell) fb.push_back(key);
      }
    }
    for (const auto& key : fb)
      if (std::find(prev_fb.begin(), prev_fb.end(), key) != prev_fb.end()) hist.collapsed = true;
    prev_fb = fb;
    rec.fallbacks = fb;
    next.validate();
    hist.iterations.push_back(std::move(rec));
    cur = next;
  }
  return hist;
}

std::string SpaceHistory::to_json() const {
  nlohmann::json j;
  j["collapsed"] = collapsed;
  auto& arr = j["iterations"] = nlohmann::json::array();
  for (const IterationRecord& rec : iterations) {
    nlohmann::json it;
    it["space"] = nlohmann::json::parse(rec.space.to_json());
    it["report"] = nlohmann::json::parse(rec.report.to_json());
    it["fallbacks"] = rec.fallbacks;
    auto& fits = it["fits"] = nlohmann::json::object();
    for (const auto& [key, fit] : rec.fits)
      fits[key] = {{"w", fit.w}, {"b", fit.b}, {"points", fit.points},
                   {"degenerate", fit.degenerate}};
    arr.push_back(std::move(it));
  }
  return j.dump(2);
}

void SearchConfig::validate() const {
  if (population < 1 || generations < 1) throw ConfigError("search: positive sizes required");
  if (parents < 1 || parents > population)
    throw ConfigError("search: parent count must be in [1, population]");
  for (double p : {p_depth, p_embed, p_mut})
    if (p < 0 || p > 1) throw ConfigError("search: probabilities must be in [0, 1]");
}

namespace {

Architecture crossover(const Architecture& a, const Architecture& b, std::mt19937_64& rng) {
  auto coin = [&] { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; };
  Architecture child;
  for (int s = 0; s < kNumStages; ++s) {
    const StageChoice& sa = a.stages[static_cast<std::size_t>(s)];
    const StageChoice& sb = b.stages[static_cast<std::size_t>(s)];
    const StageChoice& donor = coin() ? sa : sb;  // depth donor
    StageChoice st;
    st.depth = donor.depth;
    st.embed = (coin() ? sa : sb).embed;
    st.mlp = (coin() ? sa : sb).mlp;
    for (int j = 0; j < st.depth; ++j) {
      const bool in_a = j < static_cast<int>(sa.blocks.size());
      const bool in_b = j < static_cast<int>(sb.blocks.size());
      const StageChoice* from = &donor;
      if (in_a && in_b) from = coin() ? &sa : &sb;
      else if (in_a) from = &sa;
      else if (in_b) from = &sb;
      st.blocks.push_back(from->blocks[static_cast<std::size_t>(j)]);
    }
    child.stages.push_back(std::move(st));
  }
  return child;
}

Architecture mutate(const Architecture& parent, const SearchSpace& space, const SearchConfig& cfg,
                    std::mt19937_64& rng) {
  auto chance = [&](double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  };
  auto pick = [&](const std::vector<double>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  Architecture child = parent;
  for (int s = 1; s <= kNumStages; ++s) {
    StageChoice& st = child.stages[static_cast<std::size_t>(s - 1)];
    if (chance(cfg.p_depth)) {
      st.depth = static_cast<int>(pick(space.sub(DimensionKind::Depth, s).choices));
      st.blocks.clear();
      for (int j = 0; j < st.depth; ++j) st.blocks.push_back(sample_block(space, s, rng));
    }
    if (chance(cfg.p_embed))
      st.embed = static_cast<int>(pick(space.sub(DimensionKind::EmbedDim, s).choices));
    for (auto& blk : st.blocks)
      if (chance(cfg.p_mut)) blk = sample_block(space, s, rng);
    if (chance(cfg.p_mut)) st.mlp = pick(space.sub(DimensionKind::MlpRatio, s).choices);
  }
  return child;
}

}  // namespace

std::string SearchResult::log_csv() const {
  std::string out = "generation,encoding,error,params,macs\n";
  char buf[64];
  for (const SearchLogRow& row : log) {
    std::snprintf(buf, sizeof(buf), "%.10g", row.error);
    // encodings contain commas, so the field is always quoted
    out += std::to_string(row.generation) + ",\"" + row.encoding + "\"," + buf + "," +
           std::to_string(row.params) + "," + std::to_string(row.macs) + "\n";
  }
  return out;
}

SearchResult evolutionary_search(const SearchSpace& space, PerformanceOracle& oracle,
                                 const ModelShape& shape, const SearchConfig& cfg,
                                 std::uint64_t seed) {
  cfg.validate();
  space.validate();
  std::mt19937_64 rng(derive_seed(seed, "search.loop"));
  auto pop = sample_constrained(space, shape, cfg.budget, cfg.population,
                                derive_seed(seed, "search.init"));

  auto acceptable = [&](const Architecture& a) {
    try {
      a.validate_in(space);
      validate_for_shape(a, shape);
    } catch (const Error&) {
      return false;
    }
    return cfg.budget.unbounded() || within_budget(a, shape, cfg.budget);
  };

  SearchResult res;
  res.best_error = 2.0;
  for (int gen = 1; gen <= cfg.generations; ++gen) {
    struct Cand {
      Architecture arch;
      double err;
      std::int64_t params;
      std::int64_t macs;
      std::string enc;
    };
    std::vector<Cand> cands;
    cands.reserve(pop.size());
    for (auto& a : pop) {
      Cand c;
      c.err = oracle.error(a);
      c.params = param_count(a, shape);
      c.macs = flop_count(a, shape);
      c.enc = encode(a);
      c.arch = std::move(a);
      cands.push_back(std::move(c));
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.err != y.err) return x.err < y.err;
      if (x.params != y.params) return x.params < y.params;
      return x.enc < y.enc;
    });
    for (const Cand& c : cands) res.log.push_back({gen, c.enc, c.err, c.params, c.macs});
    if (cands[0].err < res.best_error) {
      res.best = cands[0].arch;
      res.best_error = cands[0].err;
    }
    if (gen == cfg.generations) break;

    const int parents_n = std::min<int>(cfg.parents, static_cast<int>(cands.size()));
    std::vector<Architecture> next;
    next.reserve(static_cast<std::size_t>(cfg.population));
    std::set<std::string> seen;  // duplicate offspring spend budget on cached errors
    auto admit = [&](Architecture a) {
      if (!seen.insert(encode(a)).second) return false;
      next.push_back(std::move(a));
      return true;
    };
    for (int i = 0; i < parents_n; ++i) admit(cands[static_cast<std::size_t>(i)].arch);

    auto parent_at = [&](int i) -> const Architecture& {
      return cands[static_cast<std::size_t>(i)].arch;
    };
    auto rand_parent = [&]() -> const Architecture& {
      return parent_at(std::uniform_int_distribution<int>(0, parents_n - 1)(rng));
    };

    const int want_cross = (cfg.population - parents_n) / 2;
    const int want_mut = cfg.population - parents_n - want_cross;
    int attempts = 0;
    const int cap = 50 * cfg.population + 100;
    int made = 0;
    while (made < want_cross && attempts++ < cap) {
      Architecture child = crossover(rand_parent(), rand_parent(), rng);
      if (!acceptable(child) || !admit(std::move(child))) continue;
      made++;
    }
    made = 0;
    while (made < want_mut && attempts++ < cap) {
      Architecture child = mutate(rand_parent(), space, cfg, rng);
      if (!acceptable(child) || !admit(std::move(child))) continue;
      made++;
    }
    while (static_cast<int>(next.size()) < cfg.population && attempts++ < cap) {
      Architecture fresh = sample_uniform(space, rng);
      if (!acceptable(fresh)) continue;
      admit(std::move(fresh));
    }
    for (int i = 0; static_cast<int>(next.size()) < cfg.population; i = (i + 1) % parents_n)
      next.push_back(parent_at(i));  // last resort: recycle parents
    pop = std::move(next);
  }
  return res;
}

}  // namespace s3
