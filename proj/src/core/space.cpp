#include "space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace s3 {

using nlohmann::json;

bool stage_level(DimensionKind k) {
  switch (k) {
    case DimensionKind::Depth:
    case DimensionKind::EmbedDim:
    case DimensionKind::MlpRatio:
      return true;
    default:
      return false;
  }
}

const char* kind_name(DimensionKind k) {
  switch (k) {
    case DimensionKind::Depth: return "depth";
    case DimensionKind::EmbedDim: return "embed_dim";
    case DimensionKind::MlpRatio: return "mlp_ratio";
    case DimensionKind::WindowSize: return "window_size";
    case DimensionKind::NumHeads: return "num_heads";
    case DimensionKind::QkvDim: return "qkv_dim";
  }
  return "?";
}

std::optional<DimensionKind> kind_from_name(std::string_view name) {
  for (int i = 0; i < kNumKinds; ++i) {
    auto k = static_cast<DimensionKind>(i);
    if (name == kind_name(k)) return k;
  }
  return std::nullopt;
}

std::string choice_to_string(double v) {
  double ip;
  if (std::modf(v, &ip) == 0.0) {
    return std::to_string(static_cast<long long>(ip));
  }
  if (std::modf(v * 2.0, &ip) == 0.0) {
    return std::to_string(static_cast<long long>(std::floor(v))) + ".5";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double Subspace::lower_bound() const {
  return kind == DimensionKind::Depth ? 1.0 : 0.0;
}

bool Subspace::contains(double v) const {
  return std::find(choices.begin(), choices.end(), v) != choices.end();
}

void Subspace::validate() const {
  if (stage < 1 || stage > kNumStages) throw ConfigError("subspace stage out of range");
  if (choices.empty()) throw ConfigError("empty choice set for " + std::string(kind_name(kind)));
  if (step <= 0) throw ConfigError("nonpositive step for " + std::string(kind_name(kind)));
  for (std::size_t i = 0; i < choices.size(); ++i) {
    double v = choices[i];
    if (kind == DimensionKind::Depth) {
      if (v < 1.0) throw ConfigError("depth choice < 1");
    } else if (v <= 0.0) {
      throw ConfigError(std::string(kind_name(kind)) + " choice <= 0");
    }
    if (kind != DimensionKind::MlpRatio && std::modf(v, &v) != 0.0)
      throw ConfigError(std::string(kind_name(kind)) + " choice not integral");
    if (i > 0 && choices[i] <= choices[i - 1])
      throw ConfigError(std::string(kind_name(kind)) + " choices not strictly ascending");
  }
}

const Subspace& SearchSpace::sub(DimensionKind k, int stage) const {
  for (const auto& s : subspaces)
    if (s.kind == k && s.stage == stage) return s;
  throw ConfigError("missing subspace " + std::string(kind_name(k)) + " stage " +
                    std::to_string(stage));
}

Subspace& SearchSpace::sub(DimensionKind k, int stage) {
  return const_cast<Subspace&>(static_cast<const SearchSpace*>(this)->sub(k, stage));
}

void SearchSpace::validate() const {
  if (subspaces.size() != kNumKinds * kNumStages)
    throw ConfigError("expected 24 subspaces, got " + std::to_string(subspaces.size()));
  for (int k = 0; k < kNumKinds; ++k)
    for (int s = 1; s <= kNumStages; ++s) sub(static_cast<DimensionKind>(k), s).validate();
}

std::string SearchSpace::to_json() const {
  json dims = json::object();
  for (int k = 0; k < kNumKinds; ++k) {
    auto kind = static_cast<DimensionKind>(k);
    json stages = json::array();
    for (int s = 1; s <= kNumStages; ++s) stages.push_back(sub(kind, s).choices);
    dims[kind_name(kind)] = {{"step", sub(kind, 1).step}, {"stages", stages}};
  }
  json doc = {{"stages", kNumStages}, {"dimensions", dims}};
  return doc.dump(2);
}

SearchSpace SearchSpace::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("space json: ") + e.what());
  }
  if (doc.value("stages", kNumStages) != kNumStages)
    throw ConfigError("space must have exactly 4 stages");
  if (!doc.contains("dimensions")) throw ConfigError("space json missing 'dimensions'");
  SearchSpace space;
  for (int k = 0; k < kNumKinds; ++k) {
    auto kind = static_cast<DimensionKind>(k);
    const char* name = kind_name(kind);
    if (!doc["dimensions"].contains(name))
      throw ConfigError("space json missing dimension '" + std::string(name) + "'");
    const json& d = doc["dimensions"][name];
    double step = d.value("step", 1.0);
    const json& stages = d.at("stages");
    if (!stages.is_array() || stages.size() != kNumStages)
      throw ConfigError("dimension '" + std::string(name) + "' needs 4 stage arrays");
    for (int s = 1; s <= kNumStages; ++s) {
      Subspace sub;
      sub.kind = kind;
      sub.stage = s;
      sub.step = step;
      for (const auto& v : stages[s - 1]) sub.choices.push_back(v.get<double>());
      space.subspaces.push_back(std::move(sub));
    }
  }
  space.validate();
  return space;
}

void Architecture::validate() const {
  if (stages.size() != kNumStages) throw InvalidArchitecture("expected 4 stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    std::string where = "stage " + std::to_string(i + 1);
    if (st.depth < 1) throw InvalidArchitecture(where + ": depth < 1");
    if (st.embed < 1) throw InvalidArchitecture(where + ": embed dim < 1");
    if (st.mlp <= 0) throw InvalidArchitecture(where + ": mlp ratio <= 0");
    if (static_cast<int>(st.blocks.size()) != st.depth)
      throw InvalidArchitecture(where + ": depth " + std::to_string(st.depth) + " != " +
                                std::to_string(st.blocks.size()) + " blocks");
    for (const auto& b : st.blocks) {
      if (b.window < 1 || b.heads < 1 || b.qkv < 1)
        throw InvalidArchitecture(where + ": nonpositive block dimension");
      if (b.qkv % b.heads != 0)
        throw InvalidArchitecture(where + ": qkv " + std::to_string(b.qkv) +
                                  " not divisible by heads " + std::to_string(b.heads));
    }
  }
}

void Architecture::validate_in(const SearchSpace& space) const {
  validate();
  for (int s = 1; s <= kNumStages; ++s) {
    const auto& st = stages[s - 1];
    std::string where = "stage " + std::to_string(s);
    if (!space.sub(DimensionKind::Depth, s).contains(st.depth))
      throw InvalidArchitecture(where + ": depth not in space");
    if (!space.sub(DimensionKind::EmbedDim, s).contains(st.embed))
      throw InvalidArchitecture(where + ": embed dim not in space");
    if (!space.sub(DimensionKind::MlpRatio, s).contains(st.mlp))
      throw InvalidArchitecture(where + ": mlp ratio not in space");
    for (const auto& b : st.blocks) {
      if (!space.sub(DimensionKind::WindowSize, s).contains(b.window))
        throw InvalidArchitecture(where + ": window not in space");
      if (!space.sub(DimensionKind::NumHeads, s).contains(b.heads))
        throw InvalidArchitecture(where + ": heads not in space");
      if (!space.sub(DimensionKind::QkvDim, s).contains(b.qkv))
        throw InvalidArchitecture(where + ": qkv not in space");
    }
  }
}

BigInt cardinality(const SearchSpace& space) {
  space.validate();
  BigInt total = 1;
  for (int s = 1; s <= kNumStages; ++s) {
    BigInt per_block = BigInt(space.sub(DimensionKind::WindowSize, s).choices.size()) *
                       BigInt(space.sub(DimensionKind::NumHeads, s).choices.size()) *
                       BigInt(space.sub(DimensionKind::QkvDim, s).choices.size());
    BigInt depth_sum = 0;
    for (double d : space.sub(DimensionKind::Depth, s).choices)
      depth_sum += boost::multiprecision::pow(per_block, static_cast<unsigned>(d));
    total *= BigInt(space.sub(DimensionKind::EmbedDim, s).choices.size()) *
             BigInt(space.sub(DimensionKind::MlpRatio, s).choices.size()) * depth_sum;
  }
  return total;
}

namespace {

double pick(const std::vector<double>& choices, std::mt19937_64& rng) {
  if (choices.size() == 1) return choices[0];
  std::uniform_int_distribution<std::size_t> dist(0, choices.size() - 1);
  return choices[dist(rng)];
}

}  // namespace

Architecture sample_uniform(const SearchSpace& space, std::mt19937_64& rng, int max_attempts) {
  space.validate();
  Architecture arch;
  for (int s = 1; s <= kNumStages; ++s) {
    StageChoice st;
    st.depth = static_cast<int>(pick(space.sub(DimensionKind::Depth, s).choices, rng));
    st.embed = static_cast<int>(pick(space.sub(DimensionKind::EmbedDim, s).choices, rng));
    st.mlp = pick(space.sub(DimensionKind::MlpRatio, s).choices, rng);
    for (int j = 0; j < st.depth; ++j) {
      BlockChoice b;
      int attempt = 0;
      for (;; ++attempt) {
        if (attempt >= max_attempts)
          throw SamplingExhausted("no divisible (heads, qkv) pair found in stage " +
                                  std::to_string(s) + " after " + std::to_string(max_attempts) +
                                  " attempts");
        b.window = static_cast<int>(pick(space.sub(DimensionKind::WindowSize, s).choices, rng));
        b.heads = static_cast<int>(pick(space.sub(DimensionKind::NumHeads, s).choices, rng));
        b.qkv = static_cast<int>(pick(space.sub(DimensionKind::QkvDim, s).choices, rng));
        if (b.qkv % b.heads == 0) break;
      }
      st.blocks.push_back(b);
    }
    arch.stages.push_back(std::move(st));
  }
  arch.validate();
  return arch;
}

// Encoding is mechanical: it requires structural consistency (4 stages,
// depth == block count) but does not enforce divisibility, so raw Cartesian
// assignments can be enumerated and encoded for counting.
std::string encode(const Architecture& arch) {
  if (arch.stages.size() != kNumStages) throw InvalidArchitecture("expected 4 stages");
  for (const auto& st : arch.stages)
    if (static_cast<int>(st.blocks.size()) != st.depth)
      throw InvalidArchitecture("depth does not match block count");
  std::ostringstream out;
  for (std::size_t i = 0; i < arch.stages.size(); ++i) {
    const auto& st = arch.stages[i];
    if (i > 0) out << '/';
    out << 'd' << st.depth << ":e" << st.embed << ":m" << choice_to_string(st.mlp) << ':';
    for (std::size_t j = 0; j < st.blocks.size(); ++j) {
      const auto& b = st.blocks[j];
      if (j > 0) out << ',';
      out << 'w' << b.window << 'n' << b.heads << 'q' << b.qkv;
    }
  }
  return out.str();
}

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  char peek() const { return pos < text.size() ? text[pos] : '\0'; }
  void expect(char c) {
    if (peek() != c)
      throw ParseError(pos, std::string("expected '") + c + "', got '" + peek() + "'");
    ++pos;
  }
  long long integer() {
    std::size_t start = pos;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
    if (pos == start) throw ParseError(pos, "expected digit");
    return std::stoll(text.substr(start, pos - start));
  }
  double number() {
    std::size_t start = pos;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
    if (pos == start) throw ParseError(pos, "expected digit");
    if (peek() == '.') {
      ++pos;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos;
    }
    return std::stod(text.substr(start, pos - start));
  }
};

}  // namespace

Architecture decode(const std::string& text) {
  Cursor c{text};
  Architecture arch;
  for (int s = 0; s < kNumStages; ++s) {
    if (s > 0) c.expect('/');
    StageChoice st;
    c.expect('d');
    st.depth = static_cast<int>(c.integer());
    c.expect(':');
    c.expect('e');
    st.embed = static_cast<int>(c.integer());
    c.expect(':');
    c.expect('m');
    st.mlp = c.number();
    c.expect(':');
    for (int j = 0;; ++j) {
      if (j > 0) {
        if (c.peek() != ',') break;
        ++c.pos;
      }
      BlockChoice b;
      c.expect('w');
      b.window = static_cast<int>(c.integer());
      c.expect('n');
      b.heads = static_cast<int>(c.integer());
      c.expect('q');
      b.qkv = static_cast<int>(c.integer());
      st.blocks.push_back(b);
    }
    if (static_cast<int>(st.blocks.size()) != st.depth)
      throw ParseError(c.pos, "declared depth " + std::to_string(st.depth) + " but found " +
                                  std::to_string(st.blocks.size()) + " blocks");
    arch.stages.push_back(std::move(st));
  }
  if (c.pos != text.size()) throw ParseError(c.pos, "trailing characters");
  for (const auto& st : arch.stages) {
    if (st.depth < 1 || st.embed < 1 || st.mlp <= 0)
      throw ParseError(c.pos, "nonpositive stage dimension");
    for (const auto& b : st.blocks)
      if (b.window < 1 || b.heads < 1 || b.qkv < 1)
        throw ParseError(c.pos, "nonpositive block dimension");
  }
  return arch;
}

namespace {

void enumerate_stage(const SearchSpace& space, int s, std::vector<StageChoice>& out) {
  const auto& depths = space.sub(DimensionKind::Depth, s).choices;
  const auto& embeds = space.sub(DimensionKind::EmbedDim, s).choices;
  const auto& mlps = space.sub(DimensionKind::MlpRatio, s).choices;
  const auto& ws = space.sub(DimensionKind::WindowSize, s).choices;
  const auto& ns = space.sub(DimensionKind::NumHeads, s).choices;
  const auto& qs = space.sub(DimensionKind::QkvDim, s).choices;

  std::vector<BlockChoice> block_opts;
  for (double w : ws)
    for (double n : ns)
      for (double q : qs)
        block_opts.push_back({static_cast<int>(w), static_cast<int>(n), static_cast<int>(q)});

  for (double dd : depths) {
    int d = static_cast<int>(dd);
    std::vector<std::size_t> odo(d, 0);
    for (;;) {
      for (double e : embeds)
        for (double m : mlps) {
          StageChoice st;
          st.depth = d;
          st.embed = static_cast<int>(e);
          st.mlp = m;
          for (int j = 0; j < d; ++j) st.blocks.push_back(block_opts[odo[j]]);
          out.push_back(std::move(st));
        }
      int j = d - 1;
      while (j >= 0 && ++odo[j] == block_opts.size()) odo[j--] = 0;
      if (j < 0) break;
    }
  }
}

}  // namespace

std::vector<Architecture> enumerate_all(const SearchSpace& space, std::uint64_t limit) {
  BigInt card = cardinality(space);
  if (card > BigInt(limit))
    throw ConfigError("space too large to enumerate: " + card.str());

  std::vector<std::vector<StageChoice>> per_stage(kNumStages);
  for (int s = 1; s <= kNumStages; ++s) enumerate_stage(space, s, per_stage[s - 1]);

  std::vector<Architecture> result;
  std::vector<std::size_t> odo(kNumStages, 0);
  for (;;) {
    Architecture arch;
    for (int s = 0; s < kNumStages; ++s) arch.stages.push_back(per_stage[s][odo[s]]);
    result.push_back(std::move(arch));
    int s = kNumStages - 1;
    while (s >= 0 && ++odo[s] == per_stage[s].size()) odo[s--] = 0;
    if (s < 0) break;
  }
  return result;
}

std::map<double, std::vector<double>> partition_by_choice(
    const std::vector<std::pair<Architecture, double>>& samples, DimensionKind kind, int stage) {
  std::map<double, std::vector<double>> groups;
  for (const auto& [arch, err] : samples) {
    const auto& st = arch.stages.at(stage - 1);
    if (stage_level(kind)) {
      double v = kind == DimensionKind::Depth    ? st.depth
                 : kind == DimensionKind::EmbedDim ? st.embed
                                                   : st.mlp;
      groups[v].push_back(err);
    } else {
      std::vector<double> seen;
      for (const auto& b : st.blocks) {
        double v = kind == DimensionKind::WindowSize ? b.window
                   : kind == DimensionKind::NumHeads ? b.heads
                                                     : b.qkv;
        if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
          seen.push_back(v);
          groups[v].push_back(err);
        }
      }
    }
  }
  return groups;
}

}  // namespace s3
