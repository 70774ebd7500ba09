#include "config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace s3 {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  throw ConfigError("config field '" + path + "': " + why);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad_field(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad_field(path.empty() ? key : path + "." + key, "unknown field");
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad_field(path.empty() ? key : path + "." + std::string(key), e.what());
  }
}

const char* mode_name(ShiftMode m) { return m == ShiftMode::Floor ? "floor" : "symmetric"; }

ShiftMode mode_from(const std::string& name, const std::string& path) {
  if (name == "floor") return ShiftMode::Floor;
  if (name == "symmetric") return ShiftMode::Symmetric;
  bad_field(path, "expected 'floor' or 'symmetric'");
}

const char* oracle_name(OracleKind k) { return k == OracleKind::Supernet ? "supernet" : "tabular"; }

OracleKind oracle_from(const std::string& name, const std::string& path) {
  if (name == "supernet") return OracleKind::Supernet;
  if (name == "tabular") return OracleKind::Tabular;
  bad_field(path, "expected 'supernet' or 'tabular'");
}

json budget_json(const ResourceBudget& b) {
  json j;
  j["max_params"] = b.max_params ? json(*b.max_params) : json(nullptr);
  j["max_flops"] = b.max_flops ? json(*b.max_flops) : json(nullptr);
  return j;
}

void budget_from(const json& j, const std::string& path, ResourceBudget& out) {
  check_keys(j, path, {"max_params", "max_flops"});
  auto side = [&](const char* key, std::optional<std::int64_t>& slot) {
    if (!j.contains(key) || j.at(key).is_null()) {
      slot.reset();
      return;
    }
    if (!j.at(key).is_number_integer()) bad_field(path + "." + key, "expected an integer or null");
    slot = j.at(key).get<std::int64_t>();
    if (*slot <= 0) bad_field(path + "." + key, "must be positive");
  };
  side("max_params", out.max_params);
  side("max_flops", out.max_flops);
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.dataset.classes = 16;     // pi/16 orientation spacing keeps classes close
  cfg.dataset.noise_sigma = 1.0f;  // heavy pixel noise: capacity matters
  cfg.shape.classes = 16;
  for (int k = 0; k < kNumKinds; ++k) {
    auto kind = static_cast<DimensionKind>(k);
    for (int s = 1; s <= kNumStages; ++s) {
      Subspace sub;
      sub.kind = kind;
      sub.stage = s;
      switch (kind) {
        case DimensionKind::Depth: sub.choices = {1, 2}; break;
        case DimensionKind::EmbedDim: sub.choices = {8, 16}; sub.step = 8; break;
        case DimensionKind::MlpRatio: sub.choices = {1, 2}; sub.step = 0.5; break;
        case DimensionKind::WindowSize: sub.choices = s == 4 ? std::vector<double>{1, 2}
                                                             : std::vector<double>{2, 4}; break;
        case DimensionKind::NumHeads: sub.choices = {1, 2}; break;
        case DimensionKind::QkvDim: sub.choices = {8, 16}; sub.step = 8; break;
      }
      cfg.space.subspaces.push_back(std::move(sub));
    }
  }
  cfg.evolution.gamma = {1.0, 8.0, 0.5, 1.0, 1.0, 8.0};  // steps scaled to the toy space
  return cfg;
}

void RunConfig::validate() const {
  if (out_dir.empty()) bad_field("out_dir", "must not be empty");
  if (workers < 1) bad_field("workers", "must be >= 1");
  shape.validate();
  space.validate();
  try {
    evolution.validate();
  } catch (const ConfigError& e) {
    bad_field("evolution", e.what());
  }
  try {
    search.validate();
  } catch (const ConfigError& e) {
    bad_field("search", e.what());
  }
  if (dataset.side != shape.side) bad_field("dataset.side", "must equal shape.side");
  if (dataset.channels != shape.channels) bad_field("dataset.channels", "must equal shape.channels");
  if (dataset.classes != shape.classes) bad_field("dataset.classes", "must equal shape.classes");
  if (dataset.n_train < 1 || dataset.n_val < 1) bad_field("dataset", "split sizes must be >= 1");
  if (dataset.noise_sigma < 0) bad_field("dataset.noise_sigma", "must be >= 0");
  if (train.steps < 1 || train.batch < 1) bad_field("train", "steps and batch must be >= 1");
  if (!(train.lr > 0) || train.min_lr < 0) bad_field("train.lr", "must be positive");
  if (eval.samples < 0) bad_field("eval.samples", "must be >= 0");
  for (const auto& enc : eval.archs) {
    try {
      decode(enc).validate_in(space);
    } catch (const Error& e) {
      bad_field("eval.archs", std::string(e.what()) + " in '" + enc + "'");
    }
  }
  if (attention.top_k < 1) bad_field("attention.top_k", "must be >= 1");
  if (attention.batch < 1) bad_field("attention.batch", "must be >= 1");
  if (attention.arch != "max" && attention.arch != "min") {
    try {
      decode(attention.arch).validate_in(space);
    } catch (const Error& e) {
      bad_field("attention.arch", e.what());
    }
  }
  if (ablation.archs < 1) bad_field("ablation.archs", "must be >= 1");
  for (const auto& term : oracle.tabular.terms)
    if (term.stage < 1 || term.stage > kNumStages)
      bad_field("oracle.tabular.terms", "stage out of range");
}

std::string RunConfig::to_json() const {
  json j;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["workers"] = workers;
  j["dataset"] = {{"n_train", dataset.n_train}, {"n_val", dataset.n_val},
                  {"side", dataset.side},       {"channels", dataset.channels},
                  {"classes", dataset.classes}, {"noise_sigma", dataset.noise_sigma}};
  j["shape"] = {{"side", shape.side}, {"channels", shape.channels},
                {"patch", shape.patch}, {"classes", shape.classes}};
  j["space"] = json::parse(space.to_json());
  j["budget"] = budget_json(budget);
  j["train"] = {{"steps", train.steps}, {"batch", train.batch}, {"lr", train.lr},
                {"min_lr", train.min_lr}, {"weight_decay", train.weight_decay}};
  json gamma;
  for (int k = 0; k < kNumKinds; ++k)
    gamma[kind_name(static_cast<DimensionKind>(k))] = evolution.gamma[static_cast<std::size_t>(k)];
  j["evolution"] = {{"iterations", evolution.iterations}, {"tau", evolution.tau},
                    {"gamma", gamma},                     {"samples", evolution.samples},
                    {"top_k", evolution.top_k},           {"mode", mode_name(evolution.mode)}};
  j["search"] = {{"population", search.population}, {"generations", search.generations},
                 {"parents", search.parents},       {"p_depth", search.p_depth},
                 {"p_embed", search.p_embed},       {"p_mut", search.p_mut}};
  json terms = json::array();
  for (const auto& t : oracle.tabular.terms)
    terms.push_back({{"kind", kind_name(t.kind)}, {"stage", t.stage}, {"coeff", t.coeff}});
  j["oracle"] = {{"kind", oracle_name(oracle.kind)},
                 {"finetune", oracle.finetune},
                 {"tabular", {{"base", oracle.tabular.base}, {"eta", oracle.tabular.eta},
                              {"terms", terms}}}};
  j["eval"] = {{"samples", eval.samples}, {"archs", eval.archs}};
  j["attention"] = {{"top_k", attention.top_k}, {"batch", attention.batch},
                    {"arch", attention.arch}};
  j["ablation"] = {{"archs", ablation.archs}};
  return j.dump(2);
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_json()); }

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  check_keys(j, "", {"out_dir", "seed", "workers", "dataset", "shape", "space", "budget", "train",
                     "evolution", "search", "oracle", "eval", "attention", "ablation"});
  RunConfig cfg = default_config();
  read(j, "", "out_dir", cfg.out_dir);
  read(j, "", "seed", cfg.seed);
  read(j, "", "workers", cfg.workers);
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "dataset", {"n_train", "n_val", "side", "channels", "classes", "noise_sigma"});
    read(d, "dataset", "n_train", cfg.dataset.n_train);
    read(d, "dataset", "n_val", cfg.dataset.n_val);
    read(d, "dataset", "side", cfg.dataset.side);
    read(d, "dataset", "channels", cfg.dataset.channels);
    read(d, "dataset", "classes", cfg.dataset.classes);
    read(d, "dataset", "noise_sigma", cfg.dataset.noise_sigma);
  }
  if (j.contains("shape")) {
    const json& s = j["shape"];
    check_keys(s, "shape", {"side", "channels", "patch", "classes"});
    read(s, "shape", "side", cfg.shape.side);
    read(s, "shape", "channels", cfg.shape.channels);
    read(s, "shape", "patch", cfg.shape.patch);
    read(s, "shape", "classes", cfg.shape.classes);
  }
  if (j.contains("space")) {
    try {
      cfg.space = SearchSpace::from_json(j["space"].dump());
    } catch (const ConfigError& e) {
      bad_field("space", e.what());
    }
  }
  if (j.contains("budget")) budget_from(j["budget"], "budget", cfg.budget);
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train", {"steps", "batch", "lr", "min_lr", "weight_decay"});
    read(t, "train", "steps", cfg.train.steps);
    read(t, "train", "batch", cfg.train.batch);
    read(t, "train", "lr", cfg.train.lr);
    read(t, "train", "min_lr", cfg.train.min_lr);
    read(t, "train", "weight_decay", cfg.train.weight_decay);
  }
  if (j.contains("evolution")) {
    const json& e = j["evolution"];
    check_keys(e, "evolution", {"iterations", "tau", "gamma", "samples", "top_k", "mode"});
    read(e, "evolution", "iterations", cfg.evolution.iterations);
    read(e, "evolution", "tau", cfg.evolution.tau);
    read(e, "evolution", "samples", cfg.evolution.samples);
    read(e, "evolution", "top_k", cfg.evolution.top_k);
    if (e.contains("mode")) cfg.evolution.mode = mode_from(e["mode"], "evolution.mode");
    if (e.contains("gamma")) {
      const json& g = e["gamma"];
      check_keys(g, "evolution.gamma",
                 {"depth", "embed_dim", "mlp_ratio", "window_size", "num_heads", "qkv_dim"});
      for (int k = 0; k < kNumKinds; ++k)
        read(g, "evolution.gamma", kind_name(static_cast<DimensionKind>(k)),
             cfg.evolution.gamma[static_cast<std::size_t>(k)]);
    }
  }
  if (j.contains("search")) {
    const json& s = j["search"];
    check_keys(s, "search", {"population", "generations", "parents", "p_depth", "p_embed", "p_mut"});
    read(s, "search", "population", cfg.search.population);
    read(s, "search", "generations", cfg.search.generations);
    read(s, "search", "parents", cfg.search.parents);
    read(s, "search", "p_depth", cfg.search.p_depth);
    read(s, "search", "p_embed", cfg.search.p_embed);
    read(s, "search", "p_mut", cfg.search.p_mut);
  }
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    check_keys(o, "oracle", {"kind", "finetune", "tabular"});
    if (o.contains("kind")) cfg.oracle.kind = oracle_from(o["kind"], "oracle.kind");
    read(o, "oracle", "finetune", cfg.oracle.finetune);
    if (o.contains("tabular")) {
      const json& t = o["tabular"];
      check_keys(t, "oracle.tabular", {"base", "eta", "terms"});
      read(t, "oracle.tabular", "base", cfg.oracle.tabular.base);
      read(t, "oracle.tabular", "eta", cfg.oracle.tabular.eta);
      if (t.contains("terms")) {
        cfg.oracle.tabular.terms.clear();
        for (const json& row : t["terms"]) {
          check_keys(row, "oracle.tabular.terms", {"kind", "stage", "coeff"});
          TabularTerm term;
          auto kind = kind_from_name(row.value("kind", ""));
          if (!kind) bad_field("oracle.tabular.terms.kind", "unknown dimension");
          term.kind = *kind;
          read(row, "oracle.tabular.terms", "stage", term.stage);
          read(row, "oracle.tabular.terms", "coeff", term.coeff);
          cfg.oracle.tabular.terms.push_back(term);
        }
      }
    }
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, "eval", {"samples", "archs"});
    read(e, "eval", "samples", cfg.eval.samples);
    read(e, "eval", "archs", cfg.eval.archs);
  }
  if (j.contains("attention")) {
    const json& a = j["attention"];
    check_keys(a, "attention", {"top_k", "batch", "arch"});
    read(a, "attention", "top_k", cfg.attention.top_k);
    read(a, "attention", "batch", cfg.attention.batch);
    read(a, "attention", "arch", cfg.attention.arch);
  }
  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    check_keys(a, "ablation", {"archs"});
    read(a, "ablation", "archs", cfg.ablation.archs);
  }
  cfg.search.budget = cfg.budget;
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like path.to.field=value: '" + ov + "'");
    std::string ptr = "/" + ov.substr(0, eq);
    for (auto& c : ptr)
      if (c == '.') c = '/';
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // unquoted strings are taken literally
    }
    try {
      doc[json::json_pointer(ptr)] = value;
    } catch (const json::exception& e) {
      throw ConfigError("override '" + ov + "': " + e.what());
    }
  }
  return from_json(doc.dump());
}

}  // namespace s3
