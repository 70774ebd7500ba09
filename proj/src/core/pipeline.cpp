#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evaluator.hpp"

namespace s3 {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

std::pair<Dataset, Dataset> make_data(const RunConfig& cfg) {
  return generate_synthetic(derive_seed(cfg.seed, "data"), cfg.dataset);
}

std::unique_ptr<PerformanceOracle> make_oracle(const RunConfig& cfg, const Dataset& train,
                                               const Dataset& val) {
  if (cfg.oracle.kind == OracleKind::Tabular)
    return std::make_unique<TabularOracle>(cfg.oracle.tabular);
  return std::make_unique<SupernetOracle>(cfg.shape, train, val, cfg.train, cfg.oracle.finetune);
}

void update_manifest(const RunConfig& cfg, const std::string& command,
                     std::vector<std::string> outputs) {
  const fs::path path = fs::path(cfg.out_dir) / "manifest.json";
  json m;
  if (fs::exists(path)) {
    try {
      m = json::parse(read_file(path));
    } catch (const json::exception&) {
      m = json::object();  // unreadable manifests are rebuilt
    }
  }
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  m["format"] = 1;
  m["seed"] = cfg.seed;
  std::sort(outputs.begin(), outputs.end());
  m["commands"][command] = {{"config_hash", hash}, {"outputs", outputs}};
  write_file(path, m.dump(2) + "\n");
}

Supernet load_trained(const RunConfig& cfg) {
  const fs::path ck = fs::path(cfg.out_dir) / "supernet.ckpt";
  if (!fs::exists(ck))
    throw IoError("missing " + ck.string() + " (run the train command first)");
  Supernet net(cfg.space, cfg.shape, derive_seed(cfg.seed, "supernet.init"));
  net.load(ck.string());
  return net;
}

Architecture named_arch(const RunConfig& cfg, const std::string& name) {
  if (name == "max") return maximal_arch(cfg.space);
  if (name == "min") return minimal_arch(cfg.space);
  return decode(name);
}

void cmd_gen_data(const RunConfig& cfg) {
  auto [train, val] = make_data(cfg);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "data");
  save_flat(train, (out / "data/train.bin").string());
  save_flat(val, (out / "data/val.bin").string());
  update_manifest(cfg, "gen-data", {"data/train.bin", "data/val.bin"});
}

void cmd_train(const RunConfig& cfg) {
  auto [train, val] = make_data(cfg);
  Supernet net(cfg.space, cfg.shape, derive_seed(cfg.seed, "supernet.init"));
  train_supernet(net, cfg.space, train, cfg.train, derive_seed(cfg.seed, "supernet.train"));
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  net.save((out / "supernet.ckpt").string());
  json summary = {{"error_max_arch", net.evaluate(maximal_arch(cfg.space), val)},
                  {"error_min_arch", net.evaluate(minimal_arch(cfg.space), val)},
                  {"steps", cfg.train.steps}};
  write_file(out / "train_summary.json", summary.dump(2) + "\n");
  update_manifest(cfg, "train", {"supernet.ckpt", "train_summary.json"});
}

void cmd_evolve_space(const RunConfig& cfg) {
  auto [train, val] = make_data(cfg);
  auto oracle = make_oracle(cfg, train, val);
  auto hist = evolve_space(cfg.space, *oracle, cfg.shape, cfg.budget, cfg.evolution,
                           derive_seed(cfg.seed, "evolve"));
  write_file(fs::path(cfg.out_dir) / "space_history.json", hist.to_json() + "\n");
  update_manifest(cfg, "evolve-space", {"space_history.json"});
}

std::vector<SearchSpace> spaces_to_search(const RunConfig& cfg) {
  const fs::path hp = fs::path(cfg.out_dir) / "space_history.json";
  if (!fs::exists(hp)) return {cfg.space};
  json h;
  try {
    h = json::parse(read_file(hp));
  } catch (const json::exception& e) {
    throw FormatError("space_history.json: " + std::string(e.what()));
  }
  std::vector<SearchSpace> spaces;
  for (const json& it : h.at("iterations")) spaces.push_back(SearchSpace::from_json(it.at("space").dump()));
  if (spaces.empty()) throw FormatError("space_history.json holds no iterations");
  return spaces;
}

void cmd_search(const RunConfig& cfg) {
  auto spaces = spaces_to_search(cfg);
  auto [train, val] = make_data(cfg);
  auto oracle = make_oracle(cfg, train, val);
  const fs::path out(cfg.out_dir);
  std::vector<std::string> outputs = {"search/best.csv"};
  std::string best = "iteration,encoding,error,params,macs\n";
  for (std::size_t t = 0; t < spaces.size(); ++t) {
    const std::string tag = std::to_string(t);
    oracle->prepare(spaces[t], derive_seed(cfg.seed, "search.prepare." + tag));
    auto res = evolutionary_search(spaces[t], *oracle, cfg.shape, cfg.search,
                                   derive_seed(cfg.seed, "search." + tag));
    const std::string log_name = "search/log_" + tag + ".csv";
    write_file(out / log_name, res.log_csv());
    outputs.push_back(log_name);
    best += tag + ",\"" + encode(res.best) + "\"," + fmt(res.best_error) + "," +
            std::to_string(param_count(res.best, cfg.shape)) + "," +
            std::to_string(flop_count(res.best, cfg.shape)) + "\n";
  }
  write_file(out / "search/best.csv", best);
  update_manifest(cfg, "search", std::move(outputs));
}

void cmd_eval(const RunConfig& cfg) {
  auto net = load_trained(cfg);
  auto [train, val] = make_data(cfg);
  std::vector<Architecture> archs;
  for (const auto& enc : cfg.eval.archs) archs.push_back(decode(enc));
  if (cfg.eval.samples > 0) {
    auto sampled = sample_constrained(cfg.space, cfg.shape, cfg.budget, cfg.eval.samples,
                                      derive_seed(cfg.seed, "eval.sample"));
    archs.insert(archs.end(), sampled.begin(), sampled.end());
  }
  std::vector<std::pair<std::string, const Architecture*>> order;
  for (const auto& a : archs) order.emplace_back(encode(a), &a);
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end(),
                          [](const auto& x, const auto& y) { return x.first == y.first; }),
              order.end());
  std::string csv = "encoding,params,macs,error\n";
  for (const auto& [enc, a] : order)
    csv += "\"" + enc + "\"," + std::to_string(param_count(*a, cfg.shape)) + "," +
           std::to_string(flop_count(*a, cfg.shape)) + "," + fmt(net.evaluate(*a, val)) + "\n";
  write_file(fs::path(cfg.out_dir) / "eval.csv", csv);
  update_manifest(cfg, "eval", {"eval.csv"});
}

void cmd_ablate_inherit(const RunConfig& cfg) {
  auto net = load_trained(cfg);
  auto [train, val] = make_data(cfg);
  auto archs = sample_constrained(cfg.space, cfg.shape, cfg.budget, cfg.ablation.archs,
                                  derive_seed(cfg.seed, "ablation.sample"));
  struct Row {
    std::string enc;
    double inherited;
    double retrained;
  };
  std::vector<Row> rows;
  for (const auto& a : archs) {
    Row row;
    row.enc = encode(a);
    row.inherited = net.evaluate(a, val);
    row.retrained = retrain_standalone(a, cfg.shape, train, val, cfg.train,
                                       derive_seed(cfg.seed, "ablation.retrain." + row.enc))
                        .second;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.enc < b.enc; });
  std::string csv = "encoding,inherited,retrained\n";
  std::vector<double> inh, ret;
  double mad = 0;
  for (const Row& r : rows) {
    csv += "\"" + r.enc + "\"," + fmt(r.inherited) + "," + fmt(r.retrained) + "\n";
    inh.push_back(r.inherited);
    ret.push_back(r.retrained);
    mad += std::abs(r.inherited - r.retrained);
  }
  mad /= static_cast<double>(rows.size());
  json summary = {{"archs", rows.size()},
                  {"mean_abs_diff", mad},
                  {"spearman", spearman(inh, ret)}};
  const fs::path out(cfg.out_dir);
  write_file(out / "ablation.csv", csv);
  write_file(out / "ablation_summary.json", summary.dump(2) + "\n");
  update_manifest(cfg, "ablate-inherit", {"ablation.csv", "ablation_summary.json"});
}

void cmd_analyze_attention(const RunConfig& cfg) {
  auto net = load_trained(cfg);
  auto [train, val] = make_data(cfg);
  const int batch = std::min(cfg.attention.batch, val.n);
  std::vector<int> idx(static_cast<std::size_t>(batch));
  std::iota(idx.begin(), idx.end(), 0);
  auto [images, labels] = make_batch(val, idx);
  const Architecture arch = named_arch(cfg, cfg.attention.arch);
  arch.validate_in(cfg.space);
  auto stats = attention_stats(net, arch, images, cfg.attention.top_k);
  std::string csv = "stage,block,window,mean,median\n";
  for (const auto& row : stats) {
    const int window =
        arch.stages[static_cast<std::size_t>(row.stage - 1)].blocks[static_cast<std::size_t>(row.block)].window;
    csv += std::to_string(row.stage) + "," + std::to_string(row.block) + "," +
           std::to_string(window) + "," + fmt(row.mean) + "," + fmt(row.median) + "\n";
  }
  write_file(fs::path(cfg.out_dir) / "attention.csv", csv);
  update_manifest(cfg, "analyze-attention", {"attention.csv"});
}

void cmd_report(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  const fs::path hp = out / "space_history.json";
  if (!fs::exists(hp))
    throw IoError("missing " + hp.string() + " (run the evolve-space command first)");
  json h;
  try {
    h = json::parse(read_file(hp));
  } catch (const json::exception& e) {
    throw FormatError("space_history.json: " + std::string(e.what()));
  }

  std::string edf_csv = "iteration,error,fraction\n";
  std::string traj_csv = "iteration,kind,stage,min,max,count\n";
  std::string stage_csv = "iteration,kind,stage,choice,count,mean_error,top_tier_error\n";
  std::string stage_edf_csv = "iteration,kind,stage,choice,error,fraction\n";

  const json& iterations = h.at("iterations");
  for (std::size_t t = 0; t < iterations.size(); ++t) {
    const std::string tag = std::to_string(t);
    const json& rec = iterations[t];
    std::vector<std::pair<Architecture, double>> samples;
    std::vector<double> errors;
    for (const json& row : rec.at("report").at("samples")) {
      samples.emplace_back(decode(row.at("arch").get<std::string>()),
                           row.at("error").get<double>());
      errors.push_back(samples.back().second);
    }
    for (const auto& [e, f] : edf(errors)) edf_csv += tag + "," + fmt(e) + "," + fmt(f) + "\n";

    const SearchSpace space = SearchSpace::from_json(rec.at("space").dump());
    for (int k = 0; k < kNumKinds; ++k) {
      const auto kind = static_cast<DimensionKind>(k);
      for (int s = 1; s <= kNumStages; ++s) {
        const Subspace& sub = space.sub(kind, s);
        traj_csv += tag + "," + std::string(kind_name(kind)) + "," + std::to_string(s) + "," +
                    choice_to_string(sub.min_choice()) + "," + choice_to_string(sub.max_choice()) +
                    "," + std::to_string(sub.choices.size()) + "\n";
        for (auto& [choice, errs] : partition_by_choice(samples, kind, s)) {
          const std::string prefix = tag + "," + std::string(kind_name(kind)) + "," +
                                     std::to_string(s) + "," + choice_to_string(choice);
          double mean = 0;
          for (double e : errs) mean += e;
          mean /= static_cast<double>(errs.size());
          std::vector<double> sorted = errs;
          std::sort(sorted.begin(), sorted.end());
          const int k_top = default_top_k(static_cast<int>(sorted.size()));
          double tier = 0;
          for (int i = 0; i < k_top; ++i) tier += sorted[static_cast<std::size_t>(i)];
          tier /= k_top;
          stage_csv += prefix + "," + std::to_string(errs.size()) + "," + fmt(mean) + "," +
                       fmt(tier) + "\n";
          for (const auto& [e, f] : edf(errs))
            stage_edf_csv += prefix + "," + fmt(e) + "," + fmt(f) + "\n";
        }
      }
    }
  }

  // searched best per iteration, when the search command has run
  std::map<std::string, std::pair<std::string, std::string>> searched;  // t -> (enc, err)
  const fs::path bp = out / "search/best.csv";
  if (fs::exists(bp)) {
    std::stringstream in(read_file(bp));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      // iteration,"encoding",error,params,macs
      const auto c1 = line.find(',');
      const auto q1 = line.find('"', c1);
      const auto q2 = q1 == std::string::npos ? q1 : line.find('"', q1 + 1);
      if (c1 == std::string::npos || q2 == std::string::npos) continue;
      const auto c2 = line.find(',', q2);
      const auto c3 = c2 == std::string::npos ? c2 : line.find(',', c2 + 1);
      if (c3 == std::string::npos) continue;
      searched[line.substr(0, c1)] = {line.substr(q1, q2 - q1 + 1),
                                      line.substr(c2 + 1, c3 - c2 - 1)};
    }
  }
  std::string cmp_csv = "iteration,q_e,q_t,q,searched_encoding,searched_error\n";
  for (std::size_t t = 0; t < iterations.size(); ++t) {
    const std::string tag = std::to_string(t);
    const json& rep = iterations[t].at("report");
    cmp_csv += tag + "," + fmt(rep.at("q_e").get<double>()) + "," +
               fmt(rep.at("q_t").get<double>()) + "," + fmt(rep.at("q").get<double>()) + ",";
    auto it = searched.find(tag);
    cmp_csv += it == searched.end() ? "," : it->second.first + "," + it->second.second;
    cmp_csv += "\n";
  }

  write_file(out / "report/edf_spaces.csv", edf_csv);
  write_file(out / "report/dimension_trajectories.csv", traj_csv);
  write_file(out / "report/stage_stats.csv", stage_csv);
  write_file(out / "report/stage_edf.csv", stage_edf_csv);
  write_file(out / "report/comparison.csv", cmp_csv);
  update_manifest(cfg, "report",
                  {"report/edf_spaces.csv", "report/dimension_trajectories.csv",
                   "report/stage_stats.csv", "report/stage_edf.csv", "report/comparison.csv"});
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-data", "train",          "evolve-space",
                                                 "search",   "eval",           "ablate-inherit",
                                                 "analyze-attention", "report"};
  return names;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw ConfigError("spearman needs two equal-length nonempty samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
    sab += (ra[i] - ma) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;  // a constant sample carries no ranking
  return sab / std::sqrt(saa * sbb);
}

void run_command(const RunConfig& cfg, const std::string& command) {
  cfg.validate();
  if (command == "gen-data") return cmd_gen_data(cfg);
  if (command == "train") return cmd_train(cfg);
  if (command == "evolve-space") return cmd_evolve_space(cfg);
  if (command == "search") return cmd_search(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "ablate-inherit") return cmd_ablate_inherit(cfg);
  if (command == "analyze-attention") return cmd_analyze_attention(cfg);
  if (command == "report") return cmd_report(cfg);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace s3
