// condgen: learn and evaluate generative models of conditional distributions.
//
// Subcommands: synth, train, generate, eval, sweep. Every run writes a
// manifest.json into its output directory; reruns with identical manifest
// inputs reproduce the primary outputs byte for byte.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "condgen/cond_cdf.hpp"
#include "condgen/dataset.hpp"
#include "condgen/errors.hpp"
#include "condgen/metrics.hpp"
#include "condgen/mlp.hpp"
#include "condgen/pair_graph.hpp"
#include "condgen/synthetic.hpp"
#include "condgen/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace condgen;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// exit codes, also listed in the README
enum ExitCode {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kIo = 5,
  kNumeric = 6,
};

std::atomic<bool> g_interrupted{false};

void handle_interrupt(int) { g_interrupted.store(true); }

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string fingerprint_dir(const fs::path& dir) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char* name : {"train.csv", "val.csv", "test.csv", "data.csv", "oracle.json"}) {
    const fs::path p = dir / name;
    if (fs::exists(p)) {
      hash = fnv1a64(name, hash);
      hash = fnv1a64(read_file(p), hash);
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

fs::path resolve_out_dir(std::string out, const std::string& command) {
  if (out.empty()) {
    const char* root = std::getenv("CONDGEN_OUT_ROOT");
    out = root != nullptr ? (fs::path(root) / command).string() : command + "_out";
  }
  fs::create_directories(out);
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot open for write " + path.string());
  os << j.dump(2) << '\n';
}

void write_manifest(const fs::path& out_dir, const std::string& command, json inputs,
                    json config, std::vector<std::string> outputs,
                    const std::string& fingerprint = "") {
  json m;
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  if (!fingerprint.empty()) m["dataset_fingerprint"] = fingerprint;
  write_json(out_dir / "manifest.json", m);
}

TrainConfig load_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// Loads a data directory: either pre-split train/val/test CSVs or a single
// data.csv that is frequency-split here. The train normalizer is shared.
SplitResult load_data_dir(const fs::path& dir, const std::string& response) {
  SplitResult r;
  if (fs::exists(dir / "train.csv")) {
    r.train = load_csv(dir / "train.csv", response);
    auto load_part = [&](const char* name) {
      Dataset part;
      if (fs::exists(dir / name)) {
        part = load_csv(dir / name, response);
        if (part.dim != r.train.dim) {
          throw LoadError(std::string(name) + ": covariate dimension differs from train.csv");
        }
      } else {
        part.dim = r.train.dim;
        part.covariate_names = r.train.covariate_names;
        part.response_name = r.train.response_name;
      }
      part.normalizer = r.train.normalizer;
      return part;
    };
    r.val = load_part("val.csv");
    r.test = load_part("test.csv");
    return r;
  }
  if (fs::exists(dir / "data.csv")) {
    return split(load_csv(dir / "data.csv", response), SplitSpec{});
  }
  throw LoadError("data dir " + dir.string() + ": expected train.csv or data.csv");
}

std::optional<SyntheticFamily> load_oracle(const fs::path& dir) {
  const fs::path p = dir / "oracle.json";
  if (!fs::exists(p)) return std::nullopt;
  return family_from_json(json::parse(read_file(p)));
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("covariate: '" + cell + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("covariate: empty vector");
  return out;
}

void write_history_csv(const fs::path& path, const std::vector<HistoryRow>& history) {
  std::ofstream os(path);
  os << "iteration,fit,reg,loss\n";
  char buf[40];
  for (const auto& row : history) {
    os << row.iteration;
    for (double v : {row.fit, row.reg, row.loss}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string family = "heteroscedastic-sine";
  int n = 2000;
  int min_count = 1, max_count = 1;
  int val_n = 200, test_n = 200;
  int val_count = 200, test_count = 200;
  int dim = 0;  // 0 keeps the family default
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticFamily family = SyntheticFamily::defaults(family_from_string(a.family), a.seed);
  if (a.dim > 0) family.params["dim"] = a.dim;
  family.validate();

  const fs::path out = resolve_out_dir(a.out, "synth");
  const Dataset train = synth_generate(family, a.n, {a.min_count, a.max_count}, 0);
  const Dataset val = synth_generate(family, a.val_n, {a.val_count, a.val_count}, 1);
  const Dataset test = synth_generate(family, a.test_n, {a.test_count, a.test_count}, 2);
  save_csv(train, out / "train.csv");
  save_csv(val, out / "val.csv");
  save_csv(test, out / "test.csv");
  write_json(out / "oracle.json", family_to_json(family));

  write_manifest(out, "synth", json{{"family", a.family}},
                 json{{"family", a.family},
                      {"n", a.n},
                      {"min_count", a.min_count},
                      {"max_count", a.max_count},
                      {"val_n", a.val_n},
                      {"test_n", a.test_n},
                      {"val_count", a.val_count},
                      {"test_count", a.test_count},
                      {"dim", a.dim},
                      {"seed", a.seed}},
                 {"train.csv", "val.csv", "test.csv", "oracle.json"}, fingerprint_dir(out));
  std::cout << "synth: wrote " << train.groups.size() << " train / " << val.groups.size()
            << " val / " << test.groups.size() << " test covariates to " << out << "\n";
  return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  std::string out;
  std::string response = "y";
  std::string ablation;  // "", "no-reg", "no-smooth"
  bool dump_pairs = false;
  std::optional<long> iterations;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig config = load_config(a.config_path);
  if (a.iterations.has_value()) config.iterations = *a.iterations;
  if (a.seed.has_value()) config.seed = *a.seed;
  if (a.ablation == "no-reg") {
    config.lambda = 0.0;
  } else if (a.ablation == "no-smooth") {
    config.r1 = 0.0;
    config.r2 = 0.0;
  } else if (!a.ablation.empty()) {
    throw ConfigError("--ablation: expected 'no-reg' or 'no-smooth'");
  }
  config.validate();

  const SplitResult data = load_data_dir(a.data_dir, a.response);
  const fs::path out = resolve_out_dir(a.out, "train");

  std::vector<std::string> outputs = {"checkpoint.bin", "history.csv"};
  if (a.dump_pairs) {
    Trainer trainer(data.train, config);
    write_json(out / "pair_set.json", pair_set_to_json(trainer.pair_set()));
    outputs.push_back("pair_set.json");
  }

  std::signal(SIGINT, handle_interrupt);
  const TrainResult result = train(data.train, config, &g_interrupted);
  std::signal(SIGINT, SIG_DFL);

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.normalizer = data.train.normalizer;
  ckpt.state = result.state;
  save_checkpoint(ckpt, out / "checkpoint.bin");
  write_history_csv(out / "history.csv", result.history);

  write_manifest(out, "train", json{{"data_dir", a.data_dir}, {"ablation", a.ablation}},
                 config_to_json(config), outputs, fingerprint_dir(a.data_dir));
  if (g_interrupted.load()) {
    std::cout << "train: interrupted at iteration " << result.state.iteration
              << ", checkpoint written to " << out << "\n";
  } else {
    std::cout << "train: finished " << result.state.iteration << " iterations, checkpoint in "
              << out << "\n";
  }
  return kOk;
}

// --- generate ----------------------------------------------------------------

struct GenerateArgs {
  std::string checkpoint;
  std::string covariate;       // comma-separated vector
  std::string covariate_file;  // CSV of covariates (covariate columns only)
  int k = 10000;
  std::string mode = "iid-uniform";
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  if (a.k < 1) throw ConfigError("--k: must be >= 1");
  GenMode mode;
  if (a.mode == "iid-uniform") {
    mode = GenMode::IidUniform;
  } else if (a.mode == "grid") {
    mode = GenMode::Grid;
  } else {
    throw ConfigError("--mode: expected 'iid-uniform' or 'grid'");
  }
  const int dim = static_cast<int>(ckpt.normalizer.mean.size());

  std::vector<std::vector<double>> covariates;
  if (!a.covariate.empty()) {
    covariates.push_back(parse_vector(a.covariate));
  } else if (!a.covariate_file.empty()) {
    std::ifstream is(a.covariate_file);
    if (!is) throw LoadError("cannot open " + a.covariate_file);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) covariates.push_back(parse_vector(line));
    }
    if (covariates.empty()) throw LoadError(a.covariate_file + ": no covariate rows");
  } else {
    throw ConfigError("generate: pass --x or --covariates");
  }
  for (const auto& x : covariates) {
    if (static_cast<int>(x.size()) != dim) {
      throw ConfigError("generate: covariate has dimension " + std::to_string(x.size()) +
                        ", checkpoint expects " + std::to_string(dim));
    }
  }

  const fs::path out = resolve_out_dir(a.out, "generate");
  std::ofstream os(out / "samples.csv");
  for (int c = 0; c < dim; ++c) os << 'x' << c << ',';
  os << "u,y\n";
  char buf[40];
  Rng rng(derive_seed(a.seed, 11));
  double monotone_sum = 0.0;
  std::vector<double> uniforms(static_cast<std::size_t>(a.k));
  for (const auto& x : covariates) {
    for (int i = 0; i < a.k; ++i) {
      uniforms[static_cast<std::size_t>(i)] =
          mode == GenMode::Grid
              ? (static_cast<double>(i) + 0.5) / static_cast<double>(a.k)
              : rng.uniform01();
    }
    const std::vector<double> xn = ckpt.normalizer.apply(x);
    const std::vector<double> samples = generate_samples_at(ckpt.state.theta, xn, uniforms);
    monotone_sum += monotone_fraction(samples);
    for (int i = 0; i < a.k; ++i) {
      for (double v : x) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf << ',';
      }
      std::snprintf(buf, sizeof(buf), "%.17g", uniforms[static_cast<std::size_t>(i)]);
      os << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", samples[static_cast<std::size_t>(i)]);
      os << buf << '\n';
    }
  }
  os.close();

  json info;
  info["k"] = a.k;
  info["mode"] = a.mode;
  info["covariates"] = covariates.size();
  if (mode == GenMode::Grid) {
    const double frac = monotone_sum / static_cast<double>(covariates.size());
    info["monotone_fraction"] = frac;
    std::cout << "generate: grid monotone fraction " << frac << "\n";
  }
  write_json(out / "gen_info.json", info);
  write_manifest(out, "generate",
                 json{{"checkpoint", a.checkpoint},
                      {"covariate", a.covariate},
                      {"covariate_file", a.covariate_file}},
                 json{{"k", a.k}, {"mode", a.mode}, {"seed", a.seed}},
                 {"samples.csv", "gen_info.json"});
  std::cout << "generate: wrote " << covariates.size() * static_cast<std::size_t>(a.k)
            << " samples to " << out << "\n";
  return kOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out;
  std::string response = "y";
  int k = 10000;
  int gt_samples = 10000;
  int min_count = 18;
  int density_points = 512;
  std::uint64_t seed = 1;
};

void write_density_dump(const fs::path& path, const EmpiricalSample& generated,
                        const EmpiricalSample& truth, double h, int points) {
  const ConditionalCdf gen_kde(generated.values(), h);
  const ConditionalCdf truth_kde(truth.values(), h);
  const double lo = std::min(generated.sorted().front(), truth.sorted().front()) - 3.0 * h;
  const double hi = std::max(generated.sorted().back(), truth.sorted().back()) + 3.0 * h;
  std::ofstream os(path);
  os << "y,generated,truth\n";
  char buf[40];
  for (int i = 0; i < points; ++i) {
    const double y = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    std::snprintf(buf, sizeof(buf), "%.17g", y);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", gen_kde.eval_derivative(y));
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", truth_kde.eval_derivative(y));
    os << buf << '\n';
  }
}

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const SplitResult data = load_data_dir(a.data_dir, a.response);
  if (data.test.groups.empty()) throw LoadError("eval: test split is empty");
  const std::optional<SyntheticFamily> oracle = load_oracle(a.data_dir);
  const fs::path out = resolve_out_dir(a.out, "eval");

  std::vector<std::vector<double>> covariates;
  std::vector<EmpiricalSample> generated, truth;
  Rng gen_rng(derive_seed(a.seed, 21));
  for (std::size_t i = 0; i < data.test.groups.size(); ++i) {
    const auto& g = data.test.groups[i];
    covariates.push_back(g.x);
    const std::vector<double> xn = ckpt.normalizer.apply(g.x);
    generated.emplace_back(
        generate_samples(ckpt.state.theta, xn, a.k, GenMode::IidUniform, gen_rng));
    if (oracle.has_value()) {
      Rng oracle_rng(derive_seed(a.seed, 5000 + i));
      truth.emplace_back(oracle->sample_many(g.x, a.gt_samples, oracle_rng));
    } else {
      truth.emplace_back(g.responses);
    }
  }
  const MetricReport report = build_report(covariates, generated, truth);
  write_json(out / "report.json", report_to_json(report));

  std::vector<std::string> outputs = {"report.json", "lipschitz_scatter.csv"};
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const std::string name = "density_" + std::to_string(i) + ".csv";
    write_density_dump(out / name, generated[i], truth[i], ckpt.config.h, a.density_points);
    outputs.push_back(name);
  }

  // scatter over every loaded group with enough responses
  Dataset all = data.train;
  for (const auto& g : data.val.groups) all.groups.push_back(g);
  for (const auto& g : data.test.groups) all.groups.push_back(g);
  const std::vector<ScatterPoint> scatter = lipschitz_scatter(all, a.min_count);
  {
    std::ofstream os(out / "lipschitz_scatter.csv");
    os << "i,j,distance,w2\n";
    char buf[40];
    for (const auto& p : scatter) {
      os << p.i << ',' << p.j << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", p.distance);
      os << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", p.w2);
      os << buf << '\n';
    }
  }

  write_manifest(out, "eval",
                 json{{"checkpoint", a.checkpoint}, {"data_dir", a.data_dir}},
                 json{{"k", a.k},
                      {"gt_samples", a.gt_samples},
                      {"seed", a.seed},
                      {"min_count", a.min_count}},
                 outputs, fingerprint_dir(a.data_dir));
  std::cout << "eval: mean W2^2 " << report.w2_squared_agg.mean << " (W2 "
            << report.w2_agg.mean << "), mean KS " << report.ks_agg.mean << ", report in "
            << out << "\n";
  return kOk;
}

// --- sweep -------------------------------------------------------------------

struct SweepArgs {
  std::string config_path;
  std::string data_dir;
  std::string grid_path;
  std::string out;
  std::string response = "y";
};

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const json& grid) {
  if (!grid.is_object() || grid.empty()) {
    throw ConfigError("grid: expected a JSON object of field -> value list");
  }
  std::vector<json> configs = {config_to_json(base)};
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (!it->is_array() || it->empty()) {
      throw ConfigError("grid." + it.key() + ": expected a nonempty array");
    }
    std::vector<json> next;
    for (const json& partial : configs) {
      for (const json& value : *it) {
        json extended = partial;
        extended[it.key()] = value;
        next.push_back(std::move(extended));
      }
    }
    configs = std::move(next);
  }
  std::vector<TrainConfig> out;
  out.reserve(configs.size());
  for (const json& j : configs) out.push_back(config_from_json(j));
  return out;
}

int cmd_sweep(const SweepArgs& a) {
  const TrainConfig base = load_config(a.config_path);
  json grid_spec;
  if (a.grid_path.empty()) {
    grid_spec = json{{"h", default_bandwidth_grid()}};  // bandwidth-only default grid
  } else {
    grid_spec = json::parse(read_file(a.grid_path));
  }
  const std::vector<TrainConfig> grid = expand_grid(base, grid_spec);
  const SplitResult data = load_data_dir(a.data_dir, a.response);
  const fs::path out = resolve_out_dir(a.out, "sweep");

  const SweepResult result = sweep(data.train, data.val, grid);

  write_json(out / "best_config.json", config_to_json(result.best));
  {
    std::ofstream os(out / "sweep.csv");
    os << "index,h,lambda,epsilon,r1,r2,score\n";
    char buf[40];
    for (std::size_t i = 0; i < result.table.size(); ++i) {
      const auto& row = result.table[i];
      os << i;
      for (double v :
           {row.config.h, row.config.lambda, row.config.epsilon, row.config.r1,
            row.config.r2, row.score}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ',' << buf;
      }
      os << '\n';
    }
  }
  write_manifest(out, "sweep", json{{"data_dir", a.data_dir}, {"grid", a.grid_path}},
                 config_to_json(base), {"best_config.json", "sweep.csv"},
                 fingerprint_dir(a.data_dir));
  std::cout << "sweep: best grid point " << result.best_index << " (score "
            << result.table[result.best_index].score << "), h " << result.best.h << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional distribution generator"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset with oracle");
  synth->add_option("--family", synth_args.family,
                    "location-scale-gaussian | two-component-mixture | heteroscedastic-sine");
  synth->add_option("--n", synth_args.n, "train covariates");
  synth->add_option("--min-count", synth_args.min_count, "min responses per train covariate");
  synth->add_option("--max-count", synth_args.max_count, "max responses per train covariate");
  synth->add_option("--val-n", synth_args.val_n, "validation covariates");
  synth->add_option("--test-n", synth_args.test_n, "test covariates");
  synth->add_option("--val-count", synth_args.val_count, "responses per validation covariate");
  synth->add_option("--test-count", synth_args.test_count, "responses per test covariate");
  synth->add_option("--dim", synth_args.dim, "covariate dimension override");
  synth->add_option("--seed", synth_args.seed, "family seed");
  synth->add_option("--out", synth_args.out, "output directory");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a generator checkpoint");
  train_cmd->add_option("--config", train_args.config_path, "config JSON");
  train_cmd->add_option("--data", train_args.data_dir, "data directory")->required();
  train_cmd->add_option("--out", train_args.out, "output directory");
  train_cmd->add_option("--response", train_args.response, "response column name");
  train_cmd->add_option("--ablation", train_args.ablation, "no-reg | no-smooth");
  train_cmd->add_flag("--dump-pairs", train_args.dump_pairs,
                      "write the oriented MST edge set as pair_set.json");
  long iterations_flag = -1;
  train_cmd->add_option("--iterations", iterations_flag, "override iteration count");
  std::int64_t seed_flag = -1;
  train_cmd->add_option("--seed", seed_flag, "override seed");

  GenerateArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand("generate", "sample from a checkpoint");
  gen_cmd->add_option("--checkpoint", gen_args.checkpoint, "checkpoint path")->required();
  gen_cmd->add_option("--x", gen_args.covariate, "covariate, comma-separated");
  gen_cmd->add_option("--covariates", gen_args.covariate_file, "covariate CSV");
  gen_cmd->add_option("--k", gen_args.k, "samples per covariate");
  gen_cmd->add_option("--mode", gen_args.mode, "iid-uniform | grid");
  gen_cmd->add_option("--seed", gen_args.seed, "sampling seed");
  gen_cmd->add_option("--out", gen_args.out, "output directory");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_args.data_dir, "data directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "output directory");
  eval_cmd->add_option("--response", eval_args.response, "response column name");
  eval_cmd->add_option("--k", eval_args.k, "generated samples per covariate");
  eval_cmd->add_option("--gt-samples", eval_args.gt_samples,
                       "oracle ground-truth samples per covariate");
  eval_cmd->add_option("--min-count", eval_args.min_count, "scatter count threshold");
  eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid-search hyperparameters");
  sweep_cmd->add_option("--config", sweep_args.config_path, "base config JSON");
  sweep_cmd->add_option("--data", sweep_args.data_dir, "data directory")->required();
  sweep_cmd->add_option("--grid", sweep_args.grid_path,
                        "grid JSON (default: the built-in bandwidth grid)");
  sweep_cmd->add_option("--out", sweep_args.out, "output directory");
  sweep_cmd->add_option("--response", sweep_args.response, "response column name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train_cmd->parsed()) {
      if (iterations_flag >= 0) train_args.iterations = iterations_flag;
      if (seed_flag >= 0) train_args.seed = static_cast<std::uint64_t>(seed_flag);
      return cmd_train(train_args);
    }
    if (gen_cmd->parsed()) return cmd_generate(gen_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const LoadError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ConvergenceError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
