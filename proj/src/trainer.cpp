#include "condgen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "condgen/errors.hpp"
#include "condgen/metrics.hpp"

#include "binary_io.hpp"

namespace condgen {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("config.lambda: must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("config.epsilon: must be > 0");
  if (!(h > 0.0)) throw ConfigError("config.h: must be > 0");
  if (r1 < 0.0) throw ConfigError("config.r1: must be >= 0");
  if (r2 < 0.0) throw ConfigError("config.r2: must be >= 0");
  if (r1 > 0.0 && r2 > 0.0 && r1 == r2) {
    throw ConfigError("config.r1/r2: smoothing weights must differ when both nonzero");
  }
  if (!(alpha > 0.0)) throw ConfigError("config.alpha: must be > 0");
  if (!(beta > 0.0)) throw ConfigError("config.beta: must be > 0");
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("config.gamma: must be in (0,1]");
  if (!(delta > 0.0) || delta > 1.0) throw ConfigError("config.delta: must be in (0,1]");
  if (batch < 1) throw ConfigError("config.batch: must be >= 1");
  if (mc < 1) throw ConfigError("config.mc: must be >= 1");
  if (iterations < 0) throw ConfigError("config.iterations: must be >= 0");
  if (hidden_width < 1) throw ConfigError("config.hidden_width: must be >= 1");
  if (hidden_layers < 1) throw ConfigError("config.hidden_layers: must be >= 1");
  if (record_every < 1) throw ConfigError("config.record_every: must be >= 1");
  if (!(sweep_fraction > 0.0) || sweep_fraction > 1.0) {
    throw ConfigError("config.sweep_fraction: must be in (0,1]");
  }
  if (sweep_samples < 1) throw ConfigError("config.sweep_samples: must be >= 1");
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"lambda", c.lambda},
                        {"epsilon", c.epsilon},
                        {"h", c.h},
                        {"r1", c.r1},
                        {"r2", c.r2},
                        {"alpha", c.alpha},
                        {"beta", c.beta},
                        {"gamma", c.gamma},
                        {"delta", c.delta},
                        {"batch", c.batch},
                        {"mc", c.mc},
                        {"iterations", c.iterations},
                        {"seed", c.seed},
                        {"hidden_width", c.hidden_width},
                        {"hidden_layers", c.hidden_layers},
                        {"record_every", c.record_every},
                        {"sweep_fraction", c.sweep_fraction},
                        {"sweep_samples", c.sweep_samples}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainConfig c;
  auto number = [&](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number()) {
      throw ConfigError(std::string("config.") + key + ": expected a number");
    }
    field = it->get<std::decay_t<decltype(field)>>();
  };
  number("lambda", c.lambda);
  number("epsilon", c.epsilon);
  number("h", c.h);
  number("r1", c.r1);
  number("r2", c.r2);
  number("alpha", c.alpha);
  number("beta", c.beta);
  number("gamma", c.gamma);
  number("delta", c.delta);
  number("batch", c.batch);
  number("mc", c.mc);
  number("iterations", c.iterations);
  number("seed", c.seed);
  number("hidden_width", c.hidden_width);
  number("hidden_layers", c.hidden_layers);
  number("record_every", c.record_every);
  number("sweep_fraction", c.sweep_fraction);
  number("sweep_samples", c.sweep_samples);
  static const char* known[] = {"lambda",       "epsilon",      "h",
                                "r1",           "r2",           "alpha",
                                "beta",         "gamma",        "delta",
                                "batch",        "mc",           "iterations",
                                "seed",         "hidden_width", "hidden_layers",
                                "record_every", "sweep_fraction", "sweep_samples"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config." + it.key() + ": unknown field");
  }
  c.validate();
  return c;
}

Trainer::Trainer(Dataset train, TrainConfig config)
    : data_(std::move(train)), config_(std::move(config)) {
  config_.validate();
  if (data_.groups.empty()) throw ConfigError("trainer: train split is empty");
  xs_ = data_.normalized_covariates();
  cdfs_.reserve(data_.groups.size());
  std::vector<int> counts;
  counts.reserve(data_.groups.size());
  for (const auto& g : data_.groups) {
    cdfs_.emplace_back(g.responses, config_.h);
    counts.push_back(g.count());
  }
  pairs_ = build_pair_set(xs_, choose_root(counts));
  parent_ = pairs_.parent_of();
  batch_size_ = std::min<int>(config_.batch, static_cast<int>(data_.groups.size()));
  queue_.resize(data_.groups.size());
  std::iota(queue_.begin(), queue_.end(), 0);
  queue_pos_ = queue_.size();  // force a shuffle on the first draw
}

TrainState Trainer::init_state() const {
  TrainState s;
  const int d = data_.dim;
  const MlpArch arch = default_arch(d + 1, config_.hidden_width, config_.hidden_layers);
  s.theta = make_net(arch, derive_seed(config_.seed, 1));
  s.phi = make_net(arch, derive_seed(config_.seed, 2));
  s.p = s.theta.params;
  s.q = s.phi.params;
  s.iteration = 0;
  s.rng = Rng(derive_seed(config_.seed, 3));
  return s;
}

TrainBatch Trainer::draw_batch(TrainState& state) {
  TrainBatch b;
  const std::size_t n = queue_.size();
  const std::size_t take = static_cast<std::size_t>(batch_size_);
  if (queue_pos_ + take > n) {
    state.rng.shuffle(queue_);
    queue_pos_ = 0;
  }
  b.nodes.assign(queue_.begin() + static_cast<std::ptrdiff_t>(queue_pos_),
                 queue_.begin() + static_cast<std::ptrdiff_t>(queue_pos_ + take));
  queue_pos_ += take;
  b.u_fit.resize(take);
  for (double& u : b.u_fit) u = state.rng.uniform01();
  b.u_mc.resize(take);
  for (auto& row : b.u_mc) {
    row.resize(static_cast<std::size_t>(config_.mc));
    for (double& u : row) u = state.rng.uniform01();
  }
  return b;
}

double Trainer::fit_estimate(const MlpNet& theta, const TrainBatch& batch,
                             std::span<double> theta_grad) const {
  if (batch.nodes.empty()) throw std::invalid_argument("fit_estimate: empty batch");
  if (batch.u_fit.size() != batch.nodes.size()) {
    throw std::invalid_argument("fit_estimate: uniforms do not align with nodes");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.nodes.size());
  MlpScratch scratch;
  std::vector<double> input(static_cast<std::size_t>(data_.dim) + 1);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.nodes.size(); ++b) {
    const int node = batch.nodes[b];
    if (node < 0 || node >= static_cast<int>(cdfs_.size())) {
      throw std::invalid_argument("fit_estimate: node " + std::to_string(node) +
                                  " has no conditional CDF entry");
    }
    const std::vector<double>& x = xs_[static_cast<std::size_t>(node)];
    std::copy(x.begin(), x.end(), input.begin());
    input.back() = batch.u_fit[b];
    const ConditionalCdf& cdf = cdfs_[static_cast<std::size_t>(node)];
    const double value = forward(theta, input, scratch);
    const double err = batch.u_fit[b] - cdf.eval(value);
    total += inv_b * err * err;
    if (!theta_grad.empty()) {
      const double upstream = -2.0 * inv_b * err * cdf.eval_derivative(value);
      backward_into(theta, input, upstream, scratch, theta_grad, {});
    }
  }
  return total;
}

LossParts Trainer::loss_estimate(const MlpNet& theta, const MlpNet& phi,
                                 std::span<const double> p, std::span<const double> q,
                                 const TrainBatch& batch, std::span<double> theta_grad,
                                 std::span<double> phi_grad) const {
  if (p.size() != theta.params.size() || q.size() != phi.params.size()) {
    throw std::invalid_argument("loss_estimate: anchor lengths do not match parameters");
  }
  LossParts parts;
  parts.fit = fit_estimate(theta, batch, theta_grad);

  if (config_.lambda != 0.0) {
    PairBatch pair_batch;
    for (std::size_t b = 0; b < batch.nodes.size(); ++b) {
      const int node = batch.nodes[b];
      const int head = parent_[static_cast<std::size_t>(node)];
      if (head >= 0) {
        pair_batch.pairs.emplace_back(node, head);
        pair_batch.uniforms.push_back(batch.u_mc[b]);
      }
    }
    if (!pair_batch.pairs.empty()) {
      std::vector<double> reg_tg(theta_grad.empty() ? 0 : theta.params.size(), 0.0);
      std::vector<double> reg_pg(phi_grad.empty() ? 0 : phi.params.size(), 0.0);
      parts.reg = regularizer_estimate(theta, phi, xs_, pair_batch, pairs_,
                                       config_.epsilon, reg_tg, reg_pg,
                                       static_cast<int>(batch.nodes.size()));
      if (!theta_grad.empty()) axpy(config_.lambda, reg_tg, theta_grad);
      if (!phi_grad.empty()) axpy(config_.lambda, reg_pg, phi_grad);
    }
  }

  double theta_anchor = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = theta.params[k] - p[k];
    theta_anchor += d * d;
    if (!theta_grad.empty()) theta_grad[k] += config_.r1 * d;
  }
  double phi_anchor = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double d = phi.params[k] - q[k];
    phi_anchor += d * d;
    if (!phi_grad.empty()) phi_grad[k] -= config_.r2 * d;
  }
  parts.loss = parts.fit + config_.lambda * parts.reg + 0.5 * config_.r1 * theta_anchor -
               0.5 * config_.r2 * phi_anchor;
  return parts;
}

LossParts Trainer::dsgda_step_with_batch(TrainState& state, const TrainBatch& batch) const {
  LossParts parts;
  const DsgdaRates rates{config_.alpha, config_.beta, config_.gamma, config_.delta};
  auto grad_theta = [&](const std::vector<double>&, const std::vector<double>&,
                        const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> grad(state.theta.params.size(), 0.0);
    parts = loss_estimate(state.theta, state.phi, p, q, batch, grad, {});
    if (!all_finite(grad)) {
      throw NumericError("dsgda: non-finite generator gradient at iteration " +
                         std::to_string(state.iteration));
    }
    return grad;
  };
  auto grad_phi = [&](const std::vector<double>&, const std::vector<double>&,
                      const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> grad(state.phi.params.size(), 0.0);
    loss_estimate(state.theta, state.phi, p, q, batch, {}, grad);
    if (!all_finite(grad)) {
      throw NumericError("dsgda: non-finite potential gradient at iteration " +
                         std::to_string(state.iteration));
    }
    return grad;
  };
  dsgda_update(state.theta.params, state.phi.params, state.p, state.q, rates, grad_theta,
               grad_phi);
  ++state.iteration;
  return parts;
}

LossParts Trainer::dsgda_step(TrainState& state) {
  const TrainBatch batch = draw_batch(state);
  return dsgda_step_with_batch(state, batch);
}

TrainResult train(const Dataset& train_split, const TrainConfig& config,
                  const std::atomic<bool>* stop) {
  Trainer trainer(train_split, config);
  TrainResult result;
  result.state = trainer.init_state();
  for (long it = 0; it < config.iterations; ++it) {
    if (stop != nullptr && stop->load()) break;
    const LossParts parts = trainer.dsgda_step(result.state);
    if (it % config.record_every == 0) {
      result.history.push_back({it, parts.fit, parts.reg, parts.loss});
    }
  }
  return result;
}

std::vector<double> generate_samples(const MlpNet& theta,
                                     std::span<const double> x_normalized, int k,
                                     GenMode mode, Rng& rng) {
  if (k < 1) throw std::invalid_argument("generate_samples: need K >= 1");
  std::vector<double> uniforms(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    uniforms[static_cast<std::size_t>(i)] =
        mode == GenMode::Grid ? (static_cast<double>(i) + 0.5) / static_cast<double>(k)
                              : rng.uniform01();
  }
  return generate_samples_at(theta, x_normalized, uniforms);
}

std::vector<double> generate_samples_at(const MlpNet& theta,
                                        std::span<const double> x_normalized,
                                        std::span<const double> uniforms) {
  if (uniforms.empty()) throw std::invalid_argument("generate_samples: need K >= 1");
  if (static_cast<int>(x_normalized.size()) + 1 != theta.arch.input_dim) {
    throw std::invalid_argument("generate_samples: covariate dimension mismatch");
  }
  MlpScratch scratch;
  std::vector<double> input(x_normalized.begin(), x_normalized.end());
  input.push_back(0.0);
  std::vector<double> out(uniforms.size());
  for (std::size_t i = 0; i < uniforms.size(); ++i) {
    input.back() = uniforms[i];
    out[i] = forward(theta, input, scratch);
  }
  return out;
}

double monotone_fraction(std::span<const double> grid_samples) {
  if (grid_samples.size() <= 1) return 1.0;
  std::size_t good = 0;
  for (std::size_t i = 0; i + 1 < grid_samples.size(); ++i) {
    if (grid_samples[i + 1] >= grid_samples[i]) ++good;
  }
  return static_cast<double>(good) / static_cast<double>(grid_samples.size() - 1);
}

double mean_validation_w2sq(const MlpNet& theta, const Dataset& val, int samples_per_group,
                            std::uint64_t seed) {
  if (val.groups.empty()) throw ConfigError("validation split is empty");
  Rng rng(derive_seed(seed, 101));
  double total = 0.0;
  for (const auto& g : val.groups) {
    const std::vector<double> x = val.normalizer.apply(g.x);
    const std::vector<double> gen =
        generate_samples(theta, x, samples_per_group, GenMode::IidUniform, rng);
    total += w2_squared(EmpiricalSample(gen), EmpiricalSample(g.responses));
  }
  return total / static_cast<double>(val.groups.size());
}

SweepResult sweep(const Dataset& train_split, const Dataset& val_split,
                  const std::vector<TrainConfig>& grid) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  if (val_split.groups.empty()) throw ConfigError("sweep: validation split is empty");
  SweepResult result;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    TrainConfig short_config = grid[i];
    short_config.validate();
    short_config.iterations = std::max<long>(
        1, static_cast<long>(static_cast<double>(grid[i].iterations) *
                             grid[i].sweep_fraction));
    const TrainResult run = train(train_split, short_config);
    const double score = mean_validation_w2sq(run.state.theta, val_split,
                                              grid[i].sweep_samples, grid[i].seed);
    result.table.push_back({grid[i], score});
    if (score < best_score) {
      best_score = score;
      result.best_index = i;
    }
  }
  result.best = grid[result.best_index];
  return result;
}

// --- checkpoint io ---------------------------------------------------------

namespace {

using namespace condgen::io;

constexpr char kTrainMagic[8] = {'C', 'G', 'N', 'T', 'R', 'A', 'I', 'N'};
constexpr std::uint32_t kTrainVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("checkpoint: cannot open for write " + path.string());
  os.write(kTrainMagic, sizeof(kTrainMagic));
  put_u32(os, kTrainVersion);
  put_bytes(os, config_to_json(ckpt.config).dump());
  put_u32(os, static_cast<std::uint32_t>(ckpt.normalizer.mean.size()));
  for (double v : ckpt.normalizer.mean) put_f64(os, v);
  for (double v : ckpt.normalizer.stddev) put_f64(os, v);
  write_net(os, ckpt.state.theta);
  write_net(os, ckpt.state.phi);
  put_u64(os, ckpt.state.p.size());
  for (double v : ckpt.state.p) put_f64(os, v);
  put_u64(os, ckpt.state.q.size());
  for (double v : ckpt.state.q) put_f64(os, v);
  put_u64(os, static_cast<std::uint64_t>(ckpt.state.iteration));
  put_bytes(os, ckpt.state.rng.save_state());
  if (!os) throw LoadError("checkpoint: write failed " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kTrainMagic, sizeof(magic)) != 0) {
    throw LoadError("checkpoint: bad train magic in " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kTrainVersion) {
    throw LoadError("checkpoint: unsupported train version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config = config_from_json(nlohmann::json::parse(get_bytes(is)));
  const std::uint32_t dim = get_u32(is);
  ckpt.normalizer.mean.resize(dim);
  ckpt.normalizer.stddev.resize(dim);
  for (double& v : ckpt.normalizer.mean) v = get_f64(is);
  for (double& v : ckpt.normalizer.stddev) v = get_f64(is);
  ckpt.state.theta = read_net(is);
  ckpt.state.phi = read_net(is);
  ckpt.state.p.resize(get_u64(is));
  for (double& v : ckpt.state.p) v = get_f64(is);
  ckpt.state.q.resize(get_u64(is));
  for (double& v : ckpt.state.q) v = get_f64(is);
  ckpt.state.iteration = static_cast<long>(get_u64(is));
  ckpt.state.rng.load_state(get_bytes(is));
  if (ckpt.state.p.size() != ckpt.state.theta.params.size() ||
      ckpt.state.q.size() != ckpt.state.phi.params.size()) {
    throw LoadError("checkpoint: anchor lengths do not match network parameters");
  }
  return ckpt;
}

}  // namespace condgen
