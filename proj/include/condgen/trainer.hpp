#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "condgen/cond_cdf.hpp"
#include "condgen/dataset.hpp"
#include "condgen/eot.hpp"
#include "condgen/mlp.hpp"
#include "condgen/pair_graph.hpp"
#include "condgen/rng.hpp"
#include "condgen/vecops.hpp"

namespace condgen {

struct TrainConfig {
  double lambda = 0.4;   // regularizer weight, >= 0
  double epsilon = 1.0;  // entropic regularization, > 0
  double h = 0.3;        // KDE bandwidth, > 0
  double r1 = 3.0;       // descent smoothing weight, >= 0
  double r2 = 2.0;       // ascent smoothing weight, >= 0, r1 != r2 when both > 0
  double alpha = 0.001;  // generator learning rate
  double beta = 0.001;   // potential learning rate
  double gamma = 0.5;    // p averaging rate, in (0,1]
  double delta = 0.7;    // q averaging rate, in (0,1]
  int batch = 64;
  int mc = 32;
  long iterations = 20000;
  std::uint64_t seed = 1;
  int hidden_width = 64;
  int hidden_layers = 6;
  int record_every = 100;
  double sweep_fraction = 0.1;  // share of iterations used per sweep grid point
  int sweep_samples = 2048;     // generated samples per validation covariate

  void validate() const;  // throws ConfigError naming the offending field
};

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);  // unknown fields rejected

struct TrainState {
  MlpNet theta;            // generator T
  MlpNet phi;              // potential v
  std::vector<double> p;   // descent anchor, theta-shaped
  std::vector<double> q;   // ascent anchor, phi-shaped
  long iteration = 0;
  Rng rng;
};

struct LossParts {
  double fit = 0.0;
  double reg = 0.0;
  double loss = 0.0;
};

struct HistoryRow {
  long iteration = 0;
  double fit = 0.0, reg = 0.0, loss = 0.0;
};

// One batch of training nodes with the uniforms shared by the fitness and
// regularizer estimates. u_mc rows align with nodes; rows of nodes without an
// outgoing pair-set edge are drawn but unused.
struct TrainBatch {
  std::vector<int> nodes;
  std::vector<double> u_fit;
  std::vector<std::vector<double>> u_mc;
};

struct DsgdaRates {
  double alpha = 0.001, beta = 0.001, gamma = 0.5, delta = 0.7;
};

// The doubly-smoothed GDA update, shared by the trainer and by toy problems
// wired through the same path:
//   theta <- theta - alpha * grad_theta(theta, phi, p, q)
//   phi   <- phi   + beta  * grad_phi(theta_new, phi, p, q)
//   p     <- p + gamma * (theta_new - p)
//   q     <- q + delta * (phi_new   - q)
// Gradient callbacks receive the current iterates and must include any
// smoothing terms; grad_phi is the gradient of the full objective (ascent).
template <class GradTheta, class GradPhi>
void dsgda_update(std::vector<double>& theta, std::vector<double>& phi,
                  std::vector<double>& p, std::vector<double>& q, const DsgdaRates& rates,
                  GradTheta&& grad_theta, GradPhi&& grad_phi) {
  const std::vector<double> gt = grad_theta(theta, phi, p, q);
  axpy(-rates.alpha, gt, theta);
  const std::vector<double> gp = grad_phi(theta, phi, p, q);
  axpy(rates.beta, gp, phi);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] += rates.gamma * (theta[k] - p[k]);
  for (std::size_t k = 0; k < q.size(); ++k) q[k] += rates.delta * (phi[k] - q[k]);
}

// Binds one training split: conditional CDF table, pair set over the
// normalized covariates, batch sampling, loss assembly and the DS-GDA step.
// One Trainer instance drives one training run.
class Trainer {
 public:
  Trainer(Dataset train, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  const DirectedPairSet& pair_set() const { return pairs_; }
  const std::vector<std::vector<double>>& normalized_covariates() const { return xs_; }
  const std::vector<ConditionalCdf>& cdf_table() const { return cdfs_; }

  TrainState init_state() const;
  TrainBatch draw_batch(TrainState& state);

  // (1/B) sum_b [u_b - F(T(x_b, u_b))]^2 on the KDE-smoothed conditional
  // CDFs; accumulates the exact theta gradient when the span is nonempty.
  double fit_estimate(const MlpNet& theta, const TrainBatch& batch,
                      std::span<double> theta_grad) const;

  // Full smoothed objective: fit + lambda*reg + (r1/2)|theta-p|^2 -
  // (r2/2)|phi-q|^2. Either gradient span may be empty to skip that side.
  LossParts loss_estimate(const MlpNet& theta, const MlpNet& phi,
                          std::span<const double> p, std::span<const double> q,
                          const TrainBatch& batch, std::span<double> theta_grad,
                          std::span<double> phi_grad) const;

  // One DS-GDA step on a fresh batch (or a supplied one). Returns the loss
  // parts measured at the pre-update iterates. Throws on non-finite
  // gradients.
  LossParts dsgda_step(TrainState& state);
  LossParts dsgda_step_with_batch(TrainState& state, const TrainBatch& batch) const;

 private:
  Dataset data_;
  TrainConfig config_;
  std::vector<std::vector<double>> xs_;  // normalized covariates per group
  std::vector<ConditionalCdf> cdfs_;
  DirectedPairSet pairs_;
  std::vector<int> parent_;
  int batch_size_ = 0;  // config batch clamped to the number of groups
  std::vector<int> queue_;
  std::size_t queue_pos_ = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<HistoryRow> history;
};

// Runs `config.iterations` DS-GDA steps; deterministic given (dataset,
// config). A nonnull `stop` flag ends the loop early at the next step edge.
TrainResult train(const Dataset& train_split, const TrainConfig& config,
                  const std::atomic<bool>* stop = nullptr);

enum class GenMode { IidUniform, Grid };

// K samples of T(x, U): U iid uniform, or the deterministic grid
// U_k = (k - 0.5) / K.
std::vector<double> generate_samples(const MlpNet& theta,
                                     std::span<const double> x_normalized, int k,
                                     GenMode mode, Rng& rng);

// Evaluates T(x, u) at caller-supplied uniforms.
std::vector<double> generate_samples_at(const MlpNet& theta,
                                        std::span<const double> x_normalized,
                                        std::span<const double> uniforms);

// Fraction of adjacent non-inverted pairs of grid-mode output (the
// monotonicity diagnostic).
double monotone_fraction(std::span<const double> grid_samples);

// Mean over validation groups of W2^2 between generated samples and the
// observed responses.
double mean_validation_w2sq(const MlpNet& theta, const Dataset& val, int samples_per_group,
                            std::uint64_t seed);

struct SweepRow {
  TrainConfig config;
  double score = 0.0;  // mean validation W2^2
};

struct SweepResult {
  std::size_t best_index = 0;
  TrainConfig best;
  std::vector<SweepRow> table;
};

// Trains one short-budget model per grid point (iterations scaled by
// sweep_fraction) and selects the argmin of mean validation W2^2; ties keep
// the first grid point.
SweepResult sweep(const Dataset& train_split, const Dataset& val_split,
                  const std::vector<TrainConfig>& grid);

// Versioned train checkpoint: config snapshot, normalizer, both nets, p, q,
// iteration counter and RNG state (layout in docs/checkpoint_format.md).
struct Checkpoint {
  TrainConfig config;
  Normalizer normalizer;
  TrainState state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace condgen
