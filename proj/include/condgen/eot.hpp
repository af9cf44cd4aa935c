#pragma once

#include <span>
#include <vector>

#include "condgen/mlp.hpp"
#include "condgen/pair_graph.hpp"

namespace condgen {

struct EotConfig {
  double epsilon = 1.0;  // > 0
  int mc_samples = 32;   // M >= 1

  void validate() const;
};

// Smoothed c-transform against an M-sample Monte-Carlo estimate of the
// pushforward measure:
//   -eps * log( (1/M) sum_m exp( (v_values[m] - (y - samples[m])^2) / eps ) )
// computed with max-shift stabilization. v_values[m] is the potential at
// samples[m].
double c_transform(std::span<const double> v_values, std::span<const double> samples,
                   double y, double eps);

struct DiscreteMeasure {
  std::vector<double> atoms;
  std::vector<double> weights;  // nonnegative, sums to 1 within 1e-12

  static DiscreteMeasure uniform(std::vector<double> atoms);
  void validate() const;
};

struct SinkhornResult {
  double primal = 0.0;         // sum c*pi + eps * KL(pi || mu (x) nu)
  std::vector<double> u, v;    // dual potentials on mu's and nu's atoms
  std::vector<double> coupling;  // row-major |mu| x |nu|, marginals rounded
  int iterations = 0;
  double residual = 0.0;       // final L1 marginal violation
};

// Log-domain Sinkhorn for the entropic OT problem with squared-difference
// cost and KL(pi || mu (x) nu) regularization. Throws ConvergenceError with
// the residual when max_iter is exhausted.
SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps,
                        int max_iter = 10000, double tol = 1e-9);

// Semi-dual objective for a potential given on nu's atoms:
//   sum_i mu_i v^eps(a_i) + sum_j nu_j v_j,
// with v^eps(a) = -eps log sum_j nu_j exp((v_j - (a - b_j)^2)/eps).
// Equals the Sinkhorn primal at the optimal potential; never exceeds it.
double semidual_value(std::span<const double> v_on_nu, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu, double eps);

// One batch of oriented pairs plus the uniform draws shared by the fitness
// and regularizer estimates (one row per pair, M columns).
struct PairBatch {
  std::vector<std::pair<int, int>> pairs;       // (tail i, head j) group indices
  std::vector<std::vector<double>> uniforms;    // pairs.size() rows of M draws in (0,1)
};

// Monte-Carlo estimate of the pairwise semi-dual EOT regularizer
//
//   (1/(M*B)) sum_{b,m} [ v^eps(x_i_b, T(x_j_b, U_bm)) + v(x_i_b, T(x_i_b, U_bm)) ]
//
// where the c-transform integrates over the same M pushforward samples at
// x_i_b (sample reuse). Gradients flow through every occurrence of the
// generator (both pushforward arguments and the samples inside the
// c-transform) and of the potential; they are accumulated into theta_grad /
// phi_grad when those spans are nonempty. normalization B defaults to the
// number of pairs; the trainer passes its node-batch size instead so that
// batch nodes without an outgoing edge still count in the average.
// Every pair must be an edge of `pairs_contract` (ContractViolation otherwise).
double regularizer_estimate(const MlpNet& generator, const MlpNet& potential,
                            const std::vector<std::vector<double>>& covariates,
                            const PairBatch& batch, const DirectedPairSet& pairs_contract,
                            double eps, std::span<double> theta_grad,
                            std::span<double> phi_grad, int normalization_count = -1);

}  // namespace condgen
