#include "condgen/eot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "condgen/errors.hpp"
#include "condgen/vecops.hpp"

namespace condgen {

void EotConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("eot: epsilon must be positive");
  if (mc_samples < 1) throw ConfigError("eot: mc_samples must be >= 1");
}

namespace {

double log_sum_exp(std::span<const double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;  // all -inf
  double s = 0.0;
  for (double v : values) s += std::exp(v - hi);
  return hi + std::log(s);
}

}  // namespace

double c_transform(std::span<const double> v_values, std::span<const double> samples,
                   double y, double eps) {
  check_same_length(v_values, samples, "c_transform");
  if (samples.empty()) throw std::invalid_argument("c_transform: empty sample list");
  const std::size_t m = samples.size();
  std::vector<double> exponents(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double d = y - samples[k];
    exponents[k] = (v_values[k] - d * d) / eps;
  }
  return -eps * (log_sum_exp(exponents) - std::log(static_cast<double>(m)));
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<double> atoms) {
  DiscreteMeasure m;
  const double w = 1.0 / static_cast<double>(atoms.size());
  m.weights.assign(atoms.size(), w);
  m.atoms = std::move(atoms);
  return m;
}

void DiscreteMeasure::validate() const {
  if (atoms.empty()) throw std::invalid_argument("DiscreteMeasure: empty support");
  if (atoms.size() != weights.size()) {
    throw std::invalid_argument("DiscreteMeasure: atom/weight length mismatch");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("DiscreteMeasure: weights must be nonnegative");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(sum));
  }
  for (double a : atoms) {
    if (!std::isfinite(a)) throw std::invalid_argument("DiscreteMeasure: non-finite atom");
  }
}

SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps,
                        int max_iter, double tol) {
  mu.validate();
  nu.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
  const std::size_t n = mu.atoms.size();
  const std::size_t m = nu.atoms.size();

  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = mu.atoms[i] - nu.atoms[j];
      cost[i * m + j] = d * d;
    }
  }
  std::vector<double> log_mu(n), log_nu(m);
  for (std::size_t i = 0; i < n; ++i) log_mu[i] = std::log(mu.weights[i]);
  for (std::size_t j = 0; j < m; ++j) log_nu[j] = std::log(nu.weights[j]);

  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> buf(std::max(n, m));
  std::vector<double> pi(n * m);
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;

  auto compute_plan_and_residual = [&]() {
    residual = 0.0;
    std::vector<double> col(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double p =
            std::exp(log_mu[i] + log_nu[j] + (f[i] + g[j] - cost[i * m + j]) / eps);
        pi[i * m + j] = p;
        row += p;
        col[j] += p;
      }
      residual += std::abs(row - mu.weights[i]);
    }
    for (std::size_t j = 0; j < m; ++j) residual += std::abs(col[j] - nu.weights[j]);
  };

  for (iter = 0; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        buf[j] = log_nu[j] + (g[j] - cost[i * m + j]) / eps;
      }
      f[i] = -eps * log_sum_exp(std::span<const double>(buf.data(), m));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        buf[i] = log_mu[i] + (f[i] - cost[i * m + j]) / eps;
      }
      g[j] = -eps * log_sum_exp(std::span<const double>(buf.data(), n));
    }
    compute_plan_and_residual();
    if (residual < tol) break;
  }
  if (residual >= tol) {
    throw ConvergenceError("sinkhorn: no convergence after " + std::to_string(max_iter) +
                           " iterations, marginal violation " + std::to_string(residual));
  }

  // Round the plan so marginals hold exactly up to fp: scale rows, then
  // columns, then add the rank-one correction on the remaining deficit.
  std::vector<double> row(n, 0.0), col(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[i] += pi[i * m + j];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double s = row[i] > 0.0 ? std::min(1.0, mu.weights[i] / row[i]) : 1.0;
    for (std::size_t j = 0; j < m; ++j) pi[i * m + j] *= s;
  }
  for (std::size_t j = 0; j < m; ++j) {
    col[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) col[j] += pi[i * m + j];
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double s = col[j] > 0.0 ? std::min(1.0, nu.weights[j] / col[j]) : 1.0;
    for (std::size_t i = 0; i < n; ++i) pi[i * m + j] *= s;
  }
  std::vector<double> err_row(n, 0.0), err_col(m, 0.0);
  double err_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += pi[i * m + j];
    err_row[i] = mu.weights[i] - r;
    err_total += err_row[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += pi[i * m + j];
    err_col[j] = nu.weights[j] - c;
  }
  if (err_total > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        pi[i * m + j] += err_row[i] * err_col[j] / err_total;
      }
    }
  }

  SinkhornResult out;
  double primal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double p = pi[i * m + j];
      if (p > 0.0) {
        primal += p * cost[i * m + j] +
                  eps * p * std::log(p / (mu.weights[i] * nu.weights[j]));
      }
    }
  }
  out.primal = primal;
  out.u = std::move(f);
  out.v = std::move(g);
  out.coupling = std::move(pi);
  out.iterations = iter + 1;
  out.residual = residual;
  return out;
}

double semidual_value(std::span<const double> v_on_nu, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu, double eps) {
  mu.validate();
  nu.validate();
  if (v_on_nu.size() != nu.atoms.size()) {
    throw std::invalid_argument("semidual_value: potential length mismatch");
  }
  const std::size_t n = mu.atoms.size();
  const std::size_t m = nu.atoms.size();
  std::vector<double> buf(m);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = mu.atoms[i] - nu.atoms[j];
      buf[j] = std::log(nu.weights[j]) + (v_on_nu[j] - d * d) / eps;
    }
    total += mu.weights[i] * (-eps * log_sum_exp(buf));
  }
  for (std::size_t j = 0; j < m; ++j) total += nu.weights[j] * v_on_nu[j];
  return total;
}

double regularizer_estimate(const MlpNet& generator, const MlpNet& potential,
                            const std::vector<std::vector<double>>& covariates,
                            const PairBatch& batch, const DirectedPairSet& pairs_contract,
                            double eps, std::span<double> theta_grad,
                            std::span<double> phi_grad, int normalization_count) {
  if (!(eps > 0.0)) throw std::invalid_argument("regularizer_estimate: epsilon must be positive");
  if (batch.pairs.size() != batch.uniforms.size()) {
    throw std::invalid_argument("regularizer_estimate: pairs/uniforms row mismatch");
  }
  if (batch.pairs.empty()) return 0.0;
  const int m_samples = static_cast<int>(batch.uniforms.front().size());
  if (m_samples < 1) throw std::invalid_argument("regularizer_estimate: need M >= 1 draws");

  const std::vector<int> parent = pairs_contract.parent_of();
  for (const auto& [tail, head] : batch.pairs) {
    if (tail < 0 || tail >= pairs_contract.node_count ||
        parent[static_cast<std::size_t>(tail)] != head) {
      throw ContractViolation("regularizer_estimate: pair (" + std::to_string(tail) + "," +
                              std::to_string(head) + ") is not an edge of the pair set");
    }
  }

  const bool want_theta = !theta_grad.empty();
  const bool want_phi = !phi_grad.empty();
  if (want_theta && theta_grad.size() != generator.params.size()) {
    throw std::invalid_argument("regularizer_estimate: theta_grad length mismatch");
  }
  if (want_phi && phi_grad.size() != potential.params.size()) {
    throw std::invalid_argument("regularizer_estimate: phi_grad length mismatch");
  }

  const int norm_b =
      normalization_count > 0 ? normalization_count : static_cast<int>(batch.pairs.size());
  const double scale = 1.0 / (static_cast<double>(m_samples) * static_cast<double>(norm_b));
  const std::size_t mm = static_cast<std::size_t>(m_samples);

  MlpScratch scratch;
  const int gen_in = generator.arch.input_dim;
  const int pot_in = potential.arch.input_dim;

  std::vector<double> gen_input_i(static_cast<std::size_t>(gen_in));
  std::vector<double> gen_input_j(static_cast<std::size_t>(gen_in));
  std::vector<double> pot_input(static_cast<std::size_t>(pot_in));
  std::vector<double> s_i(mm), s_j(mm), v_i(mm);
  std::vector<double> weights(mm * mm);  // weights[m*M + k]
  std::vector<double> row(mm);
  std::vector<double> up_v(mm), up_si(mm), up_sj(mm);
  std::vector<double> pot_in_grad(static_cast<std::size_t>(pot_in));

  double total = 0.0;
  for (std::size_t b = 0; b < batch.pairs.size(); ++b) {
    const auto [i_idx, j_idx] = batch.pairs[b];
    const std::vector<double>& x_i = covariates[static_cast<std::size_t>(i_idx)];
    const std::vector<double>& x_j = covariates[static_cast<std::size_t>(j_idx)];
    if (static_cast<int>(x_i.size()) + 1 != gen_in || static_cast<int>(x_i.size()) + 1 != pot_in) {
      throw std::invalid_argument("regularizer_estimate: covariate dimension mismatch");
    }
    const std::vector<double>& uniforms = batch.uniforms[b];
    if (static_cast<int>(uniforms.size()) != m_samples) {
      throw std::invalid_argument("regularizer_estimate: ragged uniform rows");
    }

    std::copy(x_i.begin(), x_i.end(), gen_input_i.begin());
    std::copy(x_j.begin(), x_j.end(), gen_input_j.begin());
    std::copy(x_i.begin(), x_i.end(), pot_input.begin());

    // pushforward samples at both endpoints and potential values at the tail
    for (std::size_t k = 0; k < mm; ++k) {
      gen_input_i.back() = uniforms[k];
      s_i[k] = forward(generator, gen_input_i, scratch);
      gen_input_j.back() = uniforms[k];
      s_j[k] = forward(generator, gen_input_j, scratch);
    }
    for (std::size_t k = 0; k < mm; ++k) {
      pot_input.back() = s_i[k];
      v_i[k] = forward(potential, pot_input, scratch);
    }

    // c-transform rows: exponents z_{m,k}/eps with max-shift softmax
    double pair_value = 0.0;
    for (std::size_t m = 0; m < mm; ++m) {
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < mm; ++k) {
        const double d = s_j[m] - s_i[k];
        row[k] = (v_i[k] - d * d) / eps;
        hi = std::max(hi, row[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < mm; ++k) {
        const double e = std::exp(row[k] - hi);
        weights[m * mm + k] = e;
        sum += e;
      }
      const double lse = hi + std::log(sum);
      pair_value += -eps * (lse - std::log(static_cast<double>(m_samples)));  // v^eps(s_j[m])
      pair_value += v_i[m];
      const double inv = 1.0 / sum;
      for (std::size_t k = 0; k < mm; ++k) weights[m * mm + k] *= inv;
    }
    total += scale * pair_value;

    if (!want_theta && !want_phi) continue;

    // upstreams per node (see header): through the c-transform rows and the
    // direct potential term
    for (std::size_t k = 0; k < mm; ++k) {
      double wsum = 0.0;
      double direct = 0.0;
      for (std::size_t m = 0; m < mm; ++m) {
        const double w = weights[m * mm + k];
        wsum += w;
        direct += w * 2.0 * (s_j[m] - s_i[k]);
      }
      up_v[k] = 1.0 - wsum;
      up_si[k] = -direct;  // squared-distance channel; potential channel added below
    }
    for (std::size_t m = 0; m < mm; ++m) {
      double g = 0.0;
      for (std::size_t k = 0; k < mm; ++k) {
        g += weights[m * mm + k] * 2.0 * (s_j[m] - s_i[k]);
      }
      up_sj[m] = g;
    }

    // potential backwards: accumulate phi grads and collect the y-input
    // gradient that chains into the tail pushforward samples
    for (std::size_t k = 0; k < mm; ++k) {
      pot_input.back() = s_i[k];
      fill_zero(pot_in_grad);
      backward_into(potential, pot_input, scale * up_v[k], scratch,
                    want_phi ? phi_grad : std::span<double>{}, pot_in_grad);
      up_si[k] = scale * up_si[k] + pot_in_grad.back();
    }

    if (want_theta) {
      for (std::size_t k = 0; k < mm; ++k) {
        gen_input_i.back() = uniforms[k];
        backward_into(generator, gen_input_i, up_si[k], scratch, theta_grad, {});
      }
      for (std::size_t m = 0; m < mm; ++m) {
        gen_input_j.back() = uniforms[m];
        backward_into(generator, gen_input_j, scale * up_sj[m], scratch, theta_grad, {});
      }
    }
  }
  return total;
}

}  // namespace condgen
