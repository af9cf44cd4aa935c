#pragma once

#include <cmath>
#include <vector>

namespace condgen {

// Standard normal CDF via erfc; max absolute error a few ulp (<= 1e-15).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

struct KdeConfig {
  double bandwidth = 0.3;  // > 0, Gaussian kernel
};

// Smooth conditional CDF estimate for one covariate group: the exact integral
// of the Gaussian KDE over the group's responses, i.e. a mixture of normal
// CDFs. Nondecreasing in y with limits 0 and 1; evaluation is pure.
class ConditionalCdf {
 public:
  ConditionalCdf(std::vector<double> responses, double bandwidth);

  // (1/N) sum_k Phi((y - y_k) / h)
  double eval(double y) const;

  // Exact derivative of eval: the KDE density (1/(N h)) sum_k phi((y - y_k) / h).
  double eval_derivative(double y) const;

  const std::vector<double>& responses() const { return responses_; }
  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> responses_;
  double bandwidth_;
};

// Grid-search candidates for the bandwidth. Explicit grids are passed through
// unchanged; geometric grids are log-spaced with exact endpoints.
std::vector<double> bandwidth_grid_explicit(std::vector<double> candidates);
std::vector<double> bandwidth_grid_geometric(double lo, double hi, int count);
std::vector<double> default_bandwidth_grid();

}  // namespace condgen
