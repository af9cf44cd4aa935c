#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "condgen/dataset.hpp"

namespace condgen {

// Sample container keeping the original values plus a sorted copy for the
// quantile-based metrics.
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
  std::vector<double> sorted_;
};

// Exact squared 2-Wasserstein distance between the empirical measures:
// the integral of the squared quantile difference, computed by merging the
// two breakpoint grids (integer arithmetic on a common 1/(n*m) grid). For
// equal sizes this reduces to the mean of squared sorted differences.
double w2_squared(const EmpiricalSample& a, const EmpiricalSample& b);

// Two-sample Kolmogorov-Smirnov statistic: sup over pooled atoms (evaluated
// just after each jump) of |F_a - F_b|.
double ks_statistic(const EmpiricalSample& a, const EmpiricalSample& b);

struct MseR2 {
  double mse = 0.0;
  std::optional<double> r2;  // empty when fewer than 2 covariates (or zero truth variance)
};

// Mean squared error of per-covariate generated means against ground-truth
// means, and R^2 = 1 - mse / var(truth means).
MseR2 mse_r2(std::span<const double> generated_means, std::span<const double> truth_means);

struct ScatterPoint {
  int i = 0, j = 0;       // group indices
  double distance = 0.0;  // standardized-covariate Euclidean distance
  double w2 = 0.0;        // root of w2_squared between the response samples
};

// All pairs of groups whose response counts exceed min_count; emitted for
// plotting the covariate-distance vs response-distance trend.
std::vector<ScatterPoint> lipschitz_scatter(const Dataset& dataset, int min_count = 18);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

Aggregate aggregate(std::span<const double> values);

struct CovariateMetrics {
  int index = 0;
  std::vector<double> x;
  double w2_squared = 0.0;
  double w2 = 0.0;
  double ks = 0.0;
  double generated_mean = 0.0;
  double truth_mean = 0.0;
};

// Per-covariate and aggregate evaluation metrics. Aggregate means are the
// arithmetic means of the per-covariate values.
struct MetricReport {
  std::vector<CovariateMetrics> per_covariate;
  Aggregate w2_squared_agg, w2_agg, ks_agg;
  double mse = 0.0;
  std::optional<double> r2;
};

MetricReport build_report(const std::vector<std::vector<double>>& covariates,
                          const std::vector<EmpiricalSample>& generated,
                          const std::vector<EmpiricalSample>& truth);

nlohmann::json report_to_json(const MetricReport& report);

}  // namespace condgen
