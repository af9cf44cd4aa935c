#include "condgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "condgen/vecops.hpp"

namespace condgen {

EmpiricalSample::EmpiricalSample(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("EmpiricalSample: empty sample");
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalSample: non-finite value");
  }
  sorted_ = values_;
  std::sort(sorted_.begin(), sorted_.end());
}

double w2_squared(const EmpiricalSample& a, const EmpiricalSample& b) {
  const std::vector<double>& qa = a.sorted();
  const std::vector<double>& qb = b.sorted();
  const std::int64_t n = static_cast<std::int64_t>(qa.size());
  const std::int64_t m = static_cast<std::int64_t>(qb.size());
  // Quantile breakpoints of a sit at multiples of m, of b at multiples of n,
  // on the common grid with denominator n*m.
  std::int64_t pos = 0;
  std::size_t i = 0, j = 0;
  double total = 0.0;
  const std::int64_t end = n * m;
  while (pos < end) {
    const std::int64_t next_a = static_cast<std::int64_t>(i + 1) * m;
    const std::int64_t next_b = static_cast<std::int64_t>(j + 1) * n;
    const std::int64_t next = std::min(next_a, next_b);
    const double d = qa[i] - qb[j];
    total += static_cast<double>(next - pos) * d * d;
    if (next == next_a) ++i;
    if (next == next_b) ++j;
    pos = next;
  }
  return total / static_cast<double>(end);
}

double ks_statistic(const EmpiricalSample& a, const EmpiricalSample& b) {
  const std::vector<double>& sa = a.sorted();
  const std::vector<double>& sb = b.sorted();
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double t;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      t = sa[i];
    } else {
      t = sb[j];
    }
    while (i < sa.size() && sa[i] <= t) ++i;
    while (j < sb.size() && sb[j] <= t) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

MseR2 mse_r2(std::span<const double> generated_means, std::span<const double> truth_means) {
  check_same_length(generated_means, truth_means, "mse_r2");
  if (generated_means.empty()) throw std::invalid_argument("mse_r2: empty input");
  const double n = static_cast<double>(truth_means.size());
  double mse = 0.0;
  for (std::size_t k = 0; k < truth_means.size(); ++k) {
    const double d = generated_means[k] - truth_means[k];
    mse += d * d;
  }
  mse /= n;

  MseR2 out;
  out.mse = mse;
  if (truth_means.size() >= 2) {
    double mean = 0.0;
    for (double v : truth_means) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : truth_means) var += (v - mean) * (v - mean);
    var /= n;
    if (var > 0.0) out.r2 = 1.0 - mse / var;
  }
  return out;
}

std::vector<ScatterPoint> lipschitz_scatter(const Dataset& dataset, int min_count) {
  if (min_count < 1) throw std::invalid_argument("lipschitz_scatter: min_count must be >= 1");
  std::vector<int> qualifying;
  for (int g = 0; g < static_cast<int>(dataset.groups.size()); ++g) {
    if (dataset.groups[static_cast<std::size_t>(g)].count() > min_count) {
      qualifying.push_back(g);
    }
  }
  std::vector<ScatterPoint> out;
  std::vector<std::vector<double>> normalized;
  std::vector<EmpiricalSample> samples;
  normalized.reserve(qualifying.size());
  samples.reserve(qualifying.size());
  for (int g : qualifying) {
    const auto& group = dataset.groups[static_cast<std::size_t>(g)];
    normalized.push_back(dataset.normalizer.apply(group.x));
    samples.emplace_back(group.responses);
  }
  for (std::size_t a = 0; a < qualifying.size(); ++a) {
    for (std::size_t b = a + 1; b < qualifying.size(); ++b) {
      ScatterPoint p;
      p.i = qualifying[a];
      p.j = qualifying[b];
      p.distance = euclidean_distance(normalized[a], normalized[b]);
      p.w2 = std::sqrt(w2_squared(samples[a], samples[b]));
      out.push_back(p);
    }
  }
  return out;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return a;
}

MetricReport build_report(const std::vector<std::vector<double>>& covariates,
                          const std::vector<EmpiricalSample>& generated,
                          const std::vector<EmpiricalSample>& truth) {
  if (covariates.size() != generated.size() || covariates.size() != truth.size()) {
    throw std::invalid_argument("build_report: per-covariate lists must align");
  }
  if (covariates.empty()) throw std::invalid_argument("build_report: no covariates");

  MetricReport report;
  std::vector<double> w2s, w2r, kss, gen_means, truth_means;
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    CovariateMetrics cm;
    cm.index = static_cast<int>(k);
    cm.x = covariates[k];
    cm.w2_squared = w2_squared(generated[k], truth[k]);
    cm.w2 = std::sqrt(cm.w2_squared);
    cm.ks = ks_statistic(generated[k], truth[k]);
    const auto mean_of = [](const EmpiricalSample& s) {
      double m = 0.0;
      for (double v : s.values()) m += v;
      return m / static_cast<double>(s.size());
    };
    cm.generated_mean = mean_of(generated[k]);
    cm.truth_mean = mean_of(truth[k]);
    w2s.push_back(cm.w2_squared);
    w2r.push_back(cm.w2);
    kss.push_back(cm.ks);
    gen_means.push_back(cm.generated_mean);
    truth_means.push_back(cm.truth_mean);
    report.per_covariate.push_back(std::move(cm));
  }
  report.w2_squared_agg = aggregate(w2s);
  report.w2_agg = aggregate(w2r);
  report.ks_agg = aggregate(kss);
  const MseR2 mr = mse_r2(gen_means, truth_means);
  report.mse = mr.mse;
  report.r2 = mr.r2;
  return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json j;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& cm : report.per_covariate) {
    per.push_back({{"index", cm.index},
                   {"x", cm.x},
                   {"w2_squared", cm.w2_squared},
                   {"w2", cm.w2},
                   {"ks", cm.ks},
                   {"generated_mean", cm.generated_mean},
                   {"truth_mean", cm.truth_mean}});
  }
  j["per_covariate"] = std::move(per);
  auto agg = [](const Aggregate& a) {
    return nlohmann::json{{"mean", a.mean}, {"stddev", a.stddev}};
  };
  j["aggregate"] = {{"w2_squared", agg(report.w2_squared_agg)},
                    {"w2", agg(report.w2_agg)},
                    {"ks", agg(report.ks_agg)},
                    {"mse", report.mse},
                    {"r2", report.r2.has_value() ? nlohmann::json(*report.r2)
                                                 : nlohmann::json(nullptr)},
                    {"r2_defined", report.r2.has_value()}};
  return j;
}

}  // namespace condgen
