#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "condgen/dataset.hpp"
#include "condgen/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace condgen {

enum class FamilyKind {
  LocationScaleGaussian,
  TwoComponentMixture,
  HeteroscedasticSine,
};

FamilyKind family_from_string(const std::string& name);  // unknown name -> invalid_argument
std::string family_to_string(FamilyKind kind);

// Synthetic ground-truth generator with exact conditional sampling and exact
// conditional CDF evaluation. Covariates live on [0,1]^dim; the conditional
// law depends on x through the coordinate mean t(x) = (1/d) sum_k x_k.
//
// Families (parameters; all have "dim"):
//   location-scale-gaussian  N(loc0 + loc1*t, (scale0 + scale1*t)^2);
//                            zero scale degenerates to a point mass at the mean
//   two-component-mixture    p(t) N(a0 + a1*t, s1^2) + (1-p(t)) N(b0 + b1*t, s2^2),
//                            p(t) = logistic(mix0 + mix1*t)
//   heteroscedastic-sine     N(amp*sin(freq*t + phase), s(t)^2),
//                            s(t) = noise0 + noise1*(1 + sin(noise_freq*t))/2
struct SyntheticFamily {
  FamilyKind kind = FamilyKind::HeteroscedasticSine;
  std::map<std::string, double> params;
  std::uint64_t seed = 1;

  static SyntheticFamily defaults(FamilyKind kind, std::uint64_t seed);

  int dim() const;
  double param(const std::string& key) const;
  void validate() const;

  double projection(std::span<const double> x) const;  // t(x)
  double conditional_mean(std::span<const double> x) const;
  double conditional_variance(std::span<const double> x) const;
  double conditional_cdf(std::span<const double> x, double y) const;
  double sample_one(std::span<const double> x, Rng& rng) const;
  std::vector<double> sample_many(std::span<const double> x, int n, Rng& rng) const;
};

nlohmann::json family_to_json(const SyntheticFamily& family);
SyntheticFamily family_from_json(const nlohmann::json& j);

// Number of responses drawn per covariate: uniform on [min_count, max_count].
struct CountRange {
  int min_count = 1;
  int max_count = 1;
};

// Draws n_covariates distinct covariates and their responses; reproducible
// from (family.seed, stream). The returned dataset has its normalizer fitted
// on its own covariates.
Dataset synth_generate(const SyntheticFamily& family, int n_covariates, CountRange counts,
                       std::uint64_t stream = 0);

}  // namespace condgen
