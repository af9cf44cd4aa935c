#include "condgen/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "condgen/cond_cdf.hpp"
#include "condgen/errors.hpp"

namespace condgen {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::map<std::string, double> default_params(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::LocationScaleGaussian:
      return {{"dim", 2}, {"loc0", 0.0}, {"loc1", 2.0}, {"scale0", 0.3}, {"scale1", 0.4}};
    case FamilyKind::TwoComponentMixture:
      return {{"dim", 2},  {"mix0", -1.0}, {"mix1", 2.0}, {"a0", -1.0}, {"a1", -1.0},
              {"b0", 1.0}, {"b1", 1.0},    {"s1", 0.25},  {"s2", 0.25}};
    case FamilyKind::HeteroscedasticSine:
      return {{"dim", 2},
              {"amp", 2.0},
              {"freq", 2.0 * M_PI},
              {"phase", 0.0},
              {"noise0", 0.15},
              {"noise1", 0.25},
              {"noise_freq", 4.0 * M_PI}};
  }
  throw std::invalid_argument("unknown synthetic family");
}

}  // namespace

FamilyKind family_from_string(const std::string& name) {
  if (name == "location-scale-gaussian") return FamilyKind::LocationScaleGaussian;
  if (name == "two-component-mixture") return FamilyKind::TwoComponentMixture;
  if (name == "heteroscedastic-sine") return FamilyKind::HeteroscedasticSine;
  throw std::invalid_argument("unknown synthetic family '" + name + "'");
}

std::string family_to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::LocationScaleGaussian: return "location-scale-gaussian";
    case FamilyKind::TwoComponentMixture: return "two-component-mixture";
    case FamilyKind::HeteroscedasticSine: return "heteroscedastic-sine";
  }
  throw std::invalid_argument("unknown synthetic family");
}

SyntheticFamily SyntheticFamily::defaults(FamilyKind kind, std::uint64_t seed) {
  SyntheticFamily f;
  f.kind = kind;
  f.params = default_params(kind);
  f.seed = seed;
  f.validate();
  return f;
}

int SyntheticFamily::dim() const { return static_cast<int>(param("dim")); }

double SyntheticFamily::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) {
    throw std::invalid_argument("synthetic family: missing parameter '" + key + "'");
  }
  return it->second;
}

void SyntheticFamily::validate() const {
  if (dim() < 1) throw std::invalid_argument("synthetic family: dim must be >= 1");
  for (const auto& [key, value] : default_params(kind)) {
    param(key);  // throws if absent
    (void)value;
  }
  // Scales must be nonnegative over t in [0,1]; all scale maps are affine in t.
  auto check_scale = [](double at0, double at1, const char* what) {
    if (at0 < 0.0 || at1 < 0.0) {
      throw std::invalid_argument(std::string("synthetic family: ") + what +
                                  " must be nonnegative on [0,1]");
    }
  };
  switch (kind) {
    case FamilyKind::LocationScaleGaussian:
      check_scale(param("scale0"), param("scale0") + param("scale1"), "scale");
      break;
    case FamilyKind::TwoComponentMixture:
      if (param("s1") <= 0.0 || param("s2") <= 0.0) {
        throw std::invalid_argument("synthetic family: component scales must be positive");
      }
      break;
    case FamilyKind::HeteroscedasticSine:
      if (param("noise0") <= 0.0 || param("noise1") < 0.0) {
        throw std::invalid_argument("synthetic family: noise floor must be positive");
      }
      break;
  }
}

double SyntheticFamily::projection(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) {
    throw std::invalid_argument("synthetic family: covariate dimension mismatch");
  }
  double t = 0.0;
  for (double v : x) t += v;
  return t / static_cast<double>(x.size());
}

namespace {

struct GaussianMixture {
  // up to two components; weight2 = 1 - weight1
  double w1, m1, s1, m2, s2;
};

}  // namespace

// Each family reduces to a one- or two-component Gaussian given x.
static GaussianMixture components(const SyntheticFamily& f, double t) {
  switch (f.kind) {
    case FamilyKind::LocationScaleGaussian: {
      const double m = f.param("loc0") + f.param("loc1") * t;
      const double s = f.param("scale0") + f.param("scale1") * t;
      return {1.0, m, s, 0.0, 1.0};
    }
    case FamilyKind::TwoComponentMixture: {
      const double p = logistic(f.param("mix0") + f.param("mix1") * t);
      return {p, f.param("a0") + f.param("a1") * t, f.param("s1"),
              f.param("b0") + f.param("b1") * t, f.param("s2")};
    }
    case FamilyKind::HeteroscedasticSine: {
      const double m = f.param("amp") * std::sin(f.param("freq") * t + f.param("phase"));
      const double s =
          f.param("noise0") + f.param("noise1") * 0.5 * (1.0 + std::sin(f.param("noise_freq") * t));
      return {1.0, m, s, 0.0, 1.0};
    }
  }
  throw std::invalid_argument("unknown synthetic family");
}

double SyntheticFamily::conditional_mean(std::span<const double> x) const {
  const GaussianMixture c = components(*this, projection(x));
  return c.w1 * c.m1 + (1.0 - c.w1) * c.m2;
}

double SyntheticFamily::conditional_variance(std::span<const double> x) const {
  const GaussianMixture c = components(*this, projection(x));
  const double mean = c.w1 * c.m1 + (1.0 - c.w1) * c.m2;
  const double second =
      c.w1 * (c.m1 * c.m1 + c.s1 * c.s1) + (1.0 - c.w1) * (c.m2 * c.m2 + c.s2 * c.s2);
  return second - mean * mean;
}

double SyntheticFamily::conditional_cdf(std::span<const double> x, double y) const {
  const GaussianMixture c = components(*this, projection(x));
  auto component_cdf = [](double yy, double m, double s) {
    if (s > 0.0) return normal_cdf((yy - m) / s);
    return yy >= m ? 1.0 : 0.0;  // degenerate point mass
  };
  return c.w1 * component_cdf(y, c.m1, c.s1) + (1.0 - c.w1) * component_cdf(y, c.m2, c.s2);
}

double SyntheticFamily::sample_one(std::span<const double> x, Rng& rng) const {
  const GaussianMixture c = components(*this, projection(x));
  if (c.w1 >= 1.0) return c.m1 + c.s1 * (c.s1 > 0.0 ? rng.normal() : 0.0);
  const bool first = rng.uniform01() < c.w1;
  const double m = first ? c.m1 : c.m2;
  const double s = first ? c.s1 : c.s2;
  return m + s * rng.normal();
}

std::vector<double> SyntheticFamily::sample_many(std::span<const double> x, int n,
                                                 Rng& rng) const {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = sample_one(x, rng);
  return out;
}

nlohmann::json family_to_json(const SyntheticFamily& family) {
  nlohmann::json j;
  j["name"] = family_to_string(family.kind);
  j["seed"] = family.seed;
  j["params"] = family.params;
  return j;
}

SyntheticFamily family_from_json(const nlohmann::json& j) {
  SyntheticFamily f;
  f.kind = family_from_string(j.at("name").get<std::string>());
  f.seed = j.at("seed").get<std::uint64_t>();
  f.params = j.at("params").get<std::map<std::string, double>>();
  f.validate();
  return f;
}

Dataset synth_generate(const SyntheticFamily& family, int n_covariates, CountRange counts,
                       std::uint64_t stream) {
  family.validate();
  if (n_covariates < 1) {
    throw std::invalid_argument("synth_generate: n_covariates must be >= 1");
  }
  if (counts.min_count < 1 || counts.max_count < counts.min_count) {
    throw std::invalid_argument("synth_generate: invalid count range");
  }
  Rng rng(derive_seed(family.seed, stream));
  const int d = family.dim();

  Dataset ds;
  ds.dim = d;
  for (int k = 0; k < d; ++k) ds.covariate_names.push_back("x" + std::to_string(k));
  ds.response_name = "y";

  std::unordered_set<std::string> seen;
  std::vector<double> x(static_cast<std::size_t>(d));
  while (static_cast<int>(ds.groups.size()) < n_covariates) {
    for (double& v : x) v = rng.uniform01();
    std::string key(x.size() * sizeof(double), '\0');
    std::memcpy(key.data(), x.data(), key.size());
    if (!seen.insert(key).second) continue;  // continuous draws collide a.s. never
    const int count =
        counts.min_count +
        static_cast<int>(rng.below(static_cast<std::uint64_t>(counts.max_count - counts.min_count + 1)));
    CovariateGroup g;
    g.x = x;
    g.responses = family.sample_many(x, count, rng);
    ds.groups.push_back(std::move(g));
  }
  ds.normalizer = Normalizer::fit(ds.groups, d);
  return ds;
}

}  // namespace condgen
