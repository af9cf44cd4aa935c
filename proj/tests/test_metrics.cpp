#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "condgen/metrics.hpp"
#include "condgen/rng.hpp"
#include "condgen/synthetic.hpp"

using namespace condgen;

namespace {

// Exact min-cost assignment (Hungarian with potentials), the brute-force
// discrete OT oracle once both samples are expanded to a common atom count.
double assignment_cost(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double cost = 0.0;
  for (int j = 1; j <= n; ++j) {
    cost += a[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)]
             [static_cast<std::size_t>(j - 1)];
  }
  return cost;
}

double brute_force_w2sq(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  const int l = std::lcm(n, m);
  std::vector<double> ea, eb;
  for (double x : a) ea.insert(ea.end(), static_cast<std::size_t>(l / n), x);
  for (double x : b) eb.insert(eb.end(), static_cast<std::size_t>(l / m), x);
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    cost[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(l));
    for (int j = 0; j < l; ++j) {
      const double d = ea[static_cast<std::size_t>(i)] - eb[static_cast<std::size_t>(j)];
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = d * d;
    }
  }
  return assignment_cost(cost) / static_cast<double>(l);
}

// Direct counting KS oracle: no sorting or merge walk.
double brute_force_ks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double sup = 0.0;
  for (double t : pooled) {
    int ca = 0, cb = 0;
    for (double x : a) ca += x <= t ? 1 : 0;
    for (double x : b) cb += x <= t ? 1 : 0;
    sup = std::max(sup, std::abs(static_cast<double>(ca) / static_cast<double>(a.size()) -
                                 static_cast<double>(cb) / static_cast<double>(b.size())));
  }
  return sup;
}

std::vector<double> random_sample(Rng& rng, int n, double lo = -4.0, double hi = 4.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("w2 squared closed cases") {
  CHECK(w2_squared(EmpiricalSample({1.0, 2.0, 3.0}), EmpiricalSample({3.0, 1.0, 2.0})) ==
        0.0);
  CHECK(w2_squared(EmpiricalSample({0.0}), EmpiricalSample({3.0})) == 9.0);
  CHECK(w2_squared(EmpiricalSample({0.0, 1.0}), EmpiricalSample({0.0, 0.0, 3.0})) ==
        doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("w2 squared matches the assignment oracle") {
  Rng rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(10));
    const int m_max = 12 - n;
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(10, m_max))));
    const std::vector<double> a = random_sample(rng, n);
    const std::vector<double> b = random_sample(rng, m);
    const double got = w2_squared(EmpiricalSample(a), EmpiricalSample(b));
    const double want = brute_force_w2sq(a, b);
    CHECK(std::abs(got - want) < 1e-9);
  }
}

TEST_CASE("w2 squared properties") {
  Rng rng(14);
  SUBCASE("symmetry and equal-size closed form") {
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(20));
      std::vector<double> a = random_sample(rng, n);
      std::vector<double> b = random_sample(rng, n);
      EmpiricalSample sa(a), sb(b);
      CHECK(w2_squared(sa, sb) == w2_squared(sb, sa));
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      double mean_sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
        mean_sq += d * d;
      }
      mean_sq /= static_cast<double>(n);
      CHECK(std::abs(w2_squared(sa, sb) - mean_sq) < 1e-12);
    }
  }
  SUBCASE("zero iff equal multisets") {
    EmpiricalSample a({1.0, 2.0});
    EmpiricalSample b({2.0, 1.0});
    EmpiricalSample c({1.0, 2.5});
    CHECK(w2_squared(a, b) == 0.0);
    CHECK(w2_squared(a, c) > 0.0);
  }
  SUBCASE("translation covariance is exact on dyadic values") {
    Rng drng(15);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + static_cast<int>(drng.below(6));
      const int m = 1 + static_cast<int>(drng.below(6));
      auto dyadic = [&](int count) {
        std::vector<double> v(static_cast<std::size_t>(count));
        for (double& x : v) {
          x = static_cast<double>(static_cast<std::int64_t>(drng.below(1025)) - 512) / 64.0;
        }
        return v;
      };
      const std::vector<double> a = dyadic(n);
      const std::vector<double> b = dyadic(m);
      const double c = static_cast<double>(static_cast<std::int64_t>(drng.below(129)) - 64) / 64.0;
      std::vector<double> ac = a, bc = b;
      for (double& x : ac) x += c;
      for (double& x : bc) x += c;
      CHECK(w2_squared(EmpiricalSample(ac), EmpiricalSample(bc)) ==
            w2_squared(EmpiricalSample(a), EmpiricalSample(b)));
    }
  }
}

TEST_CASE("ks statistic closed cases") {
  CHECK(ks_statistic(EmpiricalSample({0.5, 1.5}), EmpiricalSample({1.5, 0.5})) == 0.0);
  CHECK(ks_statistic(EmpiricalSample({0.0, 1.0}), EmpiricalSample({5.0, 6.0})) == 1.0);
  CHECK(ks_statistic(EmpiricalSample({0.0, 1.0}), EmpiricalSample({0.5})) == 0.5);
}

TEST_CASE("ks matches the counting oracle exactly") {
  Rng rng(31415);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(15));
    const int m = 1 + static_cast<int>(rng.below(15));
    // dyadic grid so ties across the two samples actually occur
    auto grid_sample = [&](int count) {
      std::vector<double> v(static_cast<std::size_t>(count));
      for (double& x : v) x = static_cast<double>(static_cast<std::int64_t>(rng.below(33)) - 16) / 16.0;
      return v;
    };
    const std::vector<double> a = grid_sample(n);
    const std::vector<double> b = grid_sample(m);
    CHECK(ks_statistic(EmpiricalSample(a), EmpiricalSample(b)) == brute_force_ks(a, b));
  }
}

TEST_CASE("ks properties") {
  Rng rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    const int m = 1 + static_cast<int>(rng.below(12));
    auto coarse = [&](int count) {
      std::vector<double> v(static_cast<std::size_t>(count));
      for (double& x : v) x = static_cast<double>(static_cast<std::int64_t>(rng.below(65)) - 32) / 16.0;
      return v;
    };
    const std::vector<double> a = coarse(n);
    const std::vector<double> b = coarse(m);
    EmpiricalSample sa(a), sb(b);
    const double ks = ks_statistic(sa, sb);
    CHECK(ks == ks_statistic(sb, sa));
    CHECK(ks >= 0.0);
    CHECK(ks <= 1.0);
    // invariance under a strictly increasing transform; cubes of these
    // dyadic values are exactly representable so order and ties survive
    auto cube = [](std::vector<double> v) {
      for (double& x : v) x = x * x * x;
      return v;
    };
    CHECK(ks_statistic(EmpiricalSample(cube(a)), EmpiricalSample(cube(b))) == ks);
  }
}

TEST_CASE("mse and r2") {
  SUBCASE("perfect means") {
    const std::vector<double> truth = {1.0, 2.0, 3.0};
    MseR2 r = mse_r2(truth, truth);
    CHECK(r.mse == 0.0);
    REQUIRE(r.r2.has_value());
    CHECK(*r.r2 == 1.0);
  }
  SUBCASE("predicting the grand mean gives r2 zero") {
    const std::vector<double> truth = {1.0, 2.0, 3.0, 6.0};
    const double grand = (1.0 + 2.0 + 3.0 + 6.0) / 4.0;
    const std::vector<double> gen(truth.size(), grand);
    MseR2 r = mse_r2(gen, truth);
    REQUIRE(r.r2.has_value());
    CHECK(*r.r2 == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("random vectors match a scalar recomputation") {
    Rng rng(8);
    const int n = 17;
    std::vector<double> gen(n), truth(n);
    for (double& v : gen) v = rng.uniform(-3, 3);
    for (double& v : truth) v = rng.uniform(-3, 3);
    MseR2 r = mse_r2(gen, truth);
    double mse = 0.0;
    for (int i = 0; i < n; ++i) {
      mse += (gen[static_cast<std::size_t>(i)] - truth[static_cast<std::size_t>(i)]) *
             (gen[static_cast<std::size_t>(i)] - truth[static_cast<std::size_t>(i)]);
    }
    mse /= n;
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : truth) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::abs(r.mse - mse) < 1e-12);
    REQUIRE(r.r2.has_value());
    CHECK(std::abs(*r.r2 - (1.0 - mse / var)) < 1e-12);
  }
  SUBCASE("r2 undefined for a single covariate") {
    MseR2 r = mse_r2(std::vector<double>{1.0}, std::vector<double>{2.0});
    CHECK(r.mse == 1.0);
    CHECK_FALSE(r.r2.has_value());
  }
}

TEST_CASE("lipschitz scatter") {
  auto make_dataset = [](const std::vector<int>& counts) {
    Dataset ds;
    ds.dim = 1;
    Rng rng(5);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      CovariateGroup g;
      g.x = {static_cast<double>(i)};
      for (int k = 0; k < counts[i]; ++k) g.responses.push_back(rng.uniform(0, 1));
      ds.groups.push_back(g);
    }
    ds.normalizer = Normalizer::fit(ds.groups, 1);
    return ds;
  };
  SUBCASE("no qualifying groups") {
    Dataset ds = make_dataset({5, 10, 18});
    CHECK(lipschitz_scatter(ds, 18).empty());
  }
  SUBCASE("two qualifying groups give one pair") {
    Dataset ds = make_dataset({25, 3, 40});
    const auto pts = lipschitz_scatter(ds, 18);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].i == 0);
    CHECK(pts[0].j == 2);
    CHECK(pts[0].distance > 0.0);
  }
  SUBCASE("location-scale family produces a positive correlation") {
    SyntheticFamily family = SyntheticFamily::defaults(FamilyKind::LocationScaleGaussian, 33);
    Dataset ds = synth_generate(family, 40, {25, 25});
    const auto pts = lipschitz_scatter(ds, 18);
    REQUIRE(pts.size() == 40 * 39 / 2);
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
      mx += p.distance;
      my += p.w2;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (const auto& p : pts) {
      sxy += (p.distance - mx) * (p.w2 - my);
      sxx += (p.distance - mx) * (p.distance - mx);
      syy += (p.w2 - my) * (p.w2 - my);
    }
    const double pearson = sxy / std::sqrt(sxx * syy);
    CHECK(pearson > 0.0);
  }
}

TEST_CASE("metric report") {
  SUBCASE("truth against itself is all zeros") {
    std::vector<std::vector<double>> xs = {{0.0}, {1.0}};
    std::vector<EmpiricalSample> truth = {EmpiricalSample({1.0, 2.0}),
                                          EmpiricalSample({3.0, 4.0})};
    MetricReport report = build_report(xs, truth, truth);
    CHECK(report.w2_squared_agg.mean == 0.0);
    CHECK(report.ks_agg.mean == 0.0);
    CHECK(report.mse == 0.0);
    REQUIRE(report.r2.has_value());
    CHECK(*report.r2 == 1.0);
  }
  SUBCASE("aggregate mean equals the arithmetic mean of per-covariate values") {
    Rng rng(66);
    std::vector<std::vector<double>> xs;
    std::vector<EmpiricalSample> gen, truth;
    for (int i = 0; i < 7; ++i) {
      xs.push_back({static_cast<double>(i)});
      gen.push_back(EmpiricalSample(random_sample(rng, 6)));
      truth.push_back(EmpiricalSample(random_sample(rng, 9)));
    }
    MetricReport report = build_report(xs, gen, truth);
    double mean_w2 = 0.0, mean_ks = 0.0;
    for (const auto& cm : report.per_covariate) {
      mean_w2 += cm.w2_squared;
      mean_ks += cm.ks;
    }
    mean_w2 /= 7.0;
    mean_ks /= 7.0;
    CHECK(report.w2_squared_agg.mean == doctest::Approx(mean_w2).epsilon(1e-15));
    CHECK(report.ks_agg.mean == doctest::Approx(mean_ks).epsilon(1e-15));
    const nlohmann::json j = report_to_json(report);
    CHECK(j["per_covariate"].size() == 7);
    CHECK(j["aggregate"]["w2_squared"].contains("mean"));
    CHECK(j["aggregate"]["w2_squared"].contains("stddev"));
    CHECK(j["aggregate"]["r2_defined"] == true);
  }
}
