#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "condgen/errors.hpp"
#include "condgen/synthetic.hpp"
#include "condgen/trainer.hpp"

using namespace condgen;
namespace fs = std::filesystem;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Small config for unit-scale training runs.
TrainConfig tiny_config() {
  TrainConfig c;
  c.batch = 8;
  c.mc = 3;
  c.hidden_width = 4;
  c.hidden_layers = 2;
  c.iterations = 50;
  c.seed = 5;
  return c;
}

Dataset tiny_dataset(int n_groups, std::uint64_t seed, int min_count = 1, int max_count = 3) {
  SyntheticFamily family = SyntheticFamily::defaults(FamilyKind::HeteroscedasticSine, seed);
  family.params["dim"] = 1;
  return synth_generate(family, n_groups, {min_count, max_count});
}

MlpNet constant_net(const MlpArch& arch, double value) {
  MlpNet net{arch, std::vector<double>(arch.param_count(), 0.0)};
  net.params.back() = value;
  return net;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  TrainConfig c;
  c.validate();
  c.r1 = 2.0;
  c.r2 = 2.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("r1/r2"), ConfigError);
  c = TrainConfig{};
  c.gamma = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("gamma"), ConfigError);
  c = TrainConfig{};
  c.h = -0.1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("config.h"), ConfigError);
}

TEST_CASE("config json round trip rejects unknown fields") {
  TrainConfig c = tiny_config();
  c.lambda = 0.25;
  c.h = 0.45;
  TrainConfig back = config_from_json(config_to_json(c));
  CHECK(back.lambda == c.lambda);
  CHECK(back.h == c.h);
  CHECK(back.batch == c.batch);
  CHECK(back.seed == c.seed);

  nlohmann::json j = config_to_json(c);
  j["typo_field"] = 1.0;
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("typo_field"), ConfigError);
  nlohmann::json wrong_type = config_to_json(c);
  wrong_type["h"] = "big";
  CHECK_THROWS_AS(config_from_json(wrong_type), ConfigError);
}

TEST_CASE("fit estimate closed cases") {
  // one group, one response; the KDE median is the response itself
  Dataset ds;
  ds.dim = 1;
  ds.groups = {{{0.5}, {2.0}}};
  ds.normalizer = Normalizer::fit(ds.groups, 1);
  TrainConfig config = tiny_config();
  config.batch = 1;
  Trainer trainer(ds, config);

  TrainBatch batch;
  batch.nodes = {0};
  batch.u_fit = {0.5};
  batch.u_mc = {{0.1, 0.2, 0.3}};

  SUBCASE("a generator that hits the median quantile has zero fit") {
    const MlpArch arch = default_arch(2, config.hidden_width, config.hidden_layers);
    const MlpNet theta = constant_net(arch, 2.0);  // T == the lone response
    CHECK(trainer.fit_estimate(theta, batch, {}) == 0.0);
  }
  SUBCASE("output far below the responses leaves the squared uniform") {
    const MlpArch arch = default_arch(2, config.hidden_width, config.hidden_layers);
    const MlpNet theta = constant_net(arch, -1e6);
    batch.u_fit = {0.7};
    CHECK(trainer.fit_estimate(theta, batch, {}) == doctest::Approx(0.49).epsilon(1e-12));
  }
  SUBCASE("unknown node is rejected") {
    batch.nodes = {5};
    const MlpNet theta = constant_net(default_arch(2, 4, 2), 0.0);
    CHECK_THROWS_AS(trainer.fit_estimate(theta, batch, {}), std::invalid_argument);
  }
}

TEST_CASE("fit gradient matches finite differences") {
  Dataset ds = tiny_dataset(6, 11);
  TrainConfig config = tiny_config();
  Trainer trainer(ds, config);
  TrainState state = trainer.init_state();
  TrainBatch batch;
  batch.nodes = {0, 2, 3, 5};
  batch.u_fit = {0.12, 0.48, 0.73, 0.91};
  batch.u_mc.assign(4, {0.2, 0.5, 0.8});

  std::vector<double> grad(state.theta.params.size(), 0.0);
  trainer.fit_estimate(state.theta, batch, grad);
  const double step = 1e-5;
  MlpNet probe = state.theta;
  for (std::size_t k = 0; k < probe.params.size(); ++k) {
    probe.params[k] = state.theta.params[k] + step;
    const double hi = trainer.fit_estimate(probe, batch, {});
    probe.params[k] = state.theta.params[k] - step;
    const double lo = trainer.fit_estimate(probe, batch, {});
    probe.params[k] = state.theta.params[k];
    CHECK(rel_err(grad[k], (hi - lo) / (2.0 * step)) < 1e-4);
  }
}

TEST_CASE("loss estimate identities") {
  Dataset ds = tiny_dataset(8, 21);
  SUBCASE("lambda and smoothing off reduce the loss to the fitness") {
    TrainConfig config = tiny_config();
    config.lambda = 0.0;
    config.r1 = 0.0;
    config.r2 = 0.0;
    Trainer trainer(ds, config);
    TrainState state = trainer.init_state();
    TrainBatch batch = trainer.draw_batch(state);
    const LossParts parts = trainer.loss_estimate(state.theta, state.phi, state.p, state.q,
                                                  batch, {}, {});
    CHECK(parts.loss == parts.fit);
    CHECK(parts.reg == 0.0);
  }
  SUBCASE("anchored iterates kill the smoothing terms") {
    TrainConfig config = tiny_config();
    Trainer trainer(ds, config);
    TrainState state = trainer.init_state();  // p = theta, q = phi at init
    TrainBatch batch = trainer.draw_batch(state);
    const LossParts parts = trainer.loss_estimate(state.theta, state.phi, state.p, state.q,
                                                  batch, {}, {});
    CHECK(parts.loss == doctest::Approx(parts.fit + config.lambda * parts.reg).epsilon(1e-15));
  }
}

TEST_CASE("loss gradients match finite differences for theta and phi") {
  Dataset ds = tiny_dataset(7, 31);
  TrainConfig config = tiny_config();
  Trainer trainer(ds, config);
  TrainState state = trainer.init_state();
  // move the anchors off the iterates so the smoothing gradients are active
  for (double& v : state.p) v += 0.05;
  for (double& v : state.q) v -= 0.03;
  TrainBatch batch = trainer.draw_batch(state);

  std::vector<double> tg(state.theta.params.size(), 0.0);
  std::vector<double> pg(state.phi.params.size(), 0.0);
  trainer.loss_estimate(state.theta, state.phi, state.p, state.q, batch, tg, pg);

  const double step = 1e-5;
  MlpNet probe = state.theta;
  for (std::size_t k = 0; k < probe.params.size(); ++k) {
    probe.params[k] = state.theta.params[k] + step;
    const double hi =
        trainer.loss_estimate(probe, state.phi, state.p, state.q, batch, {}, {}).loss;
    probe.params[k] = state.theta.params[k] - step;
    const double lo =
        trainer.loss_estimate(probe, state.phi, state.p, state.q, batch, {}, {}).loss;
    probe.params[k] = state.theta.params[k];
    CHECK(rel_err(tg[k], (hi - lo) / (2.0 * step)) < 1e-4);
  }
  MlpNet phi_probe = state.phi;
  for (std::size_t k = 0; k < phi_probe.params.size(); ++k) {
    phi_probe.params[k] = state.phi.params[k] + step;
    const double hi =
        trainer.loss_estimate(state.theta, phi_probe, state.p, state.q, batch, {}, {}).loss;
    phi_probe.params[k] = state.phi.params[k] - step;
    const double lo =
        trainer.loss_estimate(state.theta, phi_probe, state.p, state.q, batch, {}, {}).loss;
    phi_probe.params[k] = state.phi.params[k];
    CHECK(rel_err(pg[k], (hi - lo) / (2.0 * step)) < 1e-4);
  }
}

TEST_CASE("dsgda update path") {
  SUBCASE("zero gradients with unit averaging snap the anchors") {
    std::vector<double> theta = {1.0, -2.0};
    std::vector<double> phi = {0.5};
    std::vector<double> p = {9.0, 9.0};
    std::vector<double> q = {-9.0};
    DsgdaRates rates{0.01, 0.01, 1.0, 1.0};
    auto zero2 = [](const std::vector<double>&, const std::vector<double>&,
                    const std::vector<double>&, const std::vector<double>&) {
      return std::vector<double>{0.0, 0.0};
    };
    auto zero1 = [](const std::vector<double>&, const std::vector<double>&,
                    const std::vector<double>&, const std::vector<double>&) {
      return std::vector<double>{0.0};
    };
    dsgda_update(theta, phi, p, q, rates, zero2, zero1);
    CHECK(theta == std::vector<double>{1.0, -2.0});
    CHECK(phi == std::vector<double>{0.5});
    CHECK(p == theta);
    CHECK(q == phi);
  }
  SUBCASE("zero averaging freezes the anchors") {
    std::vector<double> theta = {1.0};
    std::vector<double> phi = {2.0};
    std::vector<double> p = {5.0};
    std::vector<double> q = {6.0};
    DsgdaRates rates{0.1, 0.1, 0.0, 0.0};
    auto grad = [](const std::vector<double>&, const std::vector<double>&,
                   const std::vector<double>&, const std::vector<double>&) {
      return std::vector<double>{1.0};
    };
    dsgda_update(theta, phi, p, q, rates, grad, grad);
    CHECK(p == std::vector<double>{5.0});
    CHECK(q == std::vector<double>{6.0});
    CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(phi[0] == doctest::Approx(2.1).epsilon(1e-15));
  }
  SUBCASE("quadratic saddle converges to the origin") {
    // L(theta, phi) = theta^2 - phi^2 + theta * phi, saddle at (0, 0),
    // wired through the same update path as the trainer
    const double r1 = 3.0, r2 = 2.0;
    std::vector<double> theta = {1.0};
    std::vector<double> phi = {-1.0};
    std::vector<double> p = theta;
    std::vector<double> q = phi;
    DsgdaRates rates{0.01, 0.01, 0.5, 0.7};
    auto grad_theta = [&](const std::vector<double>& t, const std::vector<double>& f,
                          const std::vector<double>& pp, const std::vector<double>&) {
      return std::vector<double>{2.0 * t[0] + f[0] + r1 * (t[0] - pp[0])};
    };
    auto grad_phi = [&](const std::vector<double>& t, const std::vector<double>& f,
                        const std::vector<double>&, const std::vector<double>& qq) {
      return std::vector<double>{-2.0 * f[0] + t[0] - r2 * (f[0] - qq[0])};
    };
    long steps = 0;
    for (; steps < 10000; ++steps) {
      dsgda_update(theta, phi, p, q, rates, grad_theta, grad_phi);
      if (std::abs(theta[0]) < 1e-6 && std::abs(phi[0]) < 1e-6) break;
    }
    CHECK(steps < 10000);
    CHECK(std::abs(theta[0]) < 1e-6);
    CHECK(std::abs(phi[0]) < 1e-6);
  }
}

TEST_CASE("dsgda step equals plain gradient descent when smoothing is off") {
  Dataset ds = tiny_dataset(8, 41);
  TrainConfig config = tiny_config();
  config.lambda = 0.0;
  config.r1 = 0.0;
  config.r2 = 0.0;
  Trainer trainer(ds, config);
  TrainState state = trainer.init_state();
  TrainBatch batch = trainer.draw_batch(state);

  std::vector<double> fit_grad(state.theta.params.size(), 0.0);
  trainer.fit_estimate(state.theta, batch, fit_grad);
  std::vector<double> manual = state.theta.params;
  axpy(-config.alpha, fit_grad, manual);

  TrainState stepped = state;
  trainer.dsgda_step_with_batch(stepped, batch);
  REQUIRE(stepped.theta.params.size() == manual.size());
  for (std::size_t k = 0; k < manual.size(); ++k) {
    CHECK(std::abs(stepped.theta.params[k] - manual[k]) <= 1e-12);
  }
  CHECK(stepped.phi.params == state.phi.params);  // nothing moves the potential
}

TEST_CASE("non-finite gradients abort with a diagnostic") {
  Dataset ds = tiny_dataset(6, 45);
  TrainConfig config = tiny_config();
  Trainer trainer(ds, config);
  TrainState state = trainer.init_state();
  state.theta.params[0] = std::numeric_limits<double>::quiet_NaN();
  TrainBatch batch = trainer.draw_batch(state);
  CHECK_THROWS_WITH_AS(trainer.dsgda_step_with_batch(state, batch),
                       doctest::Contains("non-finite"), NumericError);
}

TEST_CASE("anchors stay on the segment toward the new iterates") {
  Dataset ds = tiny_dataset(9, 51);
  TrainConfig config = tiny_config();
  Trainer trainer(ds, config);
  TrainState state = trainer.init_state();
  for (double& v : state.p) v += 0.2;  // detach the anchors
  for (double& v : state.q) v -= 0.2;
  const std::vector<double> p_old = state.p;
  const std::vector<double> q_old = state.q;
  trainer.dsgda_step(state);
  for (std::size_t k = 0; k < state.p.size(); ++k) {
    const double lo = std::min(p_old[k], state.theta.params[k]);
    const double hi = std::max(p_old[k], state.theta.params[k]);
    CHECK(state.p[k] >= lo - 1e-15);
    CHECK(state.p[k] <= hi + 1e-15);
  }
  for (std::size_t k = 0; k < state.q.size(); ++k) {
    const double lo = std::min(q_old[k], state.phi.params[k]);
    const double hi = std::max(q_old[k], state.phi.params[k]);
    CHECK(state.q[k] >= lo - 1e-15);
    CHECK(state.q[k] <= hi + 1e-15);
  }
}

TEST_CASE("training loop") {
  Dataset ds = tiny_dataset(30, 61, 1, 3);
  SUBCASE("zero iterations return the initialization") {
    TrainConfig config = tiny_config();
    config.iterations = 0;
    TrainResult result = train(ds, config);
    Trainer trainer(ds, config);
    const TrainState init = trainer.init_state();
    CHECK(result.state.theta.params == init.theta.params);
    CHECK(result.state.phi.params == init.phi.params);
    CHECK(result.state.iteration == 0);
    CHECK(result.history.empty());
  }
  SUBCASE("same seed gives bit-identical parameters") {
    TrainConfig config = tiny_config();
    config.iterations = 40;
    TrainResult a = train(ds, config);
    TrainResult b = train(ds, config);
    CHECK(a.state.theta.params == b.state.theta.params);
    CHECK(a.state.phi.params == b.state.phi.params);
    CHECK(a.state.p == b.state.p);
    CHECK(a.state.q == b.state.q);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].loss == b.history[i].loss);
    }
  }
  SUBCASE("history is recorded on the configured cadence") {
    TrainConfig config = tiny_config();
    config.iterations = 45;
    config.record_every = 10;
    TrainResult result = train(ds, config);
    REQUIRE(result.history.size() == 5);
    CHECK(result.history.front().iteration == 0);
    CHECK(result.history.back().iteration == 40);
  }
  SUBCASE("training improves validation transport cost") {
    SyntheticFamily family = SyntheticFamily::defaults(FamilyKind::HeteroscedasticSine, 71);
    family.params["dim"] = 1;
    Dataset train_split = synth_generate(family, 80, {1, 3}, 0);
    Dataset val_split = synth_generate(family, 15, {60, 60}, 1);
    val_split.normalizer = train_split.normalizer;

    TrainConfig config = tiny_config();
    config.batch = 16;
    config.mc = 4;
    config.hidden_width = 8;
    config.hidden_layers = 3;
    config.iterations = 1200;
    config.seed = 3;

    Trainer trainer(train_split, config);
    const TrainState init = trainer.init_state();
    const double before = mean_validation_w2sq(init.theta, val_split, 512, 9);
    TrainResult result = train(train_split, config);
    const double after = mean_validation_w2sq(result.state.theta, val_split, 512, 9);
    CHECK(after < before);
  }
}

TEST_CASE("sweep selection") {
  SyntheticFamily family = SyntheticFamily::defaults(FamilyKind::HeteroscedasticSine, 81);
  family.params["dim"] = 1;
  Dataset train_split = synth_generate(family, 60, {1, 3}, 0);
  Dataset val_split = synth_generate(family, 12, {50, 50}, 1);
  val_split.normalizer = train_split.normalizer;

  TrainConfig base = tiny_config();
  base.batch = 16;
  base.mc = 4;
  base.hidden_width = 8;
  base.hidden_layers = 3;
  base.iterations = 1500;
  base.sweep_fraction = 0.5;
  base.sweep_samples = 512;

  SUBCASE("single-point grid echoes the point") {
    SweepResult r = sweep(train_split, val_split, {base});
    CHECK(r.best_index == 0);
    CHECK(r.table.size() == 1);
    CHECK(r.best.h == base.h);
  }
  SUBCASE("duplicate grid points keep the first") {
    SweepResult r = sweep(train_split, val_split, {base, base});
    CHECK(r.best_index == 0);
    REQUIRE(r.table.size() == 2);
    CHECK(r.table[0].score == r.table[1].score);
  }
  SUBCASE("a degenerate flat bandwidth loses to a moderate one") {
    TrainConfig flat = base;
    flat.h = 50.0;  // CDF is almost constant over the data range
    SweepResult r = sweep(train_split, val_split, {flat, base});
    CHECK(r.best_index == 1);
    CHECK(r.best.h == base.h);
    CHECK(r.table[0].score > r.table[1].score);
  }
  SUBCASE("empty grid and empty validation are configuration errors") {
    CHECK_THROWS_AS(sweep(train_split, val_split, {}), ConfigError);
    Dataset empty_val;
    empty_val.dim = train_split.dim;
    CHECK_THROWS_AS(sweep(train_split, empty_val, {base}), ConfigError);
  }
}

TEST_CASE("train checkpoint round trip") {
  Dataset ds = tiny_dataset(12, 91);
  TrainConfig config = tiny_config();
  config.iterations = 10;
  TrainResult result = train(ds, config);

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.normalizer = ds.normalizer;
  ckpt.state = result.state;

  const fs::path path = fs::temp_directory_path() / "condgen_trainer_ckpt.bin";
  save_checkpoint(ckpt, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.config.h == config.h);
  CHECK(back.config.seed == config.seed);
  CHECK(back.normalizer.mean == ds.normalizer.mean);
  CHECK(back.state.theta.params == result.state.theta.params);
  CHECK(back.state.phi.params == result.state.phi.params);
  CHECK(back.state.p == result.state.p);
  CHECK(back.state.q == result.state.q);
  CHECK(back.state.iteration == result.state.iteration);
  CHECK(back.state.rng == result.state.rng);

  // identical bytes on re-save
  const fs::path path2 = fs::temp_directory_path() / "condgen_trainer_ckpt2.bin";
  save_checkpoint(back, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  fs::remove(path);
  fs::remove(path2);
}
