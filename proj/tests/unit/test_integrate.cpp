#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dqsr/errors.hpp"
#include "dqsr/integrate.hpp"
#include "support/reference.hpp"

using namespace dqsr;

namespace {

StochasticDraw xi(std::vector<double> v) { return StochasticDraw(std::move(v), DrawConvention::Xi); }
StochasticDraw lam(std::vector<double> v) { return StochasticDraw(std::move(v), DrawConvention::Lambda); }

ModelSpec two_state() { return {ModelKind::TwoState, 1.0, 0.1, 2}; }
ModelSpec single_lambda(std::size_t n) { return {ModelKind::SingleLambda, 1.0, 0.1, n}; }
ModelSpec sequential(std::size_t n, double eta) { return {ModelKind::Sequential, 1.0, eta, n}; }
ModelSpec bisection(std::size_t n, double eta) { return {ModelKind::Bisection, 1.0, eta, n}; }

std::vector<ModelSpec> all_models() {
  return {two_state(), single_lambda(4), sequential(4, 0.2), bisection(4, 0.2)};
}

std::optional<std::size_t> final_outcome(const WeightVector& w, const ModelSpec& model,
                                        const IntegratorConfig& cfg, SeedSpec seed) {
  Trajectory t(w, model, cfg, draw_for_trajectory(w, model, cfg, seed));
  while (t.advance()) {
  }
  return t.outcome();
}

std::vector<double> weights_vec(const State& s) {
  const auto w = weights_of(s);
  return {w.values().begin(), w.values().end()};
}

}  // namespace

TEST_CASE("config validation and form resolution") {
  IntegratorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.outcome_threshold = 0.5;
  CHECK_THROWS(cfg.validate());
  cfg.outcome_threshold = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.max_steps = 0;
  CHECK_THROWS(cfg.validate());

  cfg = {};
  CHECK(resolve_form(two_state(), cfg) == StateForm::Angle);
  CHECK(resolve_form(single_lambda(3), cfg) == StateForm::Angle);
  CHECK(resolve_form(sequential(3, 0.1), cfg) == StateForm::Amplitude);
  CHECK(resolve_form(bisection(4, 0.1), cfg) == StateForm::Amplitude);
  cfg.form = StateForm::Angle;
  CHECK(resolve_form(sequential(3, 0.1), cfg) == StateForm::Angle);
  CHECK_THROWS_AS(resolve_form(bisection(4, 0.1), cfg), ModelMismatch);
  cfg.form = StateForm::Amplitude;
  CHECK_THROWS_AS(resolve_form(single_lambda(3), cfg), ModelMismatch);
  CHECK(resolve_form(two_state(), cfg) == StateForm::Amplitude);

  CHECK(scheme_from_string("rk4") == Scheme::RK4);
  CHECK_THROWS(scheme_from_string("leapfrog"));
}

TEST_CASE("step: pointer states are fixed points of every model") {
  std::mt19937_64 rng(1);
  for (const auto& model : all_models()) {
    for (std::size_t j = 0; j < model.n_states; ++j) {
      const auto w = WeightVector::pointer(model.n_states, j);
      const auto draws = StochasticDraw(ref::random_uniform(rng, model.draw_count(), -1.0, 1.0),
                                        DrawConvention::Xi);
      for (Scheme scheme : {Scheme::Euler, Scheme::RK4}) {
        IntegratorConfig cfg;
        cfg.scheme = scheme;
        if (resolve_form(model, cfg) == StateForm::Angle) {
          const State s = angles_from_weights(w);
          CHECK(weights_vec(step(s, model, draws, cfg)) == weights_vec(s));
        }
        if (model.kind != ModelKind::SingleLambda) {
          const State s = amplitudes_from_weights(w);
          const auto after = weights_vec(step(s, model, draws, cfg));
          for (std::size_t k = 0; k < after.size(); ++k) CHECK(std::abs(after[k] - w[k]) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("step: two-state Euler is the explicit update") {
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  for (double rate : {1.0, 3.0}) {
    ModelSpec m = two_state();
    m.rate = rate;
    for (double theta : {0.3, 1.0, 2.5}) {
      for (double x : {-0.7, 0.1, 0.9}) {
        const auto s = std::get<AngleCoords>(step(AngleCoords({theta}), m, xi({x}), cfg));
        // dt is measured in units of 1/rate.
        const double h = cfg.dt / rate;
        CHECK(s[0] == theta + h * rate * std::sin(theta) * (x - std::cos(theta)));
      }
    }
  }
}

TEST_CASE("step: sequential N = 2 amplitude and angle forms agree") {
  // With lambda = (1 - xi) / 2 the angle flow runs at a quarter of the
  // amplitude flow's speed, so it gets four times the step.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = WeightVector(ref::random_weights(rng, 2));
    const double x = ref::random_uniform(rng, 1, -1.0, 1.0)[0];
    IntegratorConfig amp_cfg;
    amp_cfg.dt = 0.25e-3;
    amp_cfg.form = StateForm::Amplitude;
    IntegratorConfig ang_cfg = amp_cfg;
    ang_cfg.dt = 1e-3;
    ang_cfg.form = StateForm::Angle;
    const auto m = sequential(2, 0.1);
    const auto a = weights_vec(step(amplitudes_from_weights(w), m, xi({x}), amp_cfg));
    const auto b = weights_vec(step(angles_from_weights(w), m, lam({(1.0 - x) / 2.0}), ang_cfg));
    CHECK(std::abs(a[0] - b[0]) <= 1e-5);
    CHECK(std::abs(a[1] - b[1]) <= 1e-5);
  }
}

TEST_CASE("step: blowup is reported") {
  IntegratorConfig cfg;
  cfg.dt = 1e308;
  cfg.normalize_each_step = false;
  CHECK_THROWS_AS(step(amplitudes_from_weights(WeightVector({0.3, 0.2, 0.1, 0.4})), bisection(4, 0.5),
                       xi({0.9, -0.9}), cfg),
                  NumericalBlowup);
}

TEST_CASE("detect_outcome examples") {
  CHECK(detect_outcome(WeightVector({0.999, 0.001}), 0.99) == std::optional<std::size_t>(0));
  CHECK_FALSE(detect_outcome(WeightVector({0.6, 0.4}), 0.99).has_value());
  CHECK_FALSE(detect_outcome(WeightVector({0.5, 0.5}), 0.51).has_value());
  CHECK(detect_outcome(WeightVector({0.0, 0.0, 1.0}), 0.99) == std::optional<std::size_t>(2));
  CHECK_THROWS(detect_outcome(WeightVector({0.5, 0.5}), 0.5));
}

TEST_CASE("run_trajectory examples") {
  const WeightVector w({0.25, 0.75});
  IntegratorConfig cfg;
  auto r = run_trajectory(w, two_state(), cfg, xi({0.9}));
  CHECK(r.outcome == std::optional<std::size_t>(0));
  CHECK(r.halted_reason == HaltReason::ThresholdReached);
  r = run_trajectory(w, two_state(), cfg, xi({-0.9}));
  CHECK(r.outcome == std::optional<std::size_t>(1));

  r = run_trajectory(WeightVector({0.4, 0.35, 0.25}), single_lambda(3), cfg, lam({0.5}));
  CHECK(r.outcome == std::optional<std::size_t>(1));
  r = run_trajectory(WeightVector({0.4, 0.35, 0.25}), single_lambda(3), cfg, lam({0.3}));
  CHECK(r.outcome == std::optional<std::size_t>(0));
  r = run_trajectory(WeightVector({0.4, 0.35, 0.25}), single_lambda(3), cfg, lam({0.9}));
  CHECK(r.outcome == std::optional<std::size_t>(2));
}

TEST_CASE("trajectory record invariants") {
  IntegratorConfig cfg;
  for (std::uint64_t i = 0; i < 20; ++i) {
    for (const auto& model : all_models()) {
      const auto w = model.n_states == 2 ? WeightVector({0.3, 0.7}) : WeightVector({0.1, 0.2, 0.3, 0.4});
      const auto r = run_trajectory(w, model, cfg, SeedSpec{9, i});
      REQUIRE(r.times.size() == r.weights.size());
      CHECK(r.times.front() == 0.0);
      for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(r.weights.front()[j] - w[j]) <= 1e-12);
      for (std::size_t k = 1; k < r.times.size(); ++k) CHECK(r.times[k] > r.times[k - 1]);
      CHECK(r.outcome.has_value() == (r.halted_reason == HaltReason::ThresholdReached));
      REQUIRE(r.outcome.has_value());
      CHECK(r.weights.back()[*r.outcome] >= cfg.outcome_threshold);
      CHECK(r.steps_taken + 1 == r.times.size());
      // Same seed, same record.
      const auto again = run_trajectory(w, model, cfg, SeedSpec{9, i});
      CHECK(again.times == r.times);
      CHECK(again.outcome == r.outcome);
      CHECK(again.draws == r.draws);
    }
  }

  cfg.max_steps = 10;
  const auto cut = run_trajectory(WeightVector({0.5, 0.5}), two_state(), cfg, xi({0.01}));
  CHECK(cut.halted_reason == HaltReason::MaxSteps);
  CHECK_FALSE(cut.outcome.has_value());
  CHECK(cut.steps_taken == 10);

  cfg = {};
  cfg.record_stride = 7;
  const auto sparse = run_trajectory(WeightVector({0.3, 0.7}), two_state(), cfg, xi({0.2}));
  CHECK(sparse.times.size() == 1 + sparse.steps_taken / 7 + (sparse.steps_taken % 7 != 0 ? 1 : 0));
  CHECK(sparse.weights.back()[*sparse.outcome] >= cfg.outcome_threshold);
}

TEST_CASE("trajectory rejects inconsistent inputs") {
  IntegratorConfig cfg;
  CHECK_THROWS_AS(run_trajectory(WeightVector({0.5, 0.5}), single_lambda(3), cfg, lam({0.3})),
                  ModelMismatch);
  CHECK_THROWS_AS(run_trajectory(WeightVector({0.5, 0.25, 0.25}), sequential(3, 0.1), cfg, xi({0.3})),
                  ModelMismatch);
}

TEST_CASE("property: two-state basins on a 100 x 100 grid") {
  IntegratorConfig cfg;
  int mismatches = 0;
  for (int a = 0; a < 100; ++a) {
    const double theta0 = (a + 0.5) * kPi / 100.0;
    const auto w = weights_from_angles(AngleCoords({theta0}));
    for (int b = 0; b < 100; ++b) {
      const double x = -1.0 + (b + 0.5) * 2.0 / 100.0;
      if (x == std::cos(theta0)) continue;
      const auto r = run_trajectory(w, two_state(), cfg, xi({x}));
      REQUIRE(r.outcome.has_value());
      const std::size_t expected = x > std::cos(theta0) ? 0 : 1;
      if (*r.outcome != expected) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("property: single-lambda boundary oracle") {
  std::mt19937_64 rng(31);
  for (Scheme scheme : {Scheme::Euler, Scheme::RK4}) {
    IntegratorConfig cfg;
    cfg.scheme = scheme;
    for (std::size_t n : {3u, 4u, 6u}) {
      for (int trial = 0; trial < 50; ++trial) {
        // Every block wider than the 1e-3 probe offset.
        const WeightVector w(ref::random_weights(rng, n, 0.005));
        const auto c = separatrix_values(w);
        for (std::size_t k = 0; k < c.size(); ++k) {
          const auto below = run_trajectory(w, single_lambda(n), cfg, lam({c[k] - 1e-3}));
          const auto above = run_trajectory(w, single_lambda(n), cfg, lam({c[k] + 1e-3}));
          CHECK(below.outcome == std::optional<std::size_t>(k));
          CHECK(above.outcome == std::optional<std::size_t>(k + 1));
        }
      }
    }
  }
}

TEST_CASE("property: monotone basins along trajectories") {
  IntegratorConfig cfg;
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
    const WeightVector w(ref::random_weights(rng, n, 0.01));
    ModelSpec model = trial % 2 == 0 ? single_lambda(n) : sequential(n, 0.3);
    if (model.kind == ModelKind::Sequential) cfg.form = StateForm::Angle;
    Trajectory t(w, model, cfg, draw_for_trajectory(w, model, cfg, {5, static_cast<std::uint64_t>(trial)}));
    const auto start = std::get<AngleCoords>(t.state());
    std::vector<double> prev(start.values().begin(), start.values().end());
    std::vector<int> sign(n - 1, 0);
    bool flipped = false;
    while (t.advance()) {
      const auto now = std::get<AngleCoords>(t.state());
      for (std::size_t m = 0; m + 1 < n; ++m) {
        const double d = now[m] - prev[m];
        const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
        if (s != 0 && sign[m] != 0 && s != sign[m]) flipped = true;
        if (s != 0) sign[m] = s;
        prev[m] = now[m];
      }
    }
    CHECK_FALSE(flipped);
    CHECK(t.halt_reason() == HaltReason::ThresholdReached);
    cfg.form.reset();
  }
}

TEST_CASE("property: per-step normalization does not change the dynamics") {
  for (const auto& model : {sequential(3, 0.2), sequential(5, 0.3), bisection(4, 0.2), bisection(8, 0.3)}) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      std::mt19937_64 rng(i);
      const WeightVector w(ref::random_weights(rng, model.n_states, 0.01));
      IntegratorConfig on;
      IntegratorConfig off;
      off.normalize_each_step = false;
      const auto a = run_trajectory(w, model, on, SeedSpec{77, i});
      const auto b = run_trajectory(w, model, off, SeedSpec{77, i});
      CHECK(a.outcome == b.outcome);
      REQUIRE(a.weights.size() == b.weights.size());
      double worst = 0.0;
      for (std::size_t k = 0; k < a.weights.size(); ++k) {
        for (std::size_t j = 0; j < model.n_states; ++j) {
          worst = std::max(worst, std::abs(a.weights[k][j] - b.weights[k][j]));
        }
      }
      CHECK(worst <= 1e-8);
    }
  }
}

TEST_CASE("property: amplitude phases are constant in time") {
  std::mt19937_64 rng(8);
  for (const auto& model : {sequential(4, 0.2), bisection(4, 0.2), two_state()}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto w = ref::random_weights(rng, model.n_states, 0.01);
      const auto phases = ref::random_uniform(rng, model.n_states, -3.0, 3.0);
      std::vector<Complex> amps;
      for (std::size_t j = 0; j < w.size(); ++j) amps.push_back(std::polar(std::sqrt(w[j]), phases[j]));
      IntegratorConfig cfg;
      cfg.form = StateForm::Amplitude;
      const auto draws = draw_for_trajectory(WeightVector(w), model, cfg, {3, static_cast<std::uint64_t>(trial)});
      Trajectory t(State(StateVector(amps)), model, cfg, draws);
      double worst = 0.0;
      while (t.advance()) {
        const auto s = std::get<StateVector>(t.state());
        for (std::size_t j = 0; j < s.size(); ++j) {
          if (std::abs(s[j]) < 1e-150) continue;
          worst = std::max(worst, std::abs(std::remainder(std::arg(s[j]) - phases[j], 2 * kPi)));
        }
      }
      CHECK(worst <= 1e-10);
    }
  }
}

TEST_CASE("property: checkpoint and resume are bit-identical") {
  for (const auto& model : all_models()) {
    for (Scheme scheme : {Scheme::Euler, Scheme::RK4}) {
      IntegratorConfig cfg;
      cfg.scheme = scheme;
      const auto w = model.n_states == 2 ? WeightVector({0.45, 0.55}) : WeightVector({0.3, 0.2, 0.24, 0.26});
      const auto draws = draw_for_trajectory(w, model, cfg, {1, 2});
      Trajectory full(w, model, cfg, draws);
      for (int k = 0; k < 150 && full.advance(); ++k) {
      }
      // Through text, as a file would.
      const auto text = full.checkpoint().dump();
      Trajectory resumed = Trajectory::restore(nlohmann::json::parse(text));
      CHECK(resumed.steps() == full.steps());
      bool identical = true;
      for (;;) {
        const bool a = full.advance();
        const bool b = resumed.advance();
        if (a != b) identical = false;
        for (std::size_t j = 0; j < model.n_states; ++j) {
          if (full.weights()[j] != resumed.weights()[j]) identical = false;
        }
        if (full.time() != resumed.time()) identical = false;
        if (!a || !b) break;
      }
      CHECK(identical);
      CHECK(full.outcome() == resumed.outcome());
      CHECK(full.steps() == resumed.steps());
    }
  }
}

TEST_CASE("property: outcomes are invariant under rate x 10") {
  IntegratorConfig cfg;
  for (auto model : all_models()) {
    const auto w = model.n_states == 2 ? WeightVector({0.35, 0.65}) : WeightVector({0.15, 0.25, 0.35, 0.25});
    int agree = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto slow = run_trajectory(w, model, cfg, SeedSpec{100, i});
      ModelSpec fast_model = model;
      fast_model.rate = model.rate * 10.0;
      const auto fast = run_trajectory(w, fast_model, cfg, SeedSpec{100, i});
      if (slow.outcome.has_value() && slow.outcome == fast.outcome) ++agree;
      CHECK(fast.times.back() == doctest::Approx(slow.times.back() / 10.0));
    }
    CHECK(agree == 100);
  }
}

TEST_CASE("property: halving dt changes fewer than 0.1% of outcomes") {
  constexpr std::uint64_t n = 10'000;
  for (const auto& model : all_models()) {
    const auto w = model.n_states == 2 ? WeightVector({0.3, 0.7}) : WeightVector({0.1, 0.2, 0.3, 0.4});
    IntegratorConfig coarse;
    IntegratorConfig fine;
    fine.dt = coarse.dt / 2.0;
    std::uint64_t changed = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto a = final_outcome(w, model, coarse, SeedSpec{2718, i});
      const auto b = final_outcome(w, model, fine, SeedSpec{2718, i});
      if (!a.has_value() || a != b) ++changed;
    }
    INFO("model " << to_string(model.kind) << " changed " << changed);
    CHECK(changed * 1000 < n);
  }
}
