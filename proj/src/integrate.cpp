#include "dqsr/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dqsr/errors.hpp"

namespace dqsr {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::Euler ? "euler" : "rk4";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "euler") return Scheme::Euler;
  if (name == "rk4") return Scheme::RK4;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "' (expected euler or rk4)");
}

std::string_view to_string(StateForm form) {
  return form == StateForm::Angle ? "angle" : "amplitude";
}

StateForm state_form_from_string(std::string_view name) {
  if (name == "angle") return StateForm::Angle;
  if (name == "amplitude") return StateForm::Amplitude;
  throw std::invalid_argument("unknown state form '" + std::string(name) +
                              "' (expected angle or amplitude)");
}

std::string_view to_string(HaltReason reason) {
  switch (reason) {
    case HaltReason::Running: return "running";
    case HaltReason::ThresholdReached: return "threshold_reached";
    case HaltReason::MaxSteps: return "max_steps";
  }
  return "unknown";
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be >= 1");
  if (!(outcome_threshold > 0.5 && outcome_threshold < 1.0)) {
    throw std::invalid_argument("outcome_threshold must lie in (0.5, 1)");
  }
  if (record_stride == 0) throw std::invalid_argument("record_stride must be >= 1");
}

StateForm resolve_form(const ModelSpec& model, const IntegratorConfig& cfg) {
  const StateForm fallback = (model.kind == ModelKind::TwoState || model.kind == ModelKind::SingleLambda)
                                 ? StateForm::Angle
                                 : StateForm::Amplitude;
  const StateForm form = cfg.form.value_or(fallback);
  if (model.kind == ModelKind::SingleLambda && form == StateForm::Amplitude) {
    throw ModelMismatch("single_lambda model is only defined in angle form");
  }
  if (model.kind == ModelKind::Bisection && form == StateForm::Angle) {
    throw ModelMismatch("bisection model is only defined in amplitude form");
  }
  return form;
}

WeightVector weights_of(const State& state) {
  if (const auto* angles = std::get_if<AngleCoords>(&state)) return weights_from_angles(*angles);
  return born_weights(std::get<StateVector>(state));
}

std::optional<std::size_t> detect_outcome(const WeightVector& weights, double threshold) {
  if (!(threshold > 0.5)) throw std::invalid_argument("outcome threshold must exceed 0.5");
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] >= threshold) return j;
  }
  return std::nullopt;
}

namespace {

DrawConvention integrated_convention(ModelKind kind, StateForm form) {
  switch (kind) {
    case ModelKind::TwoState:
    case ModelKind::Bisection: return DrawConvention::Xi;
    case ModelKind::SingleLambda: return DrawConvention::Lambda;
    case ModelKind::Sequential:
      return form == StateForm::Angle ? DrawConvention::Lambda : DrawConvention::Xi;
  }
  return DrawConvention::Xi;
}

void angle_weights(std::span<const double> angles, std::span<double> w) {
  double tail = 1.0;
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double s = std::sin(angles[j] / 2.0);
    const double c = std::cos(angles[j] / 2.0);
    w[j] = s * s * tail;
    tail *= c * c;
  }
  w[angles.size()] = tail;
}

void amplitude_weights(std::span<const Complex> amps, std::span<double> w) {
  double norm2 = 0.0;
  for (std::size_t j = 0; j < amps.size(); ++j) {
    w[j] = std::norm(amps[j]);
    norm2 += w[j];
  }
  for (auto& x : w) x /= norm2;
}

void require_finite(std::span<const double> xs, std::uint64_t step) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericalBlowup(step, "angle coordinate");
  }
}

void require_finite(std::span<const Complex> xs, std::uint64_t step) {
  double norm2 = 0.0;
  for (const auto& x : xs) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) throw NumericalBlowup(step, "amplitude");
    norm2 += std::norm(x);
  }
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw NumericalBlowup(step, "state norm");
}

std::vector<double> json_doubles(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

// The single-lambda field diverges on the separatrices L_n = 0, which the exact
// flow can therefore never cross. A common positive factor on all components
// only reparametrizes time, so the velocity is scaled down as a whole until
// one step moves no angle by more than kThetaStepCap and takes no L_n more than
// half way towards zero (first-order estimate dL_n = P_n sum_{m<=n} tan(t_m/2) dt_m).
// Returns whether the velocity was scaled.
bool limit_single_lambda_step(std::span<const double> angles, double lambda, double h,
                              std::span<double> v) {
  double scale = 1.0;
  double prod = 1.0;
  double slope = 0.0;
  for (std::size_t n = 0; n < angles.size(); ++n) {
    const double half = angles[n] / 2.0;
    const double c = std::cos(half);
    prod *= c * c;
    if (v[n] != 0.0) slope += std::tan(half) * v[n];
    const double gap = 1.0 - prod - lambda;
    const double shift = h * prod * slope;  // change of L_n per step
    if (shift != 0.0 && (shift > 0.0) != (gap > 0.0)) {
      scale = std::min(scale, 0.5 * std::abs(gap) / std::abs(shift));
    }
    const double move = h * std::abs(v[n]);
    if (move * scale > kThetaStepCap) scale = kThetaStepCap / move;
  }
  if (scale >= 1.0) return false;
  for (auto& x : v) x *= scale;
  return true;
}

}  // namespace

Trajectory::Trajectory(const State& initial, const ModelSpec& model, const IntegratorConfig& cfg,
                       const StochasticDraw& draws)
    : model_(model),
      cfg_(cfg),
      form_(resolve_form(model, cfg)),
      draws_(draws.as(integrated_convention(model.kind, form_))),
      step_size_(cfg.dt / model.rate) {
  model_.validate();
  cfg_.validate();
  const std::size_t n = model_.n_states;
  if (draws_.size() != model_.draw_count()) {
    throw ModelMismatch(std::string(to_string(model_.kind)) + " model needs " +
                        std::to_string(model_.draw_count()) + " stochastic values, got " +
                        std::to_string(draws_.size()));
  }
  const WeightVector w0 = weights_of(initial);
  if (w0.size() != n) {
    throw ModelMismatch("initial state has " + std::to_string(w0.size()) + " components, model has " +
                        std::to_string(n));
  }
  if (form_ == StateForm::Angle) {
    const AngleCoords angles = std::holds_alternative<AngleCoords>(initial)
                                   ? std::get<AngleCoords>(initial)
                                   : angles_from_weights(w0);
    angles_.assign(angles.values().begin(), angles.values().end());
    for (auto& k : k_) k.resize(n - 1);
    tmp_.resize(n - 1);
    stage_.resize(n - 1);
  } else {
    const StateVector sv = std::holds_alternative<StateVector>(initial)
                               ? std::get<StateVector>(initial)
                               : amplitudes_from_weights(w0);
    amps_.assign(sv.amplitudes().begin(), sv.amplitudes().end());
    for (auto& k : ck_) k.resize(n);
    ctmp_.resize(n);
    scratch_w_.resize(n);
    tmp_.resize(n);
  }
  weights_.resize(n);
  refresh_weights();
  check_halt();
}

Trajectory::Trajectory(const WeightVector& initial, const ModelSpec& model,
                       const IntegratorConfig& cfg, const StochasticDraw& draws)
    : Trajectory(resolve_form(model, cfg) == StateForm::Angle ? State(angles_from_weights(initial))
                                                             : State(amplitudes_from_weights(initial)),
                 model, cfg, draws) {}

double Trajectory::time() const noexcept { return static_cast<double>(steps_) * step_size_; }

std::size_t Trajectory::leading_index() const noexcept {
  return static_cast<std::size_t>(std::max_element(weights_.begin(), weights_.end()) - weights_.begin());
}

State Trajectory::state() const {
  if (form_ == StateForm::Angle) return AngleCoords(angles_);
  return StateVector(amps_);
}

void Trajectory::refresh_weights() {
  if (form_ == StateForm::Angle) {
    angle_weights(angles_, weights_);
  } else {
    amplitude_weights(amps_, weights_);
  }
}

void Trajectory::check_halt() {
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    if (weights_[j] >= cfg_.outcome_threshold) {
      outcome_ = j;
      halt_ = HaltReason::ThresholdReached;
      return;
    }
  }
  if (steps_ >= cfg_.max_steps) halt_ = HaltReason::MaxSteps;
}

void Trajectory::velocity(std::span<const double> coords, std::span<double> out) {
  switch (model_.kind) {
    case ModelKind::TwoState:
      out[0] = theta_velocity_two_state(coords[0], draws_[0], model_.rate);
      break;
    case ModelKind::SingleLambda:
      kernels::theta_velocity_single_lambda(coords, draws_[0], model_.rate, out);
      if (limit_single_lambda_step(coords, draws_[0], step_size_, out)) limited_ = true;
      break;
    case ModelKind::Sequential:
      kernels::theta_velocity_sequential(coords, draws_.values(), model_.eta, model_.rate, out);
      break;
    case ModelKind::Bisection:
      throw ModelMismatch("bisection model has no angle form");
  }
}

void Trajectory::amplitude_velocity(std::span<const Complex> amps, std::span<Complex> out) {
  amplitude_weights(amps, scratch_w_);
  auto& g = tmp_;
  switch (model_.kind) {
    case ModelKind::TwoState:
      kernels::g_two_state(scratch_w_, draws_[0], g);
      break;
    case ModelKind::Sequential:
      kernels::g_sequential(scratch_w_, draws_.values(), model_.eta, g);
      break;
    case ModelKind::Bisection:
      kernels::g_bisection(scratch_w_, draws_.values(), model_.eta, g);
      break;
    case ModelKind::SingleLambda:
      throw ModelMismatch("single_lambda model has no amplitude form");
  }
  for (std::size_t j = 0; j < amps.size(); ++j) out[j] = model_.rate * g[j] * amps[j];
}

void Trajectory::step_angles() {
  const double h = step_size_;
  const std::size_t m = angles_.size();
  auto& incr = tmp_;
  if (cfg_.scheme == Scheme::Euler) {
    velocity(angles_, k_[0]);
    for (std::size_t i = 0; i < m; ++i) incr[i] = h * k_[0][i];
  } else {
    auto& stage = stage_;
    limited_ = false;
    velocity(angles_, k_[0]);
    for (std::size_t i = 0; i < m; ++i) stage[i] = angles_[i] + 0.5 * h * k_[0][i];
    velocity(stage, k_[1]);
    for (std::size_t i = 0; i < m; ++i) stage[i] = angles_[i] + 0.5 * h * k_[1][i];
    velocity(stage, k_[2]);
    for (std::size_t i = 0; i < m; ++i) stage[i] = angles_[i] + h * k_[2][i];
    velocity(stage, k_[3]);
    for (std::size_t i = 0; i < m; ++i) {
      incr[i] = h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
    }
  }
  require_finite(incr, steps_ + 1);
  if (model_.kind == ModelKind::SingleLambda && cfg_.scheme != Scheme::Euler) {
    // Close to a separatrix the higher stages sample a strongly curved field
    // and may land on its far side; take the limited first stage instead.
    bool reversed = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (k_[0][i] * incr[i] < 0.0 || (k_[0][i] == 0.0 && incr[i] != 0.0)) reversed = true;
    }
    if (reversed || limited_) {
      for (std::size_t i = 0; i < m; ++i) incr[i] = h * k_[0][i];
    }
  }
  for (std::size_t i = 0; i < m; ++i) angles_[i] = std::clamp(angles_[i] + incr[i], 0.0, kPi);
}

void Trajectory::step_amplitudes() {
  const double h = step_size_;
  const std::size_t n = amps_.size();
  if (cfg_.scheme == Scheme::Euler) {
    amplitude_velocity(amps_, ck_[0]);
    for (std::size_t j = 0; j < n; ++j) amps_[j] += h * ck_[0][j];
  } else {
    amplitude_velocity(amps_, ck_[0]);
    for (std::size_t j = 0; j < n; ++j) ctmp_[j] = amps_[j] + 0.5 * h * ck_[0][j];
    amplitude_velocity(ctmp_, ck_[1]);
    for (std::size_t j = 0; j < n; ++j) ctmp_[j] = amps_[j] + 0.5 * h * ck_[1][j];
    amplitude_velocity(ctmp_, ck_[2]);
    for (std::size_t j = 0; j < n; ++j) ctmp_[j] = amps_[j] + h * ck_[2][j];
    amplitude_velocity(ctmp_, ck_[3]);
    for (std::size_t j = 0; j < n; ++j) {
      amps_[j] += h / 6.0 * (ck_[0][j] + 2.0 * ck_[1][j] + 2.0 * ck_[2][j] + ck_[3][j]);
    }
  }
  require_finite(amps_, steps_ + 1);
  if (cfg_.normalize_each_step) {
    double norm2 = 0.0;
    for (const auto& a : amps_) norm2 += std::norm(a);
    const double scale = 1.0 / std::sqrt(norm2);
    for (auto& a : amps_) a *= scale;
  }
}

bool Trajectory::advance() {
  if (halted()) return false;
  force_step();
  return !halted();
}

void Trajectory::force_step() {
  if (form_ == StateForm::Angle) {
    step_angles();
  } else {
    step_amplitudes();
  }
  ++steps_;
  refresh_weights();
  halt_ = HaltReason::Running;
  outcome_.reset();
  check_halt();
}

nlohmann::json Trajectory::checkpoint() const {
  nlohmann::json j;
  j["model"] = {{"kind", to_string(model_.kind)},
                {"rate", model_.rate},
                {"eta", model_.eta},
                {"n_states", model_.n_states}};
  j["config"] = {{"dt", cfg_.dt},
                 {"scheme", to_string(cfg_.scheme)},
                 {"max_steps", cfg_.max_steps},
                 {"outcome_threshold", cfg_.outcome_threshold},
                 {"normalize_each_step", cfg_.normalize_each_step},
                 {"form", to_string(form_)},
                 {"record_stride", cfg_.record_stride}};
  j["draws"] = std::vector<double>(draws_.values().begin(), draws_.values().end());
  j["draw_convention"] = draws_.convention() == DrawConvention::Xi ? "xi" : "lambda";
  j["steps"] = steps_;
  if (form_ == StateForm::Angle) {
    j["angles"] = angles_;
  } else {
    std::vector<double> re, im;
    for (const auto& a : amps_) {
      re.push_back(a.real());
      im.push_back(a.imag());
    }
    j["amplitudes_re"] = re;
    j["amplitudes_im"] = im;
  }
  return j;
}

Trajectory Trajectory::restore(const nlohmann::json& snapshot) {
  ModelSpec model;
  const auto& jm = snapshot.at("model");
  model.kind = model_kind_from_string(jm.at("kind").get<std::string>());
  model.rate = jm.at("rate").get<double>();
  model.eta = jm.at("eta").get<double>();
  model.n_states = jm.at("n_states").get<std::size_t>();

  IntegratorConfig cfg;
  const auto& jc = snapshot.at("config");
  cfg.dt = jc.at("dt").get<double>();
  cfg.scheme = scheme_from_string(jc.at("scheme").get<std::string>());
  cfg.max_steps = jc.at("max_steps").get<std::uint64_t>();
  cfg.outcome_threshold = jc.at("outcome_threshold").get<double>();
  cfg.normalize_each_step = jc.at("normalize_each_step").get<bool>();
  cfg.form = state_form_from_string(jc.at("form").get<std::string>());
  cfg.record_stride = jc.at("record_stride").get<std::uint64_t>();

  const auto convention =
      snapshot.at("draw_convention").get<std::string>() == "xi" ? DrawConvention::Xi : DrawConvention::Lambda;
  StochasticDraw draws(json_doubles(snapshot.at("draws")), convention);

  State state = *cfg.form == StateForm::Angle
                    ? State(AngleCoords(json_doubles(snapshot.at("angles"))))
                    : State([&] {
                        const auto re = json_doubles(snapshot.at("amplitudes_re"));
                        const auto im = json_doubles(snapshot.at("amplitudes_im"));
                        std::vector<Complex> amps(re.size());
                        for (std::size_t k = 0; k < amps.size(); ++k) amps[k] = Complex(re[k], im[k]);
                        return StateVector(std::move(amps));
                      }());
  Trajectory t(state, model, cfg, draws);
  t.steps_ = snapshot.at("steps").get<std::uint64_t>();
  t.halt_ = HaltReason::Running;
  t.outcome_.reset();
  t.check_halt();
  return t;
}

State step(const State& state, const ModelSpec& model, const StochasticDraw& draws,
           const IntegratorConfig& cfg) {
  IntegratorConfig one = cfg;
  one.form = std::holds_alternative<AngleCoords>(state) ? StateForm::Angle : StateForm::Amplitude;
  Trajectory t(state, model, one, draws);
  t.force_step();
  return t.state();
}

StochasticDraw draw_for_trajectory(const WeightVector& initial, const ModelSpec& model,
                                   const IntegratorConfig& cfg, SeedSpec seed) {
  const StateForm form = resolve_form(model, cfg);
  const DrawConvention convention = integrated_convention(model.kind, form);
  RandomStream stream(seed);
  for (;;) {
    StochasticDraw draws = stream.draw(model.draw_count(), convention);
    if (form != StateForm::Angle) return draws;
    // Reject draws pinned exactly on a separatrix: a non-pole angle with zero
    // velocity would never leave it.
    const auto angles = angles_from_weights(initial);
    std::vector<double> v(angles.size());
    switch (model.kind) {
      case ModelKind::TwoState:
        v[0] = theta_velocity_two_state(angles[0], draws[0], model.rate);
        break;
      case ModelKind::SingleLambda:
        kernels::theta_velocity_single_lambda(angles.values(), draws[0], model.rate, v);
        break;
      case ModelKind::Sequential:
        kernels::theta_velocity_sequential(angles.values(), draws.values(), model.eta, model.rate, v);
        break;
      case ModelKind::Bisection:
        break;
    }
    bool pinned = false;
    for (std::size_t m = 0; m < v.size(); ++m) {
      if (v[m] == 0.0 && angles[m] > 0.0 && angles[m] < kPi) pinned = true;
    }
    if (!pinned) return draws;
  }
}

TrajectoryRecord run_trajectory(const WeightVector& initial, const ModelSpec& model,
                                const IntegratorConfig& cfg, const StochasticDraw& draws) {
  Trajectory t(initial, model, cfg, draws);
  TrajectoryRecord record;
  record.draws = t.draws();
  auto snapshot = [&](const Trajectory& tr) {
    record.times.push_back(tr.time());
    record.weights.push_back(WeightVector::normalized({tr.weights().begin(), tr.weights().end()}));
  };
  snapshot(t);
  while (t.advance()) {
    if (t.steps() % cfg.record_stride == 0) snapshot(t);
  }
  if (t.steps() > 0 && record.times.back() != t.time()) snapshot(t);
  record.outcome = t.outcome();
  record.steps_taken = t.steps();
  record.halted_reason = t.halt_reason();
  return record;
}

TrajectoryRecord run_trajectory(const WeightVector& initial, const ModelSpec& model,
                                const IntegratorConfig& cfg, SeedSpec seed) {
  return run_trajectory(initial, model, cfg, draw_for_trajectory(initial, model, cfg, seed));
}

}  // namespace dqsr
