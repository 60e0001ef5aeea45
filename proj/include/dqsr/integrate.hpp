#pragma once

// Single-trajectory integration: explicit Euler / RK4 steps of a model's
// velocity field, outcome detection by weight threshold, and recording.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dqsr/generators.hpp"
#include "dqsr/state.hpp"
#include "dqsr/stochastic.hpp"

namespace dqsr {

enum class Scheme { Euler, RK4 };
// Angle form integrates generalized Bloch angles; amplitude form integrates
// d alpha_j / dt = rate * G_j * alpha_j.
enum class StateForm { Angle, Amplitude };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);
std::string_view to_string(StateForm form);
StateForm state_form_from_string(std::string_view name);

inline constexpr double kDefaultDt = 0.01;
inline constexpr double kDefaultOutcomeThreshold = 1.0 - 1e-4;
inline constexpr std::uint64_t kDefaultMaxSteps = 10'000'000;

struct IntegratorConfig {
  // Time step in units of 1/rate.
  double dt = kDefaultDt;
  Scheme scheme = Scheme::Euler;
  std::uint64_t max_steps = kDefaultMaxSteps;
  double outcome_threshold = kDefaultOutcomeThreshold;
  bool normalize_each_step = true;
  // Unset: angle form for TwoState/SingleLambda, amplitude form otherwise.
  std::optional<StateForm> form;
  // Keep every k-th step in a TrajectoryRecord (first and last always kept).
  std::uint64_t record_stride = 1;

  void validate() const;
};

// Form actually used for `model` under `cfg`; throws ModelMismatch for
// unsupported combinations (SingleLambda amplitude form, Bisection angle form).
StateForm resolve_form(const ModelSpec& model, const IntegratorConfig& cfg);

using State = std::variant<AngleCoords, StateVector>;

WeightVector weights_of(const State& state);

// One explicit step of cfg.scheme. Angle-form results are clamped to [0, pi];
// single-lambda velocities are scaled down as a whole so that no angle moves
// more than kThetaStepCap per step.
// Throws NumericalBlowup on non-finite results.
State step(const State& state, const ModelSpec& model, const StochasticDraw& draws,
           const IntegratorConfig& cfg);

// Index j with w_j >= threshold, if any. threshold must exceed 0.5.
std::optional<std::size_t> detect_outcome(const WeightVector& weights, double threshold);

enum class HaltReason { Running, ThresholdReached, MaxSteps };

std::string_view to_string(HaltReason reason);

// Stepper for one realisation. The stochastic variables are fixed at
// construction (infinite noise correlation time).
class Trajectory {
 public:
  Trajectory(const State& initial, const ModelSpec& model, const IntegratorConfig& cfg,
             const StochasticDraw& draws);
  Trajectory(const WeightVector& initial, const ModelSpec& model, const IntegratorConfig& cfg,
             const StochasticDraw& draws);

  // Advances one step unless already halted. Returns true while running.
  bool advance();
  // Takes one step regardless of halt status, then re-evaluates the halt.
  void force_step();

  double time() const noexcept;
  std::uint64_t steps() const noexcept { return steps_; }
  // Normalized weights of the current state.
  std::span<const double> weights() const noexcept { return weights_; }
  // Index of the largest weight (lowest index on ties).
  std::size_t leading_index() const noexcept;
  bool halted() const noexcept { return halt_ != HaltReason::Running; }
  HaltReason halt_reason() const noexcept { return halt_; }
  std::optional<std::size_t> outcome() const noexcept { return outcome_; }

  StateForm form() const noexcept { return form_; }
  const ModelSpec& model() const noexcept { return model_; }
  const IntegratorConfig& config() const noexcept { return cfg_; }
  // Draws in the convention the integrated equations use.
  const StochasticDraw& draws() const noexcept { return draws_; }
  State state() const;

  // Exact snapshot of the stepper; restore() resumes bit-identically.
  nlohmann::json checkpoint() const;
  static Trajectory restore(const nlohmann::json& snapshot);

 private:
  void refresh_weights();
  void check_halt();
  void velocity(std::span<const double> coords, std::span<double> out);
  void amplitude_velocity(std::span<const Complex> amps, std::span<Complex> out);
  void step_angles();
  void step_amplitudes();

  ModelSpec model_;
  IntegratorConfig cfg_;
  StateForm form_;
  StochasticDraw draws_;
  double step_size_;  // dt / rate, in absolute time

  std::vector<double> angles_;
  std::vector<Complex> amps_;
  std::vector<double> weights_;
  std::uint64_t steps_ = 0;
  HaltReason halt_ = HaltReason::Running;
  std::optional<std::size_t> outcome_;

  // RK4 / kernel scratch.
  std::vector<double> scratch_w_;
  std::vector<double> k_[4];
  std::vector<double> tmp_;
  std::vector<double> stage_;
  std::vector<Complex> ck_[4];
  std::vector<Complex> ctmp_;
  bool limited_ = false;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<WeightVector> weights;
  std::optional<std::size_t> outcome;
  std::uint64_t steps_taken = 0;
  HaltReason halted_reason = HaltReason::MaxSteps;
  // Draws in the convention of the integrated equations.
  StochasticDraw draws{{0.0}, DrawConvention::Xi};
};

// Draws the model's stochastic variables from `seed` (redrawing the
// measure-zero values that sit exactly on a separatrix of `initial`).
StochasticDraw draw_for_trajectory(const WeightVector& initial, const ModelSpec& model,
                                   const IntegratorConfig& cfg, SeedSpec seed);

TrajectoryRecord run_trajectory(const WeightVector& initial, const ModelSpec& model,
                                const IntegratorConfig& cfg, SeedSpec seed);
// Same with explicitly supplied draws (any convention; converted as needed).
TrajectoryRecord run_trajectory(const WeightVector& initial, const ModelSpec& model,
                                const IntegratorConfig& cfg, const StochasticDraw& draws);

}  // namespace dqsr
