#pragma once

// Right-hand sides of the four collapse models: the two-state flow, the
// single-lambda N-state flow, the sequential (N-1 variable) hierarchy and the
// bisection (log2 N variable) hierarchy.
//
// All generators are real and diagonal in the pointer basis, so amplitude
// phases are carried through the dynamics unchanged.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqsr/state.hpp"

namespace dqsr {

// Below this |L_n| the single-lambda velocity denominator is pinned to
// +-kSeparatrixEpsilon.
inline constexpr double kSeparatrixEpsilon = 1e-9;
// Largest angle increment a single-lambda step may take (radians).
inline constexpr double kThetaStepCap = 0.1;
// A sequential stage whose residual tail P_j falls below this contributes 0.
inline constexpr double kTailEpsilon = 1e-12;

enum class DrawConvention {
  Xi,      // values in [-1, 1]
  Lambda,  // values in [0, 1], lambda = (xi + 1) / 2
};

class StochasticDraw {
 public:
  StochasticDraw(std::vector<double> values, DrawConvention convention);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  DrawConvention convention() const noexcept { return convention_; }

  // Same draw expressed in another convention.
  StochasticDraw as(DrawConvention target) const;

  friend bool operator==(const StochasticDraw&, const StochasticDraw&) = default;

 private:
  std::vector<double> values_;
  DrawConvention convention_;
};

enum class ModelKind { TwoState, SingleLambda, Sequential, Bisection };

std::string_view to_string(ModelKind kind);
// Accepts "two_state", "single_lambda", "sequential", "bisection".
ModelKind model_kind_from_string(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::TwoState;
  // Combined constant eps * N_apparatus / hbar; the only strength knob.
  double rate = 1.0;
  // Hierarchy parameter; only used by Sequential and Bisection.
  double eta = 0.1;
  std::size_t n_states = 2;

  // Throws std::invalid_argument (UnsupportedN for bisection) on bad specs.
  void validate() const;
  // Number of stochastic variables: 1, 1, N-1, log2 N.
  std::size_t draw_count() const;
  // Convention the model's angle-form equations are written in.
  DrawConvention native_convention() const;
};

struct GeneratorDiagonal {
  std::vector<double> entries;

  std::size_t size() const noexcept { return entries.size(); }
  double operator[](std::size_t j) const { return entries[j]; }
};

// G_0 = (|a_0|^2 - |a_1|^2) / (|a_0|^2 + |a_1|^2) - xi, G_1 = -G_0.
GeneratorDiagonal g_two_state(const StateVector& state, double xi);

// rate * sin(theta) * (xi - cos(theta)); exactly zero at the poles.
double theta_velocity_two_state(double theta, double xi, double rate);

// Cumulative sums c_n = sum_{j<n} w_j for n = 1..N-1.
std::vector<double> separatrix_values(const WeightVector& weights);

// d theta_n / dt = rate * sin(theta_n) / L_n with
// L_n = 1 - prod_{m<=n} cos^2(theta_m / 2) - lambda.
std::vector<double> theta_velocity_single_lambda(const AngleCoords& angles, double lambda,
                                                 double rate);

GeneratorDiagonal g_sequential(const StateVector& state, const StochasticDraw& draws, double eta);

// d theta_m / dt = rate * eta^(m-1) * sin(theta_m) * (lambda_m - cos^2(theta_m / 2)).
std::vector<double> theta_velocity_sequential(const AngleCoords& angles,
                                              const StochasticDraw& draws, double eta,
                                              double rate);

// (-1)^floor(j 2^(p+1) / N). Requires j < N and p < 64.
int sign_partition(std::size_t j, unsigned p, std::size_t n);

GeneratorDiagonal g_bisection(const StateVector& state, const StochasticDraw& draws, double eta);

bool is_power_of_two(std::size_t n) noexcept;
unsigned log2_exact(std::size_t n);

// Allocation-free kernels on normalized weights, shared with the integrator.
// Each writes N (or N-1) entries into `out`.
namespace kernels {

void g_two_state(std::span<const double> weights, double xi, std::span<double> out);
void g_sequential(std::span<const double> weights, std::span<const double> xi, double eta,
                  std::span<double> out);
void g_bisection(std::span<const double> weights, std::span<const double> xi, double eta,
                 std::span<double> out);
void theta_velocity_single_lambda(std::span<const double> angles, double lambda, double rate,
                                  std::span<double> out);
void theta_velocity_sequential(std::span<const double> angles, std::span<const double> lambda,
                               double eta, double rate, std::span<double> out);

}  // namespace kernels

}  // namespace dqsr
