#pragma once

// Superposition states over N pointer states and the generalized Bloch-angle
// parameterization of their relative weights.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dqsr {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Sum-to-one tolerance for weight vectors.
inline constexpr double kWeightSumTolerance = 1e-12;
// Weights (and residual tails) below this are treated as exactly zero when
// inverting the angle map.
inline constexpr double kWeightFloor = 1e-15;

// Amplitudes alpha_0..alpha_{N-1}. Normalization is not enforced; only the
// ratios |alpha_j|^2 / sum_k |alpha_k|^2 carry physical content.
class StateVector {
 public:
  // Throws InvalidState if N < 2 or the squared norm is zero.
  explicit StateVector(std::vector<Complex> amplitudes);

  std::size_t size() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
  const Complex& operator[](std::size_t j) const { return amplitudes_[j]; }

  double squared_norm() const noexcept;

 private:
  std::vector<Complex> amplitudes_;
};

// Normalized Born weights. Entries >= 0, sum 1 within kWeightSumTolerance.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> weights);

  // Scales a non-negative vector with positive sum so that it sums to one.
  static WeightVector normalized(std::vector<double> raw);
  static WeightVector uniform(std::size_t n);
  // Pointer state: weight one on index j.
  static WeightVector pointer(std::size_t n, std::size_t j);

  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> values() const noexcept { return weights_; }
  double operator[](std::size_t j) const { return weights_[j]; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
};

// Generalized Bloch angles theta_1..theta_{N-1}, each in [0, pi].
class AngleCoords {
 public:
  explicit AngleCoords(std::vector<double> angles);

  std::size_t size() const noexcept { return angles_.size(); }
  // Number of pointer states described, N = size() + 1.
  std::size_t n_states() const noexcept { return angles_.size() + 1; }
  std::span<const double> values() const noexcept { return angles_; }
  double operator[](std::size_t m) const { return angles_[m]; }

  friend bool operator==(const AngleCoords&, const AngleCoords&) = default;

 private:
  std::vector<double> angles_;
};

// w_0 = sin^2(t_1/2), w_j = sin^2(t_{j+1}/2) prod_{m<=j} cos^2(t_m/2),
// w_{N-1} = prod_m cos^2(t_m/2).
WeightVector weights_from_angles(const AngleCoords& angles);

// Inverse of weights_from_angles. A vanishing residual tail maps to angle 0.
AngleCoords angles_from_weights(const WeightVector& weights);

WeightVector born_weights(const StateVector& state);
StateVector normalize(const StateVector& state);

// Real, non-negative amplitudes sqrt(w_j).
StateVector amplitudes_from_weights(const WeightVector& weights);

}  // namespace dqsr
