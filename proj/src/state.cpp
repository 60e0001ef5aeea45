#include "dqsr/state.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dqsr/errors.hpp"

namespace dqsr {

StateVector::StateVector(std::vector<Complex> amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() < 2) {
    throw InvalidState("state vector needs at least 2 pointer states, got " +
                       std::to_string(amplitudes_.size()));
  }
  const double norm2 = squared_norm();
  if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
    throw InvalidState("state vector has zero or non-finite squared norm");
  }
}

double StateVector::squared_norm() const noexcept {
  double sum = 0.0;
  for (const auto& a : amplitudes_) sum += std::norm(a);
  return sum;
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2) {
    throw InvalidState("weight vector needs at least 2 entries");
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidState("weights must be finite and non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw InvalidState("weights must sum to 1 (sum = " + std::to_string(sum) + ")");
  }
}

WeightVector WeightVector::normalized(std::vector<double> raw) {
  double sum = 0.0;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidState("weights must be finite and non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidState("weights sum to zero");
  for (double& w : raw) w /= sum;
  return WeightVector(std::move(raw));
}

WeightVector WeightVector::uniform(std::size_t n) {
  return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::pointer(std::size_t n, std::size_t j) {
  std::vector<double> w(n, 0.0);
  w.at(j) = 1.0;
  return WeightVector(std::move(w));
}

AngleCoords::AngleCoords(std::vector<double> angles) : angles_(std::move(angles)) {
  if (angles_.empty()) throw InvalidState("angle coordinates need at least one angle (N >= 2)");
  for (double t : angles_) {
    if (!(t >= 0.0 && t <= kPi)) {
      throw InvalidState("Bloch angle outside [0, pi]: " + std::to_string(t));
    }
  }
}

WeightVector weights_from_angles(const AngleCoords& angles) {
  const std::size_t n = angles.n_states();
  std::vector<double> w(n);
  double tail = 1.0;  // prod_{m<=j} cos^2(theta_m / 2)
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double s = std::sin(angles[j] / 2.0);
    const double c = std::cos(angles[j] / 2.0);
    w[j] = s * s * tail;
    tail *= c * c;
  }
  w[n - 1] = tail;
  return WeightVector(std::move(w));
}

AngleCoords angles_from_weights(const WeightVector& weights) {
  const std::size_t n = weights.size();
  std::vector<double> clamped(weights.values().begin(), weights.values().end());
  for (double& w : clamped) {
    if (w < kWeightFloor) w = 0.0;
  }
  // Residual tails T_j = sum_{k >= j} w_k, summed from the back to avoid the
  // cancellation in 1 - sum_{k<j} w_k.
  std::vector<double> tails(n + 1, 0.0);
  for (std::size_t j = n; j-- > 0;) tails[j] = tails[j + 1] + clamped[j];

  std::vector<double> angles(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    if (tails[j] <= kWeightFloor) {
      angles[j] = 0.0;
      continue;
    }
    const double ratio = std::clamp(clamped[j] / tails[j], 0.0, 1.0);
    angles[j] = std::clamp(2.0 * std::asin(std::sqrt(ratio)), 0.0, kPi);
  }
  return AngleCoords(std::move(angles));
}

WeightVector born_weights(const StateVector& state) {
  const double norm2 = state.squared_norm();
  std::vector<double> w(state.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::norm(state[j]) / norm2;
  return WeightVector(std::move(w));
}

StateVector normalize(const StateVector& state) {
  const double scale = 1.0 / std::sqrt(state.squared_norm());
  std::vector<Complex> out(state.amplitudes().begin(), state.amplitudes().end());
  for (auto& a : out) a *= scale;
  return StateVector(std::move(out));
}

StateVector amplitudes_from_weights(const WeightVector& weights) {
  std::vector<Complex> out(weights.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = Complex(std::sqrt(weights[j]), 0.0);
  return StateVector(std::move(out));
}

}  // namespace dqsr
