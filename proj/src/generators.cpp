#include "dqsr/generators.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dqsr/errors.hpp"

namespace dqsr {

namespace {

std::vector<double> normalized_weights(const StateVector& state) {
  const auto w = born_weights(state);
  return {w.values().begin(), w.values().end()};
}

bool at_pole(double theta) noexcept { return theta <= 0.0 || theta >= kPi; }

void require_draws(const StochasticDraw& draws, std::size_t count, DrawConvention convention,
                   const char* model) {
  if (draws.size() != count) {
    throw ModelMismatch(std::string(model) + " needs " + std::to_string(count) +
                        " stochastic values, got " + std::to_string(draws.size()));
  }
  if (draws.convention() != convention) {
    throw ModelMismatch(std::string(model) + " draws given in the wrong convention");
  }
}

}  // namespace

StochasticDraw::StochasticDraw(std::vector<double> values, DrawConvention convention)
    : values_(std::move(values)), convention_(convention) {
  const double lo = convention_ == DrawConvention::Xi ? -1.0 : 0.0;
  for (double v : values_) {
    if (!(v >= lo && v <= 1.0)) {
      throw std::invalid_argument("stochastic value " + std::to_string(v) + " outside [" +
                                  std::to_string(lo) + ", 1]");
    }
  }
}

StochasticDraw StochasticDraw::as(DrawConvention target) const {
  if (target == convention_) return *this;
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = target == DrawConvention::Lambda ? (values_[i] + 1.0) / 2.0 : 2.0 * values_[i] - 1.0;
  }
  return StochasticDraw(std::move(out), target);
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::TwoState: return "two_state";
    case ModelKind::SingleLambda: return "single_lambda";
    case ModelKind::Sequential: return "sequential";
    case ModelKind::Bisection: return "bisection";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "two_state") return ModelKind::TwoState;
  if (name == "single_lambda") return ModelKind::SingleLambda;
  if (name == "sequential") return ModelKind::Sequential;
  if (name == "bisection") return ModelKind::Bisection;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected two_state, single_lambda, sequential or bisection)");
}

bool is_power_of_two(std::size_t n) noexcept { return std::has_single_bit(n); }

unsigned log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) throw UnsupportedN(std::to_string(n) + " is not a power of 2");
  return static_cast<unsigned>(std::countr_zero(n));
}

void ModelSpec::validate() const {
  if (n_states < 2) throw std::invalid_argument("n_states must be >= 2");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("rate must be > 0");
  switch (kind) {
    case ModelKind::TwoState:
      if (n_states != 2) throw ModelMismatch("two_state model requires n_states = 2");
      break;
    case ModelKind::SingleLambda:
      break;
    case ModelKind::Sequential:
    case ModelKind::Bisection:
      if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
      if (kind == ModelKind::Bisection && !is_power_of_two(n_states)) {
        throw UnsupportedN("bisection model requires n_states to be a power of 2, got " +
                           std::to_string(n_states) + "; zero-pad the superposition");
      }
      break;
  }
}

std::size_t ModelSpec::draw_count() const {
  switch (kind) {
    case ModelKind::TwoState:
    case ModelKind::SingleLambda: return 1;
    case ModelKind::Sequential: return n_states - 1;
    case ModelKind::Bisection: return log2_exact(n_states);
  }
  return 0;
}

DrawConvention ModelSpec::native_convention() const {
  switch (kind) {
    case ModelKind::TwoState:
    case ModelKind::Bisection: return DrawConvention::Xi;
    case ModelKind::SingleLambda:
    case ModelKind::Sequential: return DrawConvention::Lambda;
  }
  return DrawConvention::Xi;
}

namespace kernels {

void g_two_state(std::span<const double> w, double xi, std::span<double> out) {
  const double g0 = (w[0] - w[1]) / (w[0] + w[1]) - xi;
  out[0] = g0;
  out[1] = -g0;
}

void g_sequential(std::span<const double> w, std::span<const double> xi, double eta,
                  std::span<double> out) {
  const std::size_t n = w.size();
  // out[] first holds the residual tails P_m = sum_{j>=m} w_j; each entry is
  // overwritten only after P_m and P_{m+1} have been read.
  double tail = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    tail += w[j];
    out[j] = tail;
  }
  double eta_pow = 1.0;
  double carried = 0.0;  // sum_{m<j} eta^m * (xi_m - bracket_m)
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double p_j = out[j];
    const double p_next = out[j + 1];
    const double stage = p_j < kTailEpsilon ? 0.0 : (w[j] - p_next) / p_j - xi[j];
    out[j] = carried + eta_pow * stage;
    carried -= eta_pow * stage;
    eta_pow *= eta;
  }
  out[n - 1] = carried;
}

void g_bisection(std::span<const double> w, std::span<const double> xi, double eta,
                 std::span<double> out) {
  const std::size_t n = w.size();
  const unsigned stages = static_cast<unsigned>(xi.size());
  // For N = 2^K the partition sign at stage p is bit (K-1-p) of j.
  auto sign = [stages](std::size_t j, unsigned p) {
    return ((j >> (stages - 1 - p)) & 1U) == 0 ? 1.0 : -1.0;
  };
  for (auto& g : out) g = 0.0;
  double eta_pow = 1.0;
  for (unsigned p = 0; p < stages; ++p) {
    double imbalance = 0.0;
    for (std::size_t j = 0; j < n; ++j) imbalance += sign(j, p) * w[j];
    const double bracket = imbalance - xi[p];
    for (std::size_t j = 0; j < n; ++j) out[j] += eta_pow * sign(j, p) * bracket;
    eta_pow *= eta;
  }
}

void theta_velocity_single_lambda(std::span<const double> angles, double lambda, double rate,
                                  std::span<double> out) {
  double prod = 1.0;
  for (std::size_t n = 0; n < angles.size(); ++n) {
    const double c = std::cos(angles[n] / 2.0);
    prod *= c * c;
    if (at_pole(angles[n])) {
      out[n] = 0.0;
      continue;
    }
    double separation = 1.0 - prod - lambda;
    if (separation == 0.0) {
      out[n] = 0.0;
      continue;
    }
    if (std::abs(separation) < kSeparatrixEpsilon) {
      separation = std::copysign(kSeparatrixEpsilon, separation);
    }
    out[n] = rate * std::sin(angles[n]) / separation;
  }
}

void theta_velocity_sequential(std::span<const double> angles, std::span<const double> lambda,
                               double eta, double rate, std::span<double> out) {
  double eta_pow = 1.0;
  for (std::size_t m = 0; m < angles.size(); ++m) {
    if (at_pole(angles[m])) {
      out[m] = 0.0;
    } else {
      const double c = std::cos(angles[m] / 2.0);
      out[m] = rate * eta_pow * std::sin(angles[m]) * (lambda[m] - c * c);
    }
    eta_pow *= eta;
  }
}

}  // namespace kernels

GeneratorDiagonal g_two_state(const StateVector& state, double xi) {
  if (state.size() != 2) {
    throw ModelMismatch("two-state generator needs N = 2, got " + std::to_string(state.size()));
  }
  const auto w = normalized_weights(state);
  GeneratorDiagonal g{std::vector<double>(2)};
  kernels::g_two_state(w, xi, g.entries);
  return g;
}

double theta_velocity_two_state(double theta, double xi, double rate) {
  if (at_pole(theta)) return 0.0;
  return rate * std::sin(theta) * (xi - std::cos(theta));
}

std::vector<double> separatrix_values(const WeightVector& weights) {
  std::vector<double> c(weights.size() - 1);
  double sum = 0.0;
  for (std::size_t n = 0; n < c.size(); ++n) {
    sum += weights[n];
    c[n] = std::min(sum, 1.0);
  }
  return c;
}

std::vector<double> theta_velocity_single_lambda(const AngleCoords& angles, double lambda,
                                                 double rate) {
  std::vector<double> v(angles.size());
  kernels::theta_velocity_single_lambda(angles.values(), lambda, rate, v);
  return v;
}

GeneratorDiagonal g_sequential(const StateVector& state, const StochasticDraw& draws, double eta) {
  require_draws(draws, state.size() - 1, DrawConvention::Xi, "sequential generator");
  const auto w = normalized_weights(state);
  GeneratorDiagonal g{std::vector<double>(state.size())};
  kernels::g_sequential(w, draws.values(), eta, g.entries);
  return g;
}

std::vector<double> theta_velocity_sequential(const AngleCoords& angles,
                                              const StochasticDraw& draws, double eta,
                                              double rate) {
  require_draws(draws, angles.size(), DrawConvention::Lambda, "sequential angle flow");
  std::vector<double> v(angles.size());
  kernels::theta_velocity_sequential(angles.values(), draws.values(), eta, rate, v);
  return v;
}

int sign_partition(std::size_t j, unsigned p, std::size_t n) {
  if (j >= n) throw std::out_of_range("sign_partition: j must be < N");
  if (p >= 64) throw std::out_of_range("sign_partition: p must be < 64");
  // floor(j 2^s / N) = 2 floor(j 2^(s-1) / N) + [2 r >= N] with r = j 2^(s-1) mod N,
  // so only the last remainder decides the parity.
  std::size_t remainder = j;
  for (unsigned k = 0; k < p; ++k) {
    remainder = remainder >= n - remainder ? remainder - (n - remainder) : 2 * remainder;
  }
  return remainder >= n - remainder ? -1 : 1;
}

GeneratorDiagonal g_bisection(const StateVector& state, const StochasticDraw& draws, double eta) {
  const unsigned stages = log2_exact(state.size());
  require_draws(draws, stages, DrawConvention::Xi, "bisection generator");
  const auto w = normalized_weights(state);
  GeneratorDiagonal g{std::vector<double>(state.size())};
  kernels::g_bisection(w, draws.values(), eta, g.entries);
  return g;
}

}  // namespace dqsr
