#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dqsr {

// Zero-norm or otherwise unusable state.
class InvalidState : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A generator or velocity field was asked to act on a state of the wrong size.
class ModelMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Pointer-state count not supported by the model (bisection needs N = 2^K).
class UnsupportedN : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalBlowup : public std::runtime_error {
 public:
  NumericalBlowup(std::uint64_t step, const std::string& what)
      : std::runtime_error("non-finite value at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

}  // namespace dqsr
