#pragma once

// Reproducible stochastic draws and the continuum objects built from them:
// the square-wave sign function, the random field Lambda(x), the propagator
// kernel Pi(x, x') and the continuum generator on a midpoint grid of [0, 1].

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dqsr/generators.hpp"
#include "dqsr/state.hpp"

namespace dqsr {

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

// One independent stream per (master_seed, stream_index). The engine is seeded
// through std::seed_seq, whose mixing is fixed by the standard, and uniforms are
// formed from the top 53 bits, so sequences are identical across platforms.
class RandomStream {
 public:
  explicit RandomStream(SeedSpec seed);

  // Uniform on [0, 1).
  double uniform01();
  // Uniform on [-1, 1) (Xi) or (0, 1) (Lambda; zero is redrawn).
  double uniform(DrawConvention convention);
  StochasticDraw draw(std::size_t count, DrawConvention convention);

 private:
  std::mt19937_64 engine_;
};

StochasticDraw draw_uniform(SeedSpec seed, std::size_t count, DrawConvention convention);

inline constexpr unsigned kDefaultGamma = 16;

struct FieldSpec {
  double eta = 0.1;
  unsigned gamma = kDefaultGamma;  // ultraviolet cutoff: stages p = 0..gamma
  std::size_t grid_points = 64;

  void validate() const;
  std::size_t stage_count() const noexcept { return gamma + 1; }
  // sum_{p=0..gamma} eta^p, the sup of |Lambda| and the diagonal of Pi.
  double support_bound() const noexcept;
};

// (-1)^floor(x 2^(p+1)) for x in [0, 1).
int sign_partition_continuum(double x, unsigned p);

// Lambda(x) = -sum_p eta^p xi_p theta(x, p). `draws` must be Xi with gamma+1 entries.
double random_field_sample(const StochasticDraw& draws, const FieldSpec& spec, double x);

// Pi(x, x') = sum_p eta^p theta(x, p) theta(x', p).
double propagator_kernel(double x, double x_prime, const FieldSpec& spec);

// Cell centres x_i = (i + 1/2) / M.
std::vector<double> grid_centres(std::size_t m);

// G(x_i) = Lambda(x_i) + (1/M) sum_i' Pi(x_i, x_i') |psi_i'|^2 / Q with
// Q = (1/M) sum |psi_i|^2. Throws InvalidState on a zero-norm grid.
std::vector<double> continuum_generator(std::span<const Complex> psi, const StochasticDraw& draws,
                                        const FieldSpec& spec);

struct Histogram {
  std::vector<double> edges;  // bins + 1 uniform edges
  std::vector<std::uint64_t> counts;

  std::size_t bins() const noexcept { return counts.size(); }
  double bin_width() const { return edges[1] - edges[0]; }
  std::uint64_t total() const noexcept;
  // Counts scaled so that sum(density * width) = 1.
  std::vector<double> density() const;
  std::vector<double> centres() const;

  // Adds another histogram with identical edges.
  void merge(const Histogram& other);
};

// `samples` independent realisations of Lambda(x); one stream per seed.
std::vector<double> sample_field(const FieldSpec& spec, double x, std::size_t samples,
                                 SeedSpec seed);

// Histogram of sample_field() on uniform bins over [-support_bound, +support_bound].
Histogram field_pdf_histogram(const FieldSpec& spec, double x, std::size_t samples,
                              std::size_t bins, SeedSpec seed);

}  // namespace dqsr
