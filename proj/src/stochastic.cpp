#include "dqsr/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dqsr/errors.hpp"

namespace dqsr {

namespace {

std::mt19937_64 seeded_engine(SeedSpec seed) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed.master_seed), static_cast<std::uint32_t>(seed.master_seed >> 32),
      static_cast<std::uint32_t>(seed.stream_index), static_cast<std::uint32_t>(seed.stream_index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(SeedSpec seed) : engine_(seeded_engine(seed)) {}

double RandomStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(DrawConvention convention) {
  if (convention == DrawConvention::Xi) return 2.0 * uniform01() - 1.0;
  double u = uniform01();
  while (u == 0.0) u = uniform01();
  return u;
}

StochasticDraw RandomStream::draw(std::size_t count, DrawConvention convention) {
  std::vector<double> values(count);
  for (auto& v : values) v = uniform(convention);
  return StochasticDraw(std::move(values), convention);
}

StochasticDraw draw_uniform(SeedSpec seed, std::size_t count, DrawConvention convention) {
  if (count == 0) throw std::invalid_argument("draw_uniform: count must be >= 1");
  return RandomStream(seed).draw(count, convention);
}

void FieldSpec::validate() const {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("field eta must lie in [0, 1)");
  if (grid_points < 2) throw std::invalid_argument("field grid_points must be >= 2");
  if (gamma >= 63) throw std::invalid_argument("field gamma must be < 63");
}

double FieldSpec::support_bound() const noexcept {
  double sum = 0.0;
  double eta_pow = 1.0;  // 0^0 = 1
  for (unsigned p = 0; p <= gamma; ++p) {
    sum += eta_pow;
    eta_pow *= eta;
  }
  return sum;
}

int sign_partition_continuum(double x, unsigned p) {
  const double block = std::floor(std::ldexp(x, static_cast<int>(p) + 1));
  return std::fmod(block, 2.0) == 0.0 ? 1 : -1;
}

double random_field_sample(const StochasticDraw& draws, const FieldSpec& spec, double x) {
  if (draws.size() != spec.stage_count() || draws.convention() != DrawConvention::Xi) {
    throw ModelMismatch("random field needs gamma + 1 = " + std::to_string(spec.stage_count()) +
                        " xi values");
  }
  double value = 0.0;
  double eta_pow = 1.0;
  for (unsigned p = 0; p <= spec.gamma; ++p) {
    value -= eta_pow * draws[p] * sign_partition_continuum(x, p);
    eta_pow *= spec.eta;
  }
  return value;
}

double propagator_kernel(double x, double x_prime, const FieldSpec& spec) {
  double value = 0.0;
  double eta_pow = 1.0;
  for (unsigned p = 0; p <= spec.gamma; ++p) {
    value += eta_pow * sign_partition_continuum(x, p) * sign_partition_continuum(x_prime, p);
    eta_pow *= spec.eta;
  }
  return value;
}

std::vector<double> grid_centres(std::size_t m) {
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
  return x;
}

std::vector<double> continuum_generator(std::span<const Complex> psi, const StochasticDraw& draws,
                                        const FieldSpec& spec) {
  const std::size_t m = psi.size();
  if (m < 2) throw InvalidState("continuum grid needs at least 2 cells");
  const double inv_m = 1.0 / static_cast<double>(m);
  double q = 0.0;
  for (const auto& a : psi) q += std::norm(a);
  q *= inv_m;
  if (!(q > 0.0) || !std::isfinite(q)) throw InvalidState("continuum state has zero norm");

  const auto x = grid_centres(m);
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) {
    double expectation = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      expectation += propagator_kernel(x[i], x[k], spec) * std::norm(psi[k]) / q;
    }
    g[i] = random_field_sample(draws, spec, x[i]) + inv_m * expectation;
  }
  return g;
}

std::uint64_t Histogram::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::vector<double> Histogram::density() const {
  const double norm = static_cast<double>(total()) * bin_width();
  std::vector<double> d(counts.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = norm > 0.0 ? static_cast<double>(counts[k]) / norm : 0.0;
  return d;
}

std::vector<double> Histogram::centres() const {
  std::vector<double> c(counts.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.5 * (edges[k] + edges[k + 1]);
  return c;
}

void Histogram::merge(const Histogram& other) {
  if (other.edges != edges) throw std::invalid_argument("histogram merge: bin edges differ");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
}

std::vector<double> sample_field(const FieldSpec& spec, double x, std::size_t samples,
                                 SeedSpec seed) {
  spec.validate();
  RandomStream stream(seed);
  std::vector<double> values(samples);
  for (auto& v : values) {
    v = random_field_sample(stream.draw(spec.stage_count(), DrawConvention::Xi), spec, x);
  }
  return values;
}

Histogram field_pdf_histogram(const FieldSpec& spec, double x, std::size_t samples,
                              std::size_t bins, SeedSpec seed) {
  if (samples < 1) throw std::invalid_argument("field histogram needs samples >= 1");
  if (bins < 2) throw std::invalid_argument("field histogram needs bins >= 2");
  const double bound = spec.support_bound();
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    h.edges[k] = -bound + 2.0 * bound * static_cast<double>(k) / static_cast<double>(bins);
  }
  h.counts.assign(bins, 0);
  for (double v : sample_field(spec, x, samples, seed)) {
    auto k = static_cast<std::ptrdiff_t>(std::floor((v + bound) / (2.0 * bound) * static_cast<double>(bins)));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

}  // namespace dqsr
