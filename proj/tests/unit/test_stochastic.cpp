#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dqsr/errors.hpp"
#include "dqsr/generators.hpp"
#include "dqsr/stochastic.hpp"
#include "support/reference.hpp"

using namespace dqsr;

namespace {

StochasticDraw xi(std::vector<double> v) { return StochasticDraw(std::move(v), DrawConvention::Xi); }

}  // namespace

TEST_CASE("draw_uniform is a pure function of the seed") {
  const SeedSpec s{42, 7};
  CHECK(draw_uniform(s, 16, DrawConvention::Xi) == draw_uniform(s, 16, DrawConvention::Xi));
  CHECK_FALSE(draw_uniform(s, 16, DrawConvention::Xi) == draw_uniform({42, 8}, 16, DrawConvention::Xi));
  CHECK_FALSE(draw_uniform(s, 16, DrawConvention::Xi) == draw_uniform({43, 7}, 16, DrawConvention::Xi));
  // Swapping master seed and stream index gives a different stream.
  CHECK_FALSE(draw_uniform({7, 42}, 16, DrawConvention::Xi) == draw_uniform(s, 16, DrawConvention::Xi));
  CHECK_THROWS(draw_uniform(s, 0, DrawConvention::Xi));
}

TEST_CASE("uniform draws: mean and Kolmogorov-Smirnov at 1e6 samples") {
  constexpr std::size_t n = 1'000'000;
  const auto x = draw_uniform({2024, 0}, n, DrawConvention::Xi);
  const std::vector<double> xs(x.values().begin(), x.values().end());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  CHECK(std::abs(mean) <= 0.004);
  CHECK(ref::ks_uniform(xs, -1.0, 1.0) < 1.95 / std::sqrt(static_cast<double>(n)));

  const auto l = draw_uniform({2024, 1}, n, DrawConvention::Lambda);
  const std::vector<double> ls(l.values().begin(), l.values().end());
  CHECK(*std::min_element(ls.begin(), ls.end()) > 0.0);
  CHECK(*std::max_element(ls.begin(), ls.end()) < 1.0);
  CHECK(ref::ks_uniform(ls, 0.0, 1.0) < 1.95 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("neighbouring streams are uncorrelated") {
  constexpr std::size_t n = 200'000;
  double sxy = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    RandomStream a({5, i});
    RandomStream b({5, i + 1});
    sxy += a.uniform(DrawConvention::Xi) * b.uniform(DrawConvention::Xi);
  }
  // Var(xy) = 1/9 for independent U[-1,1]; allow 4 sigma.
  CHECK(std::abs(sxy / n) < 4.0 * std::sqrt(1.0 / 9.0 / n));
}

TEST_CASE("sign_partition_continuum examples") {
  for (unsigned p = 0; p < 20; ++p) CHECK(sign_partition_continuum(0.0, p) == 1);
  for (double x : {0.0, 0.1, 0.25, 0.4999}) CHECK(sign_partition_continuum(x, 0) == 1);
  for (double x : {0.5, 0.6, 0.75, 0.9999}) CHECK(sign_partition_continuum(x, 0) == -1);
  for (unsigned k = 1; k <= 8; ++k) {
    const std::size_t n = std::size_t{1} << k;
    for (std::size_t j = 0; j < n; ++j) {
      for (unsigned p = 0; p < 12; ++p) {
        CHECK(sign_partition_continuum(static_cast<double>(j) / static_cast<double>(n), p) ==
              sign_partition(j, p, n));
      }
    }
  }
}

TEST_CASE("random_field_sample examples") {
  FieldSpec spec{0.0, 5, 64};
  const auto d = xi({0.3, -0.8, 0.1, 0.9, -0.2, 0.5});
  CHECK(random_field_sample(d, spec, 0.2) == doctest::Approx(-0.3));
  CHECK(random_field_sample(d, spec, 0.7) == doctest::Approx(0.3));

  spec.eta = 0.4;
  const auto zeros = xi(std::vector<double>(6, 0.0));
  for (double x : {0.0, 0.33, 0.5, 0.99}) CHECK(random_field_sample(zeros, spec, x) == 0.0);

  CHECK_THROWS_AS(random_field_sample(xi({0.1}), spec, 0.2), ModelMismatch);
}

TEST_CASE("random field stays within the geometric support bound") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  for (double eta : {0.0, 0.1, 0.5, 0.9}) {
    const FieldSpec spec{eta, 10, 64};
    const double bound = eta == 0.0 ? 1.0 : (1 - std::pow(eta, 11)) / (1 - eta);
    CHECK(spec.support_bound() == doctest::Approx(bound).epsilon(1e-14));
    for (int trial = 0; trial < 2000; ++trial) {
      const auto d = xi(ref::random_uniform(rng, 11, -1.0, 1.0));
      CHECK(std::abs(random_field_sample(d, spec, ux(rng))) <= bound + 1e-14);
    }
    // The bound is attained by the draw -theta(x, p).
    const double x = 0.37;
    std::vector<double> worst(11);
    for (unsigned p = 0; p <= 10; ++p) worst[p] = -sign_partition_continuum(x, p);
    CHECK(random_field_sample(xi(worst), spec, x) == doctest::Approx(bound).epsilon(1e-14));
  }
}

TEST_CASE("propagator_kernel examples") {
  const FieldSpec spec{0.3, 12, 64};
  CHECK(propagator_kernel(0.42, 0.42, spec) == doctest::Approx(spec.support_bound()).epsilon(1e-15));
  // floor(0.6 * 4) = 2 is even, so the p = 1 stage agrees and only p = 0 is opposite.
  CHECK(propagator_kernel(0.1, 0.6, FieldSpec{0.5, 1, 64}) == doctest::Approx(-0.5));
  CHECK(propagator_kernel(0.1, 0.8, FieldSpec{0.5, 1, 64}) == doctest::Approx(-1.5));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = u(rng);
    const double b = u(rng);
    CHECK(propagator_kernel(a, b, spec) == propagator_kernel(b, a, spec));
    CHECK(propagator_kernel(a, a, spec) > 0.0);
  }
}

TEST_CASE("continuum generator reproduces the bisection generator at M = N") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const unsigned k = 1 + static_cast<unsigned>(trial % 7);
    const std::size_t n = std::size_t{1} << k;
    const double eta = 0.05 + 0.9 * static_cast<double>(trial % 9) / 9.0;
    const FieldSpec spec{eta, k - 1, n};
    const auto w = ref::random_weights(rng, n, 0.0, 0.25);
    const auto draws = ref::random_uniform(rng, k, -1.0, 1.0);
    std::vector<Complex> psi;
    for (double x : w) psi.emplace_back(std::sqrt(x) * 3.0, 0.0);
    const auto continuum = continuum_generator(psi, xi(draws), spec);
    const auto discrete = g_bisection(StateVector(psi), xi(draws), eta);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(continuum[j] - discrete[j]) <= 1e-12);
  }
}

TEST_CASE("continuum generator examples") {
  // 2^(gamma + 1) = M: every square wave is resolved by the grid.
  const FieldSpec spec{0.3, 4, 32};
  const std::vector<Complex> flat(32, Complex(0.7, -0.2));
  for (double g : continuum_generator(flat, xi(std::vector<double>(5, 0.0)), spec)) {
    CHECK(std::abs(g) < 1e-14);
  }

  std::vector<Complex> delta(32);
  delta[11] = Complex(0.0, 2.0);
  std::mt19937_64 rng(1);
  const auto d = xi(ref::random_uniform(rng, 5, -1.0, 1.0));
  const auto g = continuum_generator(delta, d, spec);
  const double x = grid_centres(32)[11];
  CHECK(g[11] == doctest::Approx(random_field_sample(d, spec, x) + spec.support_bound()).epsilon(1e-14));

  CHECK_THROWS_AS(continuum_generator(std::vector<Complex>(32), d, spec), InvalidState);
  const auto centres = grid_centres(4);
  CHECK(centres == std::vector<double>{0.125, 0.375, 0.625, 0.875});
}

TEST_CASE("field histogram bookkeeping") {
  const FieldSpec spec{0.3, 16, 64};
  const auto h = field_pdf_histogram(spec, 0.3, 5000, 40, {1, 0});
  CHECK(h.total() == 5000);
  CHECK(h.bins() == 40);
  CHECK(h.edges.front() == doctest::Approx(-spec.support_bound()));
  CHECK(h.edges.back() == doctest::Approx(spec.support_bound()));
  const auto density = h.density();
  double mass = 0.0;
  for (double v : density) {
    CHECK(v >= 0.0);
    mass += v * h.bin_width();
  }
  CHECK(std::abs(mass - 1.0) < 1e-9);

  const auto again = field_pdf_histogram(spec, 0.3, 5000, 40, {1, 0});
  CHECK(again.counts == h.counts);
  CHECK(again.edges == h.edges);

  Histogram merged = h;
  merged.merge(again);
  CHECK(merged.total() == 10000);
  CHECK_THROWS(field_pdf_histogram(spec, 0.3, 0, 40, {1, 0}));
  CHECK_THROWS(field_pdf_histogram(spec, 0.3, 10, 1, {1, 0}));
}

TEST_CASE("field distribution: uniform limit and bell shape") {
  constexpr std::size_t n = 50'000;
  const auto small = sample_field(FieldSpec{0.02, 16, 64}, 0.3, n, {8, 0});
  CHECK(ref::ks_uniform(small, -1.0, 1.0) < 0.02);

  const FieldSpec wide{0.5, 16, 64};
  const auto h = field_pdf_histogram(wide, 0.3, n, 41, {8, 0});
  const auto density = h.density();
  const auto centres = h.centres();
  double centre = 0.0;
  double edge = 0.0;
  for (std::size_t b = 0; b < h.bins(); ++b) {
    if (std::abs(centres[b]) < 0.1) centre = std::max(centre, density[b]);
    if (std::abs(std::abs(centres[b]) - 0.9) < 0.05) edge = std::max(edge, density[b]);
  }
  CHECK(centre > edge);
}

TEST_CASE("field distribution does not depend on x") {
  constexpr std::size_t n = 50'000;
  const double bound = 2.0 * 1.628 * std::sqrt(2.0 / n);
  for (double eta : {0.1, 0.5}) {
    const FieldSpec spec{eta, 16, 64};
    const auto a = sample_field(spec, 0.13, n, {21, 0});
    const auto b = sample_field(spec, 0.81, n, {22, 0});
    CHECK(ref::ks_two_sample(a, b) < bound);
  }
}

TEST_CASE("field spec validation") {
  CHECK_THROWS(FieldSpec({1.0, 16, 64}).validate());
  CHECK_THROWS(FieldSpec({-0.1, 16, 64}).validate());
  CHECK_THROWS(FieldSpec({0.1, 16, 1}).validate());
  CHECK_NOTHROW(FieldSpec({0.0, 0, 2}).validate());
}
