#include "h2p/observables.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "h2p/propagator.hpp"

using namespace h2p;

namespace {

Grid2D wide_grid() {
  return make_grid({.z_min = -200, .z_max = 200, .dz = 0.2, .R_min = 1, .R_max = 12, .dR = 0.1});
}

/// Gaussian envelope in z around zc with carrier k, Gaussian in R around Rc.
cplx packet(double z, double R, double zc, double sz, double k, double Rc = 6.0, double sR = 0.5) {
  const double a = (z - zc) / sz, b = (R - Rc) / sR;
  return std::exp(-0.25 * a * a - 0.25 * b * b) * std::polar(1.0, k * z);
}

}  // namespace

TEST_CASE("ionization boundary") {
  CHECK(ionization_boundary(0.0) == 10.0);
  CHECK(ionization_boundary(4.0) == 12.0);
}

TEST_CASE("ionization yield of constructed states") {
  const Grid2D g = wide_grid();
  SUBCASE("inner support gives zero") {
    const auto psi = Wavefunction::from_function(g, [](double z, double R) {
      return std::abs(z) < 5 ? cplx{1.0, R} : cplx{};
    });
    CHECK(ionization_yield(psi) == 0.0);
    CHECK(ionization_yield(psi, 0.25) == 0.25);
  }
  SUBCASE("far-out indicator gives one") {
    auto psi = Wavefunction::from_function(g, [](double z, double R) {
      return z > 50 && z < 80 && R > 3 && R < 9 ? cplx{1.0, 0.0} : cplx{};
    });
    normalize(psi);
    CHECK(ionization_yield(psi) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bound_region_norm(psi) == 0.0);
  }
  SUBCASE("thirty percent outside") {
    auto inner = Wavefunction::from_function(g, [](double z, double R) { return packet(z, R, 0.0, 1.5, 0.0); });
    auto outer = Wavefunction::from_function(g, [](double z, double R) { return packet(z, R, -60.0, 3.0, 0.4); });
    normalize(inner);
    normalize(outer);
    Wavefunction psi(g);
    for (std::size_t k = 0; k < psi.data().size(); ++k)
      psi.data()[k] = std::sqrt(0.7) * inner.data()[k] + std::sqrt(0.3) * outer.data()[k];
    CHECK(std::abs(ionization_yield(psi) - 0.3) < 1e-3);
    CHECK(ionization_yield(psi) + bound_region_norm(psi) == doctest::Approx(norm(psi)).epsilon(1e-13));
  }
}

TEST_CASE("yield convergence test") {
  std::vector<YieldSample> constant, linear;
  for (int k = 0; k <= 200; ++k) {
    constant.push_back({0.5 * k, 3e-4});
    linear.push_back({0.5 * k, 1e-4 * (1.0 + 0.01 * k)});
  }
  CHECK(yield_converged(constant, 50.0, 1e-4));
  CHECK_FALSE(yield_converged(linear, 50.0, 1e-4));
  CHECK_FALSE(yield_converged({{0.0, 1.0}}, 50.0, 1e-4));
  // Too short a history to fill the window.
  CHECK_FALSE(yield_converged(std::vector<YieldSample>(constant.begin(), constant.begin() + 50), 50.0, 1e-4));

  // Damped oscillation: the flag must flip exactly when the trailing-window range drops below tol.
  std::vector<YieldSample> h;
  bool flipped = false;
  for (int k = 0; k <= 4000; ++k) {
    const double t = 0.5 * k;
    h.push_back({t, 1e-3 * (1.0 + 0.05 * std::exp(-t / 40.0) * std::cos(0.7 * t))});
    double lo = 1e300, hi = -1e300;
    for (const auto& s : h)
      if (s.t >= t - 50.0) {
        lo = std::min(lo, s.yield);
        hi = std::max(hi, s.yield);
      }
    const bool expected = t >= 50.0 && hi - lo <= 1e-4 * hi;
    CHECK(yield_converged(h, 50.0, 1e-4) == expected);
    if (expected && !flipped) {
      flipped = true;
      MESSAGE("converged at t = " << t);
    }
  }
  CHECK(flipped);
}

TEST_CASE("nuclear statistics of a separable Gaussian") {
  const Grid2D g = make_grid({.z_min = -10, .z_max = 10, .dz = 0.1, .R_min = 1, .R_max = 20, .dR = 0.02});
  const auto psi = Wavefunction::from_function(g, [](double z, double R) { return packet(z, R, 0.0, 1.0, 0.0, 10.0, 0.5); });
  const NuclearStats st = nuclear_stats(psi);
  CHECK(std::abs(st.mean_R - 10.0) < 1e-3);
  CHECK(std::abs(st.sigma_R - 0.5) < 1e-3);
  CHECK(st.norm == doctest::Approx(norm(psi)).epsilon(1e-13));
}

TEST_CASE("ground state sits at the equilibrium distance") {
  const Grid2D g = make_grid({.z_min = -25, .z_max = 25, .dz = 0.2, .R_min = 1, .R_max = 7, .dR = 0.03, .dt = 0.05});
  GroundStateOptions opts;
  opts.tol = 1e-10;
  const GroundStateResult gs = solve_ground_state(h2plus_hamiltonian(g), opts);
  const NuclearStats st = nuclear_stats(gs.psi0);
  MESSAGE("E0 = " << gs.energy << ", <R> = " << st.mean_R);
  CHECK(std::abs(st.mean_R - 2.6) < 0.05);
  CHECK(std::abs(norm(gs.psi0) - 1.0) < 1e-12);
}

TEST_CASE("momentum spectrum of a far-out plane wave") {
  const Grid2D g = wide_grid();
  const double k = 0.83, sz = 10.0;
  const auto psi = Wavefunction::from_function(g, [&](double z, double R) { return packet(z, R, 90.0, sz, k); });
  const MomentumSpectrum spec = momentum_spectrum(psi);
  CHECK(spec.dk == doctest::Approx(2 * constants::pi / (g.n_z * g.dz)));
  CHECK(std::abs(spec.k0 - k) < spec.dk);
  // |psi~|^2 of the envelope is Gaussian with standard deviation 1 / (2 sz).
  CHECK(spec.delta_k == doctest::Approx(1.0 / (2.0 * sz)).epsilon(0.05));
  // Parseval on the masked region.
  CHECK(spec.total() == doctest::Approx(ionization_yield(psi)).epsilon(0.01));
  CHECK(std::is_sorted(spec.k_axis.begin(), spec.k_axis.end()));

  SUBCASE("partial yields") {
    const double whole = spec.k_axis.back() - spec.k_axis.front() + spec.dk;
    const double mid = 0.5 * (spec.k_axis.back() + spec.k_axis.front());
    CHECK(partial_yield(spec, mid, whole) == doctest::Approx(spec.total()).epsilon(1e-12));
    CHECK(partial_yield(spec, k, 0.0) == 0.0);
    CHECK(partial_yield(spec, k, 0.4) == doctest::Approx(spec.total()).epsilon(1e-3));
    CHECK(partial_yield(spec, -k, 0.4) < 1e-6 * spec.total());
    CHECK_THROWS_AS(partial_yield(spec, 1e3, 0.1), std::domain_error);
    CHECK_THROWS_AS(partial_yield(spec, k, -0.1), std::domain_error);
  }
}

TEST_CASE("dominant lobe sets the sign of k0") {
  const Grid2D g = wide_grid();
  const auto psi = Wavefunction::from_function(g, [](double z, double R) {
    return 0.6 * packet(z, R, 80.0, 8.0, 1.2) + packet(z, R, -80.0, 8.0, -1.2);
  });
  const MomentumSpectrum spec = momentum_spectrum(psi);
  CHECK(spec.k0 == doctest::Approx(-1.2).epsilon(0.02));
}

TEST_CASE("bound amplitude is masked out") {
  const Grid2D g = wide_grid();
  const auto bound = Wavefunction::from_function(g, [](double z, double R) {
    return std::abs(z) < 8.0 ? packet(z, R, 0.0, 1.0, 0.0) : cplx{};
  });
  CHECK_THROWS_AS(momentum_spectrum(bound), std::domain_error);
  const MomentumSpectrum all = momentum_spectrum_unmasked(bound);
  CHECK(all.total() == doctest::Approx(norm(bound)).epsilon(1e-10));
  CHECK(std::abs(all.k0) < all.dk);
}
