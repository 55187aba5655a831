#include "h2p/model.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace h2p;

TEST_CASE("presets carry the published pulse parameters") {
  const PulseSpec pump = pulse_preset("pump117");
  CHECK(pump.A0 == 0.04);
  CHECK(pump.n_cycles == 3);
  CHECK(pump.role == PulseRole::pump);
  const PulseSpec p45 = pulse_preset("probe45");
  CHECK(p45.n_cycles == 10);
  CHECK(p45.omega == doctest::Approx(1.01));
  const PulseSpec p22 = pulse_preset("probe22");
  CHECK(p22.omega == doctest::Approx(2.07));
  const PulseSpec ir = pulse_preset("ir800_1cyc");
  CHECK(ir.n_cycles == 1);
  CHECK(ir.omega == doctest::Approx(0.057));
  CHECK_THROWS_AS(pulse_preset("pump999"), ConfigError);
  CHECK(pulse_preset_names().size() == 4);
}

TEST_CASE("vector potential vanishes outside the pulse window") {
  FieldConfig f;
  PulseSpec p = pulse_preset("pump117");
  p.delay = 10.0;
  f.pulses = {p};
  CHECK(vector_potential(f, 0.0) == 0.0);
  CHECK(vector_potential(f, 9.999) == 0.0);
  CHECK(vector_potential(f, p.end()) == 0.0);
  CHECK(vector_potential(f, p.end() + 1.0) == 0.0);
  CHECK(vector_potential(FieldConfig{}, 5.0) == 0.0);
}

TEST_CASE("pump at its midpoint has full envelope and bounded amplitude") {
  FieldConfig f;
  const PulseSpec p = pulse_preset("pump117");
  f.pulses = {p};
  const double mid = p.duration() / 2;
  const double env = std::sin(constants::pi * mid / p.duration());
  CHECK(env * env == doctest::Approx(1.0));
  const double bound = 0.04 * (1.0 + 1.0 / 3673.0);
  double peak = 0.0;
  for (int k = 0; k <= 2000; ++k) peak = std::max(peak, std::abs(vector_potential(f, p.duration() * k / 2000.0)));
  CHECK(peak <= bound * (1 + 1e-15));
  CHECK(std::abs(vector_potential(f, mid)) <= bound);
}

TEST_CASE("single-cycle pulse at half period matches the formula") {
  const double A0 = 0.7, omega = 0.9, T = 2 * constants::pi / omega;
  FieldConfig f;
  f.pulses = {PulseSpec{.A0 = A0, .omega = omega, .n_cycles = 1}};
  const double expected = constants::mass_factor * A0 * std::sin(omega * T / 2) * std::pow(std::sin(constants::pi / 2), 2);
  CHECK(vector_potential(f, T / 2) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(constants::mass_factor == doctest::Approx(1.0 + 1.0 / 3673.0));
}

TEST_CASE("pulses superpose") {
  PulseSpec a{.A0 = 0.1, .omega = 1.0, .n_cycles = 2};
  PulseSpec b{.A0 = 0.2, .omega = 2.0, .n_cycles = 3, .delay = 1.0, .phase = 0.3};
  FieldConfig fa, fb, fab;
  fa.pulses = {a};
  fb.pulses = {b};
  fab.pulses = {a, b};
  for (double t : {0.5, 1.5, 4.0, 9.0})
    CHECK(vector_potential(fab, t) == doctest::Approx(vector_potential(fa, t) + vector_potential(fb, t)));
}

TEST_CASE("validate rejects unusable pulses") {
  CHECK_THROWS_AS((PulseSpec{.omega = 0.0}).validate(), ConfigError);
  CHECK_THROWS_AS((PulseSpec{.omega = 1.0, .n_cycles = 0}).validate(), ConfigError);
  CHECK_THROWS_AS((PulseSpec{.A0 = std::numeric_limits<double>::quiet_NaN()}).validate(), ConfigError);
  CHECK_NOTHROW(pulse_preset("probe22").validate());
}

TEST_CASE("nuclear repulsion") {
  CHECK(potential_nuclear(1.0) == doctest::Approx(1.0 / std::sqrt(1.03)).epsilon(1e-15));
  CHECK(potential_nuclear(1.0) == doctest::Approx(0.98533).epsilon(1e-5));
  CHECK(potential_nuclear(1e9) < 1e-8);
  CHECK(potential_nuclear(2.0) > potential_nuclear(3.0));
}

TEST_CASE("electron attraction") {
  CHECK(potential_electron(0.0, 1e-12) == doctest::Approx(-2.0));
  CHECK(potential_electron(3.7, 5.2) == potential_electron(-3.7, 5.2));
  CHECK(potential_electron(5.0, 10.0) == doctest::Approx(-1.0 - 1.0 / std::sqrt(101.0)).epsilon(1e-15));
}

TEST_CASE("potential table") {
  const Grid2D g = make_grid({.z_min = -50, .z_max = 50, .dz = 0.1, .R_min = 1, .R_max = 15, .dR = 0.05});
  const auto v = total_static_potential(g);
  REQUIRE(v.size() == g.size());
  CHECK(std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
  for (std::size_t j : {std::size_t{0}, std::size_t{100}, g.n_R - 1})
    for (std::size_t i : {std::size_t{0}, std::size_t{437}, g.n_z - 1})
      CHECK(v[j * g.n_z + i] == potential_total(g.z(i), g.R(j)));

  // On the R = 2.6 line the two soft-core wells are resolved: z = 0 is a
  // local maximum and the minima sit symmetrically between 0 and the protons.
  const std::size_t j26 = 32;
  REQUIRE(g.R(j26) == doctest::Approx(2.6));
  const auto line = v.begin() + static_cast<long>(j26 * g.n_z);
  const auto arg = static_cast<std::size_t>(std::min_element(line, line + static_cast<long>(g.n_z)) - line);
  const double z_min = g.z(arg);
  CHECK(std::abs(z_min) > 0.5);
  CHECK(std::abs(z_min) <= 1.3 + 1e-12);
  CHECK(v[j26 * g.n_z + (g.n_z - 1 - arg)] == doctest::Approx(v[j26 * g.n_z + arg]).epsilon(1e-14));
  const std::size_t i0 = g.n_z / 2;
  REQUIRE(g.z(i0) == doctest::Approx(0.0));
  CHECK(v[j26 * g.n_z + i0] > v[j26 * g.n_z + i0 + 1]);
  // Curvature at z = 0 is 2 (1 - R^2/2) / (1 + R^2/4)^(5/2): single well only below R = sqrt(2).
  const std::size_t j12 = 4;
  REQUIRE(g.R(j12) == doctest::Approx(1.2));
  const auto line12 = v.begin() + static_cast<long>(j12 * g.n_z);
  CHECK(std::min_element(line12, line12 + static_cast<long>(g.n_z)) - line12 == static_cast<long>(i0));

  const Hamiltonian h = h2plus_hamiltonian(g);
  CHECK(h.mass_R == 918.0);
  CHECK(h.potential == v);
}
