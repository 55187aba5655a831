#include "h2p/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"

using namespace h2p;

namespace {

/// Reference parameter set of the interference model.
InterferenceModelParams reference() { return {}; }

std::vector<DelaySample> sample_model(const InterferenceModelParams& p, double tau_lo, double tau_hi, double step) {
  std::vector<DelaySample> out;
  for (double tau = tau_lo; tau <= tau_hi + 1e-9; tau += step) out.push_back({tau, model_yield(p, tau)});
  return out;
}

}  // namespace

TEST_CASE("bare two-centre modulation") {
  CHECK(modulation_bare(1.0, 2.0, -2.0) == doctest::Approx(2.0));
  CHECK(modulation_bare(1.0, constants::pi - 0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(modulation_bare(1.64, 10.0, 1.0) == doctest::Approx(1.0 + std::cos(17.4)).epsilon(1e-15));
}

TEST_CASE("convolved modulation") {
  InterferenceModelParams p = reference();
  SUBCASE("sharp distributions reduce to the bare form") {
    p.delta_k = 0.0;
    CHECK(modulation_convolved(p, 12.0, 0.0) == doctest::Approx(modulation_bare(p.k0, 12.0, p.Phi)).epsilon(1e-15));
  }
  SUBCASE("closed form equals quadrature of the Gaussian average") {
    const auto q = oracle::gauss_hermite(120);
    p.k0 = 1.64;
    p.delta_k = 0.084;
    p.Phi = 1.0;
    const double exact = modulation_convolved(p, 12.0, 0.5);
    const double quad = oracle::averaged_modulation(p, 12.0, 0.5, q);
    CHECK(std::abs(exact - quad) / std::abs(quad) < 1e-8);
  }
  SUBCASE("broad nuclear distribution washes out the fringes") {
    CHECK(modulation_convolved(p, 12.0, 50.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("contrast is the cosine amplitude") {
    const double c = modulation_contrast(p, 12.0, 0.5);
    const double D = std::sqrt(1.0 + p.delta_k * p.delta_k * 0.25);
    CHECK(modulation_convolved(p, 12.0, 0.5) ==
          doctest::Approx(1.0 + c * std::cos(p.k0 * 12.0 / (D * D) + p.Phi)).epsilon(1e-15));
  }
}

TEST_CASE("nuclear centre and width versus delay") {
  const InterferenceModelParams p = reference();
  CHECK(R0_of_tau(p, 0.0) == p.R_c);
  CHECK(R0_of_tau(p, 600.0) == doctest::Approx(12.87).epsilon(1e-12));
  CHECK(R0_of_tau(p, 101.0) - R0_of_tau(p, 100.0) == doctest::Approx(2.0 * p.v).epsilon(1e-10));

  CHECK(deltaR_of_tau(p, 0.0) == doctest::Approx(1.0 / (2.0 * 1.48) - 0.26).epsilon(1e-14));
  CHECK(deltaR_of_tau(p, 0.0) == doctest::Approx(0.0778).epsilon(1e-3));
  const double slope = deltaR_of_tau(p, 2e6 + 1.0) - deltaR_of_tau(p, 2e6);
  CHECK(slope == doctest::Approx(p.delta_k_p / p.m_p).epsilon(1e-6));
  InterferenceModelParams sharp = p;
  sharp.delta_k_p = 1e12;
  CHECK(deltaR_of_tau(sharp, 0.0) == doctest::Approx(p.delta_R_c).epsilon(1e-9));
}

TEST_CASE("envelope band") {
  InterferenceModelParams p = reference();
  p.delta_k = 0.0;
  p.delta_R_c = -1.0 / (2.0 * p.delta_k_p);  // zero nuclear width at tau = 0
  p.C = 3.0;
  const EnvelopeBand band = model_envelope(p, 0.0);
  CHECK(band.lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(band.hi == doctest::Approx(6.0).epsilon(1e-12));

  const InterferenceModelParams f = reference();
  double prev = 1e300;
  for (double tau_fs = 15.0; tau_fs <= 35.0; tau_fs += 0.25) {
    const EnvelopeBand b = model_envelope(f, fs_to_au(tau_fs));
    CHECK(b.hi < prev);
    CHECK(b.lo <= model_yield(f, fs_to_au(tau_fs)));
    CHECK(model_yield(f, fs_to_au(tau_fs)) <= b.hi);
    prev = b.hi;
  }
}

TEST_CASE("the reference curve oscillates at 2 k0 v") {
  const InterferenceModelParams p = reference();
  const auto s = sample_model(p, fs_to_au(15.0), fs_to_au(35.0), fs_to_au(0.015));
  const FrequencyEstimate fe = dominant_frequency(s);
  CHECK(fe.omega == doctest::Approx(2.0 * p.k0 * p.v).epsilon(0.02));
  CHECK(fe.omega == doctest::Approx(0.0364).epsilon(0.02));
}

TEST_CASE("dominant frequency of synthetic signals") {
  std::vector<DelaySample> uniform;
  for (int k = 0; k < 120; ++k) {
    const double tau = 10.0 * k;
    uniform.push_back({tau, 2.0 + std::cos(0.020 * tau)});
  }
  const FrequencyEstimate fe = dominant_frequency(uniform);
  CHECK(std::abs(fe.omega - 0.020) < 0.001);
  CHECK(fe.uncertainty > 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1200.0);
  std::vector<DelaySample> scattered;
  for (int k = 0; k < 60; ++k) {
    const double tau = u(rng);
    scattered.push_back({tau, 1e-4 * (1.0 + 0.0002 * tau) * (1.0 + 0.3 * std::cos(0.038 * tau + 0.4))});
  }
  CHECK(std::abs(dominant_frequency(scattered).omega - 0.038) < 0.001);

  CHECK_THROWS(dominant_frequency({{0, 1}, {1, 2}}));
  std::vector<DelaySample> flat(20);
  for (int k = 0; k < 20; ++k) flat[static_cast<std::size_t>(k)] = {double(k), 1.0};
  CHECK_THROWS(dominant_frequency(flat));
}

TEST_CASE("velocity retrieval") {
  const VelocityEstimate v45 = retrieve_velocity(0.020, 0.83, 0.001, 0.02);
  CHECK(std::abs(v45.v - 0.012) < 0.001);
  CHECK(v45.uncertainty == doctest::Approx(v45.v * std::hypot(0.001 / 0.020, 0.02 / 0.83)));
  const VelocityEstimate v22 = retrieve_velocity(0.038, 1.64);
  CHECK(v22.v == doctest::Approx(0.0116).epsilon(0.005));
  CHECK(std::abs(v22.v - 0.011) < 0.001);
  CHECK(retrieve_velocity(2 * 0.7 * 0.0123, 0.7).v == doctest::Approx(0.0123).epsilon(1e-15));
  CHECK(retrieve_velocity(2 * 0.7 * 0.0123, -0.7).v == doctest::Approx(0.0123).epsilon(1e-15));
  CHECK_THROWS(retrieve_velocity(0.02, 0.0));
}

TEST_CASE("wrap_phase") {
  CHECK(wrap_phase(0.5) == doctest::Approx(0.5));
  CHECK(wrap_phase(constants::pi) == doctest::Approx(constants::pi));
  CHECK(wrap_phase(-constants::pi) == doctest::Approx(constants::pi));
  CHECK(wrap_phase(3 * constants::pi / 2) == doctest::Approx(-constants::pi / 2));
  CHECK(wrap_phase(-7.0) == doctest::Approx(-7.0 + 2 * constants::pi));
}

TEST_CASE("fit started at the truth of noiseless data stays there") {
  const InterferenceModelParams p = reference();
  const auto s = sample_model(p, fs_to_au(15.0), fs_to_au(35.0), fs_to_au(0.015));
  FitOptions opts;
  opts.init = p;
  const FitResult fit = fit_interference(s, opts);
  CHECK(fit.converged);
  CHECK(fit.iterations == 0);
  CHECK(fit.residual_rms < 1e-14);
  CHECK(fit.params.v == p.v);
  CHECK(fit.params.Phi == p.Phi);
}

TEST_CASE("fit recovers the velocity from noisy reference data") {
  const InterferenceModelParams truth = reference();
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    auto s = sample_model(truth, fs_to_au(15.0), fs_to_au(35.0), fs_to_au(0.015));
    for (auto& d : s) d.yield *= 1.0 + noise(rng);
    const FitResult fit = fit_interference(s, FitOptions{});
    CHECK(fit.converged);
    CHECK(std::abs(fit.params.v - truth.v) / truth.v < 0.02);
    CHECK(fit.residual_rms < 0.02);
    CHECK(fit.params.Phi > -constants::pi);
    CHECK(fit.params.Phi <= constants::pi);
  }
}

TEST_CASE("frozen velocity and input checks") {
  const InterferenceModelParams truth = reference();
  const auto s = sample_model(truth, fs_to_au(15.0), fs_to_au(35.0), fs_to_au(0.1));
  FitOptions opts;
  opts.freeze_v = true;
  InterferenceModelParams init = truth;
  init.v = 0.0111;
  init.Phi = 0.8;
  opts.init = init;
  const FitResult fit = fit_interference(s, opts);
  CHECK(fit.params.v == 0.0111);
  CHECK(fit.uncertainty[1] == 0.0);

  CHECK_THROWS(fit_interference(std::vector<DelaySample>(s.begin(), s.begin() + 5), FitOptions{}));
  FitOptions bad;
  bad.delta_k_p = 0.0;
  CHECK_THROWS(fit_interference(s, bad));
}
