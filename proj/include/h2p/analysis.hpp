#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "h2p/core.hpp"

namespace h2p {

/// Two-center interference model for the ionization yield versus pump-probe delay.
///
/// The yield of an electron with momentum k emitted from centres at distance R
/// is modulated as 1 + cos(kR + Phi). Averaging over Gaussian distributions of
/// k (centre k0, width delta_k) and R (centre R0, width delta_R) gives the
/// closed form
///
///   1 + (1/D) cos(k0 R0 / D^2 + Phi) exp(-(R0^2 dk^2 + k0^2 dR^2) / (2 D^2)),
///   D = sqrt(1 + dk^2 dR^2).
///
/// For a dissociating ion R0(tau) = 2 v tau + R_c and
/// delta_R(tau) = sqrt(1 + 4 tau^2 dkp^4 / m_p^2) / (2 dkp) + delta_R_c.
struct InterferenceModelParams {
  double k0 = 1.64;
  double delta_k = 0.084;
  double Phi = 1.0;
  double C = 1.0;
  double v = 0.0111;
  double R_c = -0.45;
  double delta_R_c = -0.26;
  double delta_k_p = 1.48;
  double m_p = constants::m_p;
};

double modulation_bare(double k, double R, double Phi);
double modulation_convolved(const InterferenceModelParams& p, double R0, double delta_R);
/// (1/D) exp(...): amplitude of the cosine term.
double modulation_contrast(const InterferenceModelParams& p, double R0, double delta_R);
double R0_of_tau(const InterferenceModelParams& p, double tau);
double deltaR_of_tau(const InterferenceModelParams& p, double tau);
double model_yield(const InterferenceModelParams& p, double tau);

struct EnvelopeBand {
  double lo = 0.0;
  double hi = 0.0;
};
/// C (1 -+ contrast): the model with its cosine replaced by -+1.
EnvelopeBand model_envelope(const InterferenceModelParams& p, double tau);

struct DelaySample {
  double tau;
  double yield;
};

struct FrequencyEstimate {
  double omega = 0.0;
  double uncertainty = 0.0;  // half width at half maximum of the periodogram peak
  double phase = 0.0;        // theta in y ~ a + A cos(omega tau - theta)
};

/// Least-squares periodogram with a quadratic baseline fitted jointly at each
/// trial frequency; works for non-uniform delays.
FrequencyEstimate dominant_frequency(std::vector<DelaySample> samples);

struct VelocityEstimate {
  double v = 0.0;
  double uncertainty = 0.0;
};

/// v = omega / (2 |k0|), uncertainties combined in quadrature.
VelocityEstimate retrieve_velocity(double omega, double k0, double omega_err = 0.0, double k0_err = 0.0);

struct FitOptions {
  double k0 = 1.64;
  double delta_k = 0.084;
  double delta_k_p = 1.48;
  double m_p = constants::m_p;
  /// Hold v at its initial value (frequency-derived unless `init` is given).
  bool freeze_v = false;
  std::optional<InterferenceModelParams> init;
  std::size_t max_iter = 500;
};

struct FitResult {
  InterferenceModelParams params;
  /// One-sigma estimates for (C, v, R_c, delta_R_c, Phi); v is 0 when frozen.
  std::array<double, 5> uncertainty{};
  double residual_rms = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of model_yield to the samples
/// over (C, v, R_c, delta_R_c, Phi), k0/delta_k/delta_k_p held fixed.
FitResult fit_interference(const std::vector<DelaySample>& samples, const FitOptions& opts);

/// Wrap an angle into (-pi, pi].
double wrap_phase(double phi);

}  // namespace h2p
