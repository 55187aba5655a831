#pragma once

#include <utility>
#include <vector>

#include "h2p/core.hpp"

namespace h2p {

/// Inner edge of the outgoing region, |z| = 10 + R/2.
double ionization_boundary(double R);

/// Probability in |z| > 10 + R/2 plus any probability already absorbed.
double ionization_yield(const Wavefunction& psi, double absorbed = 0.0);
/// Probability in the complement |z| <= 10 + R/2.
double bound_region_norm(const Wavefunction& psi);

struct YieldSample {
  double t;
  double yield;
};

/// True when max - min of the yield over the trailing `window` is below
/// tol * max|yield| in that window.
bool yield_converged(const std::vector<YieldSample>& history, double window = 50.0, double tol = 1e-4);

struct NuclearStats {
  double t = 0.0;
  double mean_R = 0.0;
  double sigma_R = 0.0;
  double norm = 0.0;
};

/// <R> and sqrt(<R^2> - <R>^2) of the z-integrated density.
NuclearStats nuclear_stats(const Wavefunction& psi);

struct MomentumSpectrum {
  std::vector<double> k_axis;   // ascending, spacing dk
  std::vector<double> density;  // dP/dk
  double dk = 0.0;
  double k0 = 0.0;       // centroid of the dominant lobe's peak, signed
  double delta_k = 0.0;  // Gaussian width of that peak
  double total() const;
};

/// Fourier spectrum along z of the outgoing part (|z| > 10 + R/2), summed over R.
MomentumSpectrum momentum_spectrum(const Wavefunction& psi);
/// Same transform without the bound-region mask.
MomentumSpectrum momentum_spectrum_unmasked(const Wavefunction& psi);

/// Integral of dP/dk over [k_center - width/2, k_center + width/2].
double partial_yield(const MomentumSpectrum& spec, double k_center, double width);

}  // namespace h2p
