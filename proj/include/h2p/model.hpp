#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "h2p/core.hpp"

namespace h2p {

enum class PulseRole { pump, probe, custom };

/// One sin^2-enveloped pulse, specified by its vector potential:
///   A(t) = A0 sin(omega (t - delay) + phase) sin^2(pi (t - delay) / (n_cycles T)),
/// nonzero only on the half-open window [delay, delay + duration).
struct PulseSpec {
  double A0 = 0.0;
  double omega = 1.0;
  int n_cycles = 1;
  double delay = 0.0;
  double phase = 0.0;
  PulseRole role = PulseRole::custom;

  double period() const { return 2.0 * constants::pi / omega; }
  double duration() const { return n_cycles * period(); }
  double end() const { return delay + duration(); }
  /// Peak intensity estimate from E0 ~ A0 omega. Diagnostic only.
  double peak_intensity_wcm2() const;
  void validate() const;
};

/// Named pulses: pump117, probe22, probe45, ir800_1cyc.
PulseSpec pulse_preset(std::string_view name);
std::vector<std::string> pulse_preset_names();

struct FieldConfig {
  std::vector<PulseSpec> pulses;
  double mass_factor = constants::mass_factor;
};

double vector_potential(const FieldConfig& cfg, double t);

/// Proton-proton soft-core repulsion.
double potential_nuclear(double R);
/// Electron attraction to the two protons at z = +-R/2.
double potential_electron(double z, double R);
double potential_total(double z, double R);

/// V(z, R) on the grid, R-major.
std::vector<double> total_static_potential(const Grid2D& grid);

/// Field-free Hamiltonian H0 = P^2/(2 mass_R) + p^2/(2 mass_z) + V(z, R) on a grid.
/// The H2+ model is one instance; tests substitute toy potentials and masses.
struct Hamiltonian {
  Grid2D grid;
  double mass_z = constants::mu_z;
  double mass_R = constants::mu_R;
  std::vector<double> potential;
};

Hamiltonian h2plus_hamiltonian(const Grid2D& grid);

}  // namespace h2p
