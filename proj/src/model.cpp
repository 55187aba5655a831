#include "h2p/model.hpp"

#include <cmath>

namespace h2p {

double PulseSpec::peak_intensity_wcm2() const {
  const double e0 = A0 * omega;
  return constants::intensity_factor * e0 * e0;
}

void PulseSpec::validate() const {
  if (!std::isfinite(A0)) throw ConfigError("pulse: A0 must be finite");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("pulse: omega must be positive");
  if (n_cycles < 1) throw ConfigError("pulse: n_cycles must be >= 1");
  if (!std::isfinite(delay)) throw ConfigError("pulse: delay must be finite");
}

PulseSpec pulse_preset(std::string_view name) {
  PulseSpec p;
  if (name == "pump117") {
    p = {.A0 = 0.04, .omega = 0.38, .n_cycles = 3, .role = PulseRole::pump};
  } else if (name == "probe22") {
    p = {.A0 = 0.03, .omega = 2.07, .n_cycles = 10, .role = PulseRole::probe};
  } else if (name == "probe45") {
    p = {.A0 = 0.06, .omega = 1.01, .n_cycles = 10, .role = PulseRole::probe};
  } else if (name == "ir800_1cyc") {
    p = {.A0 = 3.0, .omega = 0.057, .n_cycles = 1, .role = PulseRole::probe};
  } else {
    throw ConfigError("unknown pulse preset '" + std::string(name) + "'");
  }
  return p;
}

std::vector<std::string> pulse_preset_names() {
  return {"pump117", "probe22", "probe45", "ir800_1cyc"};
}

double vector_potential(const FieldConfig& cfg, double t) {
  double a = 0.0;
  for (const PulseSpec& p : cfg.pulses) {
    const double s = t - p.delay;
    const double len = p.duration();
    if (s < 0.0 || s >= len) continue;
    const double env = std::sin(constants::pi * s / len);
    a += p.A0 * std::sin(p.omega * s + p.phase) * env * env;
  }
  return cfg.mass_factor * a;
}

double potential_nuclear(double R) { return 1.0 / std::sqrt(R * R + constants::alpha_p); }

double potential_electron(double z, double R) {
  const double a = z - 0.5 * R;
  const double b = z + 0.5 * R;
  return -1.0 / std::sqrt(a * a + constants::alpha_e) - 1.0 / std::sqrt(b * b + constants::alpha_e);
}

double potential_total(double z, double R) { return potential_nuclear(R) + potential_electron(z, R); }

std::vector<double> total_static_potential(const Grid2D& g) {
  std::vector<double> v(g.size());
  for (std::size_t j = 0; j < g.n_R; ++j) {
    const double R = g.R(j);
    const double vn = potential_nuclear(R);
    for (std::size_t i = 0; i < g.n_z; ++i) v[j * g.n_z + i] = vn + potential_electron(g.z(i), R);
  }
  return v;
}

Hamiltonian h2plus_hamiltonian(const Grid2D& grid) {
  return {grid, constants::mu_z, constants::mu_R, total_static_potential(grid)};
}

}  // namespace h2p
