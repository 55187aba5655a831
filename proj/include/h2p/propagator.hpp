#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "h2p/core.hpp"
#include "h2p/model.hpp"

namespace h2p {

enum class TimeMode { real, imaginary };

/// cos^(1/8) mask on the outer z-strips of width `width`; strength 0 is the identity.
struct Absorber {
  double width = 30.0;
  double strength = 1.0;
};

struct PropagatorConfig {
  double dt = 0.02;
  TimeMode mode = TimeMode::real;
  std::optional<Absorber> absorber;
  FieldConfig field;
  /// Step with -dt (real mode only).
  bool reverse = false;
};

/// Mask value at coordinate z for the given grid; 1 in the interior.
double absorber_mask(const Grid2D& grid, const Absorber& absorber, double z);
void validate_absorber(const Grid2D& grid, const Absorber& absorber);
/// Rejects absorbers reaching inside |z| = 10 + R_max/2.
void validate_absorber_clear_of_analysis(const Grid2D& grid, const Absorber& absorber);

/// Multiply psi by the mask; returns the probability removed.
double apply_absorber(Wavefunction& psi, const Absorber& absorber);

/// Strang-split Crank-Nicolson propagator:
///   exp(-i V dt/2) . CN_R . CN_z(A(t + dt/2)) . exp(-i V dt/2)
/// with CN sweeps solved line by line (Thomas algorithm) on the interior points.
class Propagator {
 public:
  Propagator(Hamiltonian h, PropagatorConfig cfg);

  /// Advance psi by one step; psi.t() moves by +-dt.
  void step(Wavefunction& psi);
  void advance(Wavefunction& psi, std::size_t n_steps);

  /// Probability removed by the absorber since construction or the last reset.
  double absorbed() const { return absorbed_; }
  void reset_absorbed() { absorbed_ = 0.0; }
  /// Norm of psi after the most recent step, computed during the step.
  double last_norm() const { return last_norm_; }

  const PropagatorConfig& config() const { return cfg_; }
  const Hamiltonian& hamiltonian() const { return h_; }
  double signed_dt() const { return cfg_.reverse ? -cfg_.dt : cfg_.dt; }

 private:
  struct ThomasLU {
    cplx lower{}, upper{};
    std::vector<cplx> inv;  // 1 / pivot
    std::vector<cplx> cp;   // modified upper coefficients
    // Right-hand side (1 - cH) stencil.
    cplx r_diag{}, r_upper{}, r_lower{};
  };

  ThomasLU factorize(cplx h_diag, cplx h_upper, cplx h_lower, std::size_t n_interior) const;
  void sweep_z(Wavefunction& psi, const ThomasLU& lu) const;
  void sweep_R(Wavefunction& psi, std::vector<double>& chunk_norm,
               std::vector<double>& chunk_removed) const;

  Hamiltonian h_;
  PropagatorConfig cfg_;
  cplx c_;  // i dt/2 (real), dt/2 (imaginary), -i dt/2 (reverse)
  std::vector<cplx> half_phase_;
  std::vector<double> mask_;  // per z index
  std::size_t strip_lo_ = 0, strip_hi_ = 0;  // mask active for i < strip_lo or i >= strip_hi
  ThomasLU lu_R_;
  ThomasLU lu_z_;
  double lu_z_field_ = 0.0;
  double absorbed_ = 0.0;
  double last_norm_ = 0.0;
  std::vector<double> chunk_norm_, chunk_removed_;
};

/// H psi for the field-free Hamiltonian plus -A p (interior points; boundary rows zero).
Wavefunction apply_hamiltonian(const Hamiltonian& h, const Wavefunction& psi, double A = 0.0);

/// <psi|H0|psi> / <psi|psi> with the propagator's finite-difference stencils.
double energy_expectation(const Hamiltonian& h, const Wavefunction& psi);
double energy_expectation(const Wavefunction& psi);

struct GroundStateOptions {
  double tol = 1e-10;
  std::size_t max_iter = 200000;
  double dt_imag = 0.05;
  double guess_sigma_z = 1.0;
  double guess_R0 = 2.6;
  double guess_sigma_R = 0.3;
};

struct GroundStateResult {
  Wavefunction psi0;
  double energy = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
};

GroundStateResult solve_ground_state(const Hamiltonian& h, const GroundStateOptions& opts = {});
GroundStateResult solve_ground_state(const Grid2D& grid, double tol, std::size_t max_iter);

/// psi - <psi0|psi> psi0.
Wavefunction project_out(const Wavefunction& psi, const Wavefunction& psi0);

}  // namespace h2p
