#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2p {

using cplx = std::complex<double>;

/// Physical constants of the 1D H2+ model, Hartree atomic units throughout.
namespace constants {

inline constexpr double pi = 3.14159265358979323846;

/// Proton mass.
inline constexpr double proton_mass = 1836.0;
/// Reduced nuclear mass M/2.
inline constexpr double mu_R = proton_mass / 2.0;
/// Reduced electron mass of the Jacobi electron coordinate, 2M/(2M+1).
inline constexpr double mu_z = 2.0 * proton_mass / (2.0 * proton_mass + 1.0);
/// Reduced mass of the two protons used by the wavepacket-spreading law.
inline constexpr double m_p = mu_R;
/// Electron-proton soft-core parameter.
inline constexpr double alpha_e = 1.0;
/// Proton-proton soft-core parameter.
inline constexpr double alpha_p = 0.03;
/// Velocity-gauge coupling factor 1 + 1/(1+2M).
inline constexpr double mass_factor = 1.0 + 1.0 / (1.0 + 2.0 * proton_mass);

/// One atomic unit of time in femtoseconds.
inline constexpr double au_time_fs = 0.02418884;
/// I[W/cm^2] = intensity_factor * E0^2 [a.u.].
inline constexpr double intensity_factor = 3.50945e16;
/// omega[a.u.] = wavelength_factor / lambda[nm].
inline constexpr double wavelength_factor = 45.5633;

}  // namespace constants

inline double fs_to_au(double t_fs) { return t_fs / constants::au_time_fs; }
inline double au_to_fs(double t_au) { return t_au * constants::au_time_fs; }
inline double nm_to_omega(double lambda_nm) { return constants::wavelength_factor / lambda_nm; }

/// Invalid input, configuration or grid parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values appeared during propagation.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct GridSpec {
  double z_min = -409.6;
  double z_max = 409.6;
  double dz = 0.1;
  double R_min = 1.0;
  double R_max = 37.0;
  double dR = 0.03;
  double dt = 0.02;
};

/// Uniform (z, R) box. Point (j, i) sits at (z_min + i dz, R_min + j dR).
struct Grid2D {
  double z_min = 0, z_max = 0, dz = 0;
  double R_min = 0, R_max = 0, dR = 0;
  std::size_t n_z = 0, n_R = 0;
  double dt = 0;

  double z(std::size_t i) const { return z_min + static_cast<double>(i) * dz; }
  double R(std::size_t j) const { return R_min + static_cast<double>(j) * dR; }
  std::size_t size() const { return n_z * n_R; }
  std::vector<double> z_axis() const;
  std::vector<double> R_axis() const;

  /// Same sampling; dt is not compared.
  bool same_sampling(const Grid2D& other) const;
};

Grid2D make_grid(const GridSpec& spec);

/// psi(z, R, t) sampled on a Grid2D, R-major (each z-line contiguous).
class Wavefunction {
 public:
  Wavefunction() = default;
  explicit Wavefunction(const Grid2D& grid, double t = 0.0)
      : grid_(grid), data_(grid.size(), cplx{0.0, 0.0}), t_(t) {}

  const Grid2D& grid() const { return grid_; }
  double t() const { return t_; }
  void set_t(double t) { t_ = t; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  cplx& at(std::size_t j, std::size_t i) { return data_[j * grid_.n_z + i]; }
  const cplx& at(std::size_t j, std::size_t i) const { return data_[j * grid_.n_z + i]; }

  std::span<cplx> line(std::size_t j) { return {data_.data() + j * grid_.n_z, grid_.n_z}; }
  std::span<const cplx> line(std::size_t j) const {
    return {data_.data() + j * grid_.n_z, grid_.n_z};
  }

  /// Zero the four boundary lines (Dirichlet).
  void clamp_boundary();
  void scale(cplx factor);

  template <class F>
  static Wavefunction from_function(const Grid2D& grid, F&& f, double t = 0.0) {
    Wavefunction psi(grid, t);
    for (std::size_t j = 0; j < grid.n_R; ++j)
      for (std::size_t i = 0; i < grid.n_z; ++i) psi.at(j, i) = f(grid.z(i), grid.R(j));
    psi.clamp_boundary();
    return psi;
  }

 private:
  Grid2D grid_;
  std::vector<cplx> data_;
  double t_ = 0.0;
};

double norm(const Wavefunction& psi);
cplx inner_product(const Wavefunction& a, const Wavefunction& b);
/// Rescale to unit norm; returns the norm before rescaling.
double normalize(Wavefunction& psi);

/// Copy psi into a larger grid with identical spacings and aligned axes.
Wavefunction embed(const Wavefunction& psi, const Grid2D& target);

void write_checkpoint(const std::filesystem::path& path, const Wavefunction& psi);
Wavefunction read_checkpoint(const std::filesystem::path& path);

}  // namespace h2p
