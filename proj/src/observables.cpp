#include "h2p/observables.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "parallel.hpp"

namespace h2p {

double ionization_boundary(double R) { return 10.0 + 0.5 * R; }

namespace {

template <class Pred>
double region_norm(const Wavefunction& psi, Pred&& outside) {
  const Grid2D& g = psi.grid();
  std::vector<double> partial(g.n_R, 0.0);
  parallel_for(g.n_R, [&](std::size_t j) {
    const double bound = ionization_boundary(g.R(j));
    double s = 0.0;
    auto line = psi.line(j);
    for (std::size_t i = 0; i < g.n_z; ++i)
      if (outside(std::abs(g.z(i)) > bound)) s += std::norm(line[i]);
    partial[j] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total * g.dz * g.dR;
}

}  // namespace

double ionization_yield(const Wavefunction& psi, double absorbed) {
  return region_norm(psi, [](bool out) { return out; }) + absorbed;
}

double bound_region_norm(const Wavefunction& psi) {
  return region_norm(psi, [](bool out) { return !out; });
}

bool yield_converged(const std::vector<YieldSample>& history, double window, double tol) {
  if (history.size() < 2) return false;
  const double t_last = history.back().t;
  if (t_last - history.front().t < window) return false;
  double lo = history.back().yield, hi = lo, scale = 0.0;
  std::size_t count = 0;
  for (auto it = history.rbegin(); it != history.rend() && it->t >= t_last - window; ++it) {
    lo = std::min(lo, it->yield);
    hi = std::max(hi, it->yield);
    scale = std::max(scale, std::abs(it->yield));
    ++count;
  }
  if (count < 2) return false;
  return hi - lo <= tol * scale;
}

NuclearStats nuclear_stats(const Wavefunction& psi) {
  const Grid2D& g = psi.grid();
  std::vector<double> rho(g.n_R, 0.0);
  parallel_for(g.n_R, [&](std::size_t j) {
    double s = 0.0;
    for (const cplx& v : psi.line(j)) s += std::norm(v);
    rho[j] = s * g.dz;
  });
  double n = 0.0, m1 = 0.0;
  for (std::size_t j = 0; j < g.n_R; ++j) {
    n += rho[j];
    m1 += rho[j] * g.R(j);
  }
  if (!(n > 0.0)) throw std::domain_error("nuclear_stats: zero norm");
  const double mean = m1 / n;
  double m2 = 0.0;
  for (std::size_t j = 0; j < g.n_R; ++j) {
    const double d = g.R(j) - mean;
    m2 += rho[j] * d * d;
  }
  return {psi.t(), mean, std::sqrt(m2 / n), n * g.dR};
}

// ---------------------------------------------------------------------------

double MomentumSpectrum::total() const {
  double s = 0.0;
  for (double d : density) s += d;
  return s * dk;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PeakShape {
  double k0 = 0.0;
  double delta_k = 0.0;
};

// Dominant lobe, half-maximum centroid and a log-parabola Gaussian fit over +-FWHM.
PeakShape analyze_peak(const std::vector<double>& k, const std::vector<double>& rho) {
  const std::size_t n = k.size();
  double pos = 0.0, neg = 0.0;
  for (std::size_t m = 0; m < n; ++m) (k[m] >= 0.0 ? pos : neg) += rho[m];
  const bool positive = pos >= neg;
  std::size_t peak = n;
  for (std::size_t m = 0; m < n; ++m) {
    if ((k[m] >= 0.0) != positive) continue;
    if (peak == n || rho[m] > rho[peak]) peak = m;
  }
  if (peak == n || !(rho[peak] > 0.0)) return {};
  const double half = 0.5 * rho[peak];
  std::size_t lo = peak, hi = peak;
  while (lo > 0 && rho[lo - 1] >= half) --lo;
  while (hi + 1 < n && rho[hi + 1] >= half) ++hi;

  double w = 0.0, wk = 0.0;
  for (std::size_t m = lo; m <= hi; ++m) {
    w += rho[m];
    wk += rho[m] * k[m];
  }
  PeakShape out;
  out.k0 = wk / w;

  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double f = (rho[inside] - half) / (rho[inside] - rho[outside]);
    return k[inside] + f * (k[outside] - k[inside]);
  };
  const double k_lo = lo > 0 ? crossing(lo, lo - 1) : k[lo];
  const double k_hi = hi + 1 < n ? crossing(hi, hi + 1) : k[hi];
  const double fwhm = std::max(k_hi - k_lo, k[1] - k[0]);

  // Weighted least squares for ln rho = a + b x + c x^2 with weights rho^2.
  double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
  const double kp = k[peak];
  for (std::size_t m = 0; m < n; ++m) {
    const double x = k[m] - kp;
    if (std::abs(x) > fwhm || !(rho[m] > 0.0)) continue;
    const double wt = rho[m] * rho[m];
    const double y = std::log(rho[m]);
    double xp = wt;
    for (int p = 0; p < 5; ++p) {
      s[p] += xp;
      if (p < 3) t[p] += xp * y;
      xp *= x;
    }
  }
  // Solve the 3x3 normal equations by Cramer's rule.
  const double a11 = s[0], a12 = s[1], a13 = s[2], a22 = s[2], a23 = s[3], a33 = s[4];
  const double det = a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) +
                     a13 * (a12 * a23 - a22 * a13);
  double c = 0.0;
  if (std::abs(det) > 0.0) {
    const double detc = a11 * (a22 * t[2] - t[1] * a23) - a12 * (a12 * t[2] - t[1] * a13) +
                        t[0] * (a12 * a23 - a22 * a13);
    c = detc / det;
  }
  out.delta_k = c < 0.0 ? std::sqrt(-0.5 / c) : fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  return out;
}

MomentumSpectrum spectrum_impl(const Wavefunction& psi, bool mask_bound) {
  const Grid2D& g = psi.grid();
  const std::size_t nz = g.n_z;
  MomentumSpectrum spec;
  spec.dk = 2.0 * constants::pi / (static_cast<double>(nz) * g.dz);

  fftw_plan plan;
  std::vector<cplx> probe(nz);
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(nz), reinterpret_cast<fftw_complex*>(probe.data()),
                            reinterpret_cast<fftw_complex*>(probe.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }

  // Per-line power spectra, accumulated in line order for determinism.
  std::vector<std::vector<double>> power(g.n_R);
  parallel_for(g.n_R, [&](std::size_t j) {
    const double bound = ionization_boundary(g.R(j));
    std::vector<cplx> buf(nz);
    bool any = false;
    auto line = psi.line(j);
    for (std::size_t i = 0; i < nz; ++i) {
      const bool keep = !mask_bound || std::abs(g.z(i)) > bound;
      buf[i] = keep ? line[i] : cplx{0.0, 0.0};
      any = any || buf[i] != cplx{0.0, 0.0};
    }
    if (!any) return;
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                     reinterpret_cast<fftw_complex*>(buf.data()));
    power[j].resize(nz);
    for (std::size_t m = 0; m < nz; ++m) power[j][m] = std::norm(buf[m]);
  });
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }

  std::vector<double> acc(nz, 0.0);
  bool any = false;
  for (const auto& p : power) {
    if (p.empty()) continue;
    any = true;
    for (std::size_t m = 0; m < nz; ++m) acc[m] += p[m];
  }
  if (!any) throw std::domain_error("momentum_spectrum: no ionized amplitude");

  // |psi~(k)|^2 with psi~(k) = dz / sqrt(2 pi) sum psi(z) e^{-ikz}; reorder to ascending k.
  const double scale = g.dz * g.dz / (2.0 * constants::pi) * g.dR;
  const std::size_t n_neg = nz / 2;  // FFT bins nz - n_neg .. nz - 1 carry negative k
  spec.k_axis.resize(nz);
  spec.density.resize(nz);
  for (std::size_t q = 0; q < nz; ++q) {
    const std::size_t m = (q + nz - n_neg) % nz;
    const long idx = static_cast<long>(q) - static_cast<long>(n_neg);
    spec.k_axis[q] = static_cast<double>(idx) * spec.dk;
    spec.density[q] = acc[m] * scale;
  }
  if (!(spec.total() > 0.0)) throw std::domain_error("momentum_spectrum: no ionized amplitude");
  const PeakShape peak = analyze_peak(spec.k_axis, spec.density);
  spec.k0 = peak.k0;
  spec.delta_k = peak.delta_k;
  return spec;
}

}  // namespace

MomentumSpectrum momentum_spectrum(const Wavefunction& psi) { return spectrum_impl(psi, true); }
MomentumSpectrum momentum_spectrum_unmasked(const Wavefunction& psi) { return spectrum_impl(psi, false); }

double partial_yield(const MomentumSpectrum& spec, double k_center, double width) {
  if (spec.k_axis.empty()) throw std::domain_error("partial_yield: empty spectrum");
  if (!(width >= 0.0)) throw std::domain_error("partial_yield: negative window");
  const double half_bin = 0.5 * spec.dk;
  const double axis_lo = spec.k_axis.front() - half_bin;
  const double axis_hi = spec.k_axis.back() + half_bin;
  const double lo = k_center - 0.5 * width;
  const double hi = k_center + 0.5 * width;
  if (k_center < axis_lo || k_center > axis_hi)
    throw std::domain_error("partial_yield: window centre outside the momentum axis");
  // Each sample represents a bin of width dk centred on its k value; the window is clipped to the axis.
  double s = 0.0;
  for (std::size_t q = 0; q < spec.k_axis.size(); ++q) {
    const double b0 = spec.k_axis[q] - half_bin;
    const double b1 = spec.k_axis[q] + half_bin;
    const double overlap = std::min(hi, b1) - std::max(lo, b0);
    if (overlap > 0.0) s += spec.density[q] * overlap;
  }
  return s;
}

}  // namespace h2p
