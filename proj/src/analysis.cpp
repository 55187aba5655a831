#include "h2p/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace h2p {

double wrap_phase(double phi) {
  const double two_pi = 2.0 * constants::pi;
  double w = std::fmod(phi, two_pi);
  if (w <= -constants::pi) w += two_pi;
  if (w > constants::pi) w -= two_pi;
  return w;
}

double modulation_bare(double k, double R, double Phi) { return 1.0 + std::cos(k * R + Phi); }

double modulation_contrast(const InterferenceModelParams& p, double R0, double delta_R) {
  const double d2 = 1.0 + p.delta_k * p.delta_k * delta_R * delta_R;
  const double expo = (R0 * R0 * p.delta_k * p.delta_k + p.k0 * p.k0 * delta_R * delta_R) / (2.0 * d2);
  return std::exp(-expo) / std::sqrt(d2);
}

double modulation_convolved(const InterferenceModelParams& p, double R0, double delta_R) {
  const double d2 = 1.0 + p.delta_k * p.delta_k * delta_R * delta_R;
  return 1.0 + modulation_contrast(p, R0, delta_R) * std::cos(p.k0 * R0 / d2 + p.Phi);
}

double R0_of_tau(const InterferenceModelParams& p, double tau) { return 2.0 * p.v * tau + p.R_c; }

double deltaR_of_tau(const InterferenceModelParams& p, double tau) {
  const double dkp2 = p.delta_k_p * p.delta_k_p;
  const double q = 2.0 * tau * dkp2 / p.m_p;
  return std::sqrt(1.0 + q * q) / (2.0 * p.delta_k_p) + p.delta_R_c;
}

double model_yield(const InterferenceModelParams& p, double tau) {
  return p.C * modulation_convolved(p, R0_of_tau(p, tau), deltaR_of_tau(p, tau));
}

EnvelopeBand model_envelope(const InterferenceModelParams& p, double tau) {
  const double c = modulation_contrast(p, R0_of_tau(p, tau), deltaR_of_tau(p, tau));
  return {p.C * (1.0 - c), p.C * (1.0 + c)};
}

// ---------------------------------------------------------------------------

namespace {

struct Periodogram {
  std::vector<double> tau;  // original delays
  std::vector<double> u;    // delays mapped to [-1, 1]
  Eigen::VectorXd y;
  double rss_base = 0.0;

  explicit Periodogram(const std::vector<DelaySample>& s) {
    const double t0 = s.front().tau, t1 = s.back().tau;
    const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
    y.resize(static_cast<Eigen::Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) {
      tau.push_back(s[k].tau);
      u.push_back((s[k].tau - mid) / half);
      y[static_cast<Eigen::Index>(k)] = s[k].yield;
    }
    rss_base = fit(0.0, false).first;
  }

  // Residual sum of squares and the (cos, sin) coefficients.
  std::pair<double, Eigen::Vector2d> fit(double omega, bool with_wave) const {
    const auto n = static_cast<Eigen::Index>(u.size());
    const int p = with_wave ? 5 : 3;
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double uk = u[static_cast<std::size_t>(k)];
      X(k, 0) = 1.0;
      X(k, 1) = uk;
      X(k, 2) = uk * uk;
      if (with_wave) {
        const double ph = omega * tau[static_cast<std::size_t>(k)];
        X(k, 3) = std::cos(ph);
        X(k, 4) = std::sin(ph);
      }
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const double rss = (X * beta - y).squaredNorm();
    Eigen::Vector2d cs = Eigen::Vector2d::Zero();
    if (with_wave) cs = {beta[3], beta[4]};
    return {rss, cs};
  }

  double power(double omega) const {
    if (!(rss_base > 0.0)) return 0.0;
    return (rss_base - fit(omega, true).first) / rss_base;
  }
};

}  // namespace

FrequencyEstimate dominant_frequency(std::vector<DelaySample> samples) {
  if (samples.size() < 8) throw std::invalid_argument("dominant_frequency: need at least 8 samples");
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.tau < b.tau; });
  const double span = samples.back().tau - samples.front().tau;
  if (!(span > 0.0)) throw std::invalid_argument("dominant_frequency: delays span is zero");
  const auto [ymin, ymax] = std::minmax_element(samples.begin(), samples.end(),
                                                [](const auto& a, const auto& b) { return a.yield < b.yield; });
  const double yscale = std::max(std::abs(ymin->yield), std::abs(ymax->yield));
  if (!(ymax->yield - ymin->yield > 1e-14 * yscale))
    throw std::invalid_argument("dominant_frequency: constant input");

  std::vector<double> gaps;
  for (std::size_t k = 1; k < samples.size(); ++k) gaps.push_back(samples[k].tau - samples[k - 1].tau);
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
  const double median_gap = std::max(gaps[gaps.size() / 2], span / static_cast<double>(samples.size()));

  const Periodogram pg(samples);
  const double w_lo = 2.0 * constants::pi / span;
  const double w_hi = constants::pi / median_gap;
  if (!(w_hi > w_lo)) throw std::invalid_argument("dominant_frequency: delay span too short");

  const double resolution = 2.0 * constants::pi / span;
  const auto n_grid = static_cast<std::size_t>(
      std::clamp(std::ceil((w_hi - w_lo) / (0.1 * resolution)), 64.0, 4000.0));
  const double step = (w_hi - w_lo) / static_cast<double>(n_grid - 1);
  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t m = 0; m < n_grid; ++m) {
    const double pw = pg.power(w_lo + step * static_cast<double>(m));
    if (pw > best_power) {
      best_power = pw;
      best = m;
    }
  }

  // Golden-section refinement within one grid step on either side.
  double a = w_lo + step * (static_cast<double>(best) - 1.0);
  double b = w_lo + step * (static_cast<double>(best) + 1.0);
  a = std::max(a, w_lo);
  b = std::min(b, w_hi);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double pc = pg.power(c), pd = pg.power(d);
  for (int it = 0; it < 60 && b - a > 1e-12 * std::max(1.0, b); ++it) {
    if (pc > pd) {
      b = d;
      d = c;
      pd = pc;
      c = b - gr * (b - a);
      pc = pg.power(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + gr * (b - a);
      pd = pg.power(d);
    }
  }
  FrequencyEstimate est;
  est.omega = 0.5 * (a + b);
  const double peak = pg.power(est.omega);

  // Half width at half maximum of the power peak.
  const double fine = step / 20.0;
  auto half_point = [&](double dir) {
    double w = est.omega;
    for (int it = 0; it < 400000; ++it) {
      const double next = w + dir * fine;
      if (next <= 0.0) return w;
      if (pg.power(next) < 0.5 * peak) return next;
      w = next;
    }
    return w;
  };
  est.uncertainty = 0.5 * (half_point(1.0) - half_point(-1.0));

  const Eigen::Vector2d cs = pg.fit(est.omega, true).second;
  est.phase = std::atan2(cs[1], cs[0]);
  return est;
}

VelocityEstimate retrieve_velocity(double omega, double k0, double omega_err, double k0_err) {
  if (k0 == 0.0) throw std::invalid_argument("retrieve_velocity: k0 must be nonzero");
  const double ak = std::abs(k0);
  VelocityEstimate out;
  out.v = omega / (2.0 * ak);
  const double rel_w = omega != 0.0 ? omega_err / omega : 0.0;
  const double rel_k = k0_err / ak;
  out.uncertainty = std::abs(out.v) * std::sqrt(rel_w * rel_w + rel_k * rel_k);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class InterferenceFitter {
 public:
  InterferenceFitter(const std::vector<DelaySample>& s, InterferenceModelParams base, bool freeze_v)
      : samples_(s), base_(base), freeze_v_(freeze_v) {}

  int n_params() const { return freeze_v_ ? 4 : 5; }

  Eigen::VectorXd pack(const InterferenceModelParams& p) const {
    Eigen::VectorXd x(n_params());
    int k = 0;
    x[k++] = p.C;
    if (!freeze_v_) x[k++] = p.v;
    x[k++] = p.R_c;
    x[k++] = p.delta_R_c;
    x[k++] = p.Phi;
    return x;
  }

  InterferenceModelParams unpack(const Eigen::VectorXd& x) const {
    InterferenceModelParams p = base_;
    int k = 0;
    p.C = x[k++];
    if (!freeze_v_) p.v = x[k++];
    p.R_c = x[k++];
    p.delta_R_c = x[k++];
    p.Phi = x[k++];
    return p;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    const InterferenceModelParams p = unpack(x);
    Eigen::VectorXd r(static_cast<Eigen::Index>(samples_.size()));
    for (std::size_t k = 0; k < samples_.size(); ++k)
      r[static_cast<Eigen::Index>(k)] = model_yield(p, samples_[k].tau) - samples_[k].yield;
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(samples_.size()), n_params());
    for (int c = 0; c < n_params(); ++c) {
      const double h = std::max(1e-6 * std::abs(x[c]), 1e-9);
      Eigen::VectorXd xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      J.col(c) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    return J;
  }

 private:
  const std::vector<DelaySample>& samples_;
  InterferenceModelParams base_;
  bool freeze_v_;
};

}  // namespace

FitResult fit_interference(const std::vector<DelaySample>& samples_in, const FitOptions& opts) {
  for (double f : {opts.k0, opts.delta_k, opts.delta_k_p, opts.m_p})
    if (!std::isfinite(f)) throw std::invalid_argument("fit_interference: fixed inputs must be finite");
  if (!(opts.delta_k_p > 0.0)) throw std::invalid_argument("fit_interference: delta_k_p must be positive");
  if (samples_in.size() < 12) throw std::invalid_argument("fit_interference: need at least 12 samples");
  std::vector<DelaySample> samples = samples_in;
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.tau < b.tau; });
  const double span = samples.back().tau - samples.front().tau;

  InterferenceModelParams p0;
  p0.k0 = opts.k0;
  p0.delta_k = opts.delta_k;
  p0.delta_k_p = opts.delta_k_p;
  p0.m_p = opts.m_p;
  if (opts.init) {
    p0 = *opts.init;
    p0.k0 = opts.k0;
    p0.delta_k = opts.delta_k;
    p0.delta_k_p = opts.delta_k_p;
    p0.m_p = opts.m_p;
  } else {
    const FrequencyEstimate fe = dominant_frequency(samples);
    if (span * fe.omega / (2.0 * constants::pi) < 2.0)
      throw std::invalid_argument("fit_interference: samples span fewer than two oscillation periods");
    p0.v = retrieve_velocity(fe.omega, opts.k0).v;
    double mean = 0.0;
    for (const auto& s : samples) mean += s.yield;
    p0.C = mean / static_cast<double>(samples.size());
    p0.Phi = wrap_phase(-fe.phase);
    p0.R_c = 0.0;
    p0.delta_R_c = 0.0;
  }

  const InterferenceFitter fitter(samples, p0, opts.freeze_v);
  Eigen::VectorXd x = fitter.pack(p0);
  Eigen::VectorXd r = fitter.residual(x);
  double f = r.squaredNorm();
  double y2 = 0.0;
  for (const auto& s : samples) y2 += s.yield * s.yield;

  FitResult out;
  double lambda = 1e-3;
  Eigen::MatrixXd J;
  if (f <= 1e-28 * y2) {
    out.converged = true;
  } else {
    for (std::size_t it = 0; it < opts.max_iter && !out.converged; ++it) {
      J = fitter.jacobian(x);
      const Eigen::MatrixXd A = J.transpose() * J;
      const Eigen::VectorXd g = J.transpose() * r;
      bool accepted = false;
      while (!accepted) {
        Eigen::MatrixXd M = A;
        for (int c = 0; c < M.rows(); ++c) M(c, c) += lambda * std::max(A(c, c), 1e-30);
        const Eigen::VectorXd delta = M.ldlt().solve(-g);
        if (!delta.allFinite() || delta.norm() < 1e-12) {
          out.converged = true;
          break;
        }
        const Eigen::VectorXd x_new = x + delta;
        const Eigen::VectorXd r_new = fitter.residual(x_new);
        const double f_new = r_new.squaredNorm();
        if (f_new < f) {
          const double rel = (f - f_new) / f;
          x = x_new;
          r = r_new;
          f = f_new;
          lambda = std::max(lambda * 0.3, 1e-12);
          accepted = true;
          ++out.iterations;
          if (rel < 1e-10) out.converged = true;
        } else {
          lambda *= 10.0;
          if (lambda > 1e16) {
            out.converged = true;
            break;
          }
        }
      }
    }
  }

  out.params = fitter.unpack(x);
  out.params.Phi = wrap_phase(out.params.Phi);
  const auto n = static_cast<double>(samples.size());
  out.residual_rms = std::sqrt(f / n);

  J = fitter.jacobian(x);
  const Eigen::MatrixXd A = J.transpose() * J;
  const double dof = std::max(1.0, n - fitter.n_params());
  const Eigen::MatrixXd cov = (f / dof) * A.completeOrthogonalDecomposition().pseudoInverse();
  int k = 0;
  out.uncertainty[0] = std::sqrt(std::max(cov(k, k), 0.0));
  ++k;
  if (!opts.freeze_v) {
    out.uncertainty[1] = std::sqrt(std::max(cov(k, k), 0.0));
    ++k;
  }
  for (int slot = 2; slot < 5; ++slot, ++k) out.uncertainty[static_cast<std::size_t>(slot)] = std::sqrt(std::max(cov(k, k), 0.0));
  return out;
}

}  // namespace h2p
