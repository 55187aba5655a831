#include "h2p/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parallel.hpp"

namespace h2p {

namespace {

constexpr std::size_t kColumnChunk = 64;
constexpr std::size_t kLineGroup = 4;

double analysis_boundary(const Grid2D& g) { return 10.0 + 0.5 * g.R_max; }

}  // namespace

double absorber_mask(const Grid2D& g, const Absorber& a, double z) {
  const double lo = g.z_min + a.width;
  const double hi = g.z_max - a.width;
  double x = 0.0;
  if (z > hi)
    x = (z - hi) / a.width;
  else if (z < lo)
    x = (lo - z) / a.width;
  else
    return 1.0;
  x = std::min(x, 1.0);
  const double c = std::max(std::cos(0.5 * constants::pi * x), 0.0);
  const double m = std::pow(c, 0.125);
  return 1.0 - a.strength * (1.0 - m);
}

void validate_absorber(const Grid2D& g, const Absorber& a) {
  if (!(a.width > 0.0)) throw ConfigError("absorber: width must be positive");
  if (!(a.width < 0.25 * (g.z_max - g.z_min)))
    throw ConfigError("absorber: width must be below a quarter of the z extent");
  if (!(a.strength >= 0.0 && a.strength <= 1.0))
    throw ConfigError("absorber: strength must lie in [0, 1]");
}

void validate_absorber_clear_of_analysis(const Grid2D& g, const Absorber& a) {
  validate_absorber(g, a);
  const double edge = std::min(g.z_max - a.width, -(g.z_min + a.width));
  if (edge < analysis_boundary(g))
    throw ConfigError("absorber: overlaps the ionization analysis boundary |z| = 10 + R_max/2 = " +
                      std::to_string(analysis_boundary(g)));
}

double apply_absorber(Wavefunction& psi, const Absorber& a) {
  const Grid2D& g = psi.grid();
  std::vector<double> mask(g.n_z);
  for (std::size_t i = 0; i < g.n_z; ++i) mask[i] = absorber_mask(g, a, g.z(i));
  std::vector<double> removed(g.n_R, 0.0);
  parallel_for(g.n_R, [&](std::size_t j) {
    double s = 0.0;
    auto line = psi.line(j);
    for (std::size_t i = 0; i < g.n_z; ++i) {
      if (mask[i] == 1.0) continue;
      const double before = std::norm(line[i]);
      line[i] *= mask[i];
      s += before - std::norm(line[i]);
    }
    removed[j] = s;
  });
  double total = 0.0;
  for (double r : removed) total += r;
  return total * g.dz * g.dR;
}

// ---------------------------------------------------------------------------

Propagator::Propagator(Hamiltonian h, PropagatorConfig cfg) : h_(std::move(h)), cfg_(std::move(cfg)) {
  const Grid2D& g = h_.grid;
  if (g.n_z < 8 || g.n_R < 8) throw ConfigError("propagator: grid needs at least 8 points per axis");
  if (h_.potential.size() != g.size()) throw ConfigError("propagator: potential table size mismatch");
  if (!(cfg_.dt > 0.0) || !std::isfinite(cfg_.dt)) throw ConfigError("propagator: dt must be positive");
  if (cfg_.mode == TimeMode::imaginary && cfg_.reverse)
    throw ConfigError("propagator: reverse stepping is only defined in real time");
  for (const auto& p : cfg_.field.pulses) p.validate();

  const double half = 0.5 * cfg_.dt;
  if (cfg_.mode == TimeMode::imaginary)
    c_ = {half, 0.0};
  else
    c_ = {0.0, cfg_.reverse ? -half : half};

  half_phase_.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) half_phase_[k] = std::exp(-c_ * h_.potential[k]);

  mask_.assign(g.n_z, 1.0);
  strip_lo_ = 0;
  strip_hi_ = g.n_z;
  if (cfg_.absorber) {
    validate_absorber(g, *cfg_.absorber);
    for (std::size_t i = 0; i < g.n_z; ++i) mask_[i] = absorber_mask(g, *cfg_.absorber, g.z(i));
    while (strip_lo_ < g.n_z && mask_[strip_lo_] != 1.0) ++strip_lo_;
    while (strip_hi_ > strip_lo_ && mask_[strip_hi_ - 1] != 1.0) --strip_hi_;
  }

  const double aR = 1.0 / (2.0 * h_.mass_R * g.dR * g.dR);
  lu_R_ = factorize(2.0 * aR, -aR, -aR, g.n_R - 2);
  lu_z_field_ = 0.0;
  const double az = 1.0 / (2.0 * h_.mass_z * g.dz * g.dz);
  lu_z_ = factorize(2.0 * az, -az, -az, g.n_z - 2);
}

Propagator::ThomasLU Propagator::factorize(cplx hd, cplx hu, cplx hl, std::size_t n) const {
  ThomasLU lu;
  const cplx diag = 1.0 + c_ * hd;
  lu.upper = c_ * hu;
  lu.lower = c_ * hl;
  lu.r_diag = 1.0 - c_ * hd;
  lu.r_upper = -c_ * hu;
  lu.r_lower = -c_ * hl;
  lu.inv.resize(n);
  lu.cp.resize(n);
  lu.inv[0] = 1.0 / diag;
  lu.cp[0] = lu.upper * lu.inv[0];
  for (std::size_t k = 1; k < n; ++k) {
    lu.inv[k] = 1.0 / (diag - lu.lower * lu.cp[k - 1]);
    lu.cp[k] = lu.upper * lu.inv[k];
  }
  return lu;
}

void Propagator::sweep_z(Wavefunction& psi, const ThomasLU& lu) const {
  const Grid2D& g = psi.grid();
  const std::size_t n = g.n_z;
  const std::size_t n_lines = g.n_R - 2;
  const std::size_t n_groups = (n_lines + kLineGroup - 1) / kLineGroup;
  // The Thomas recursion is latency bound; several independent lines are
  // interleaved so their dependency chains overlap. Per-line arithmetic is
  // unchanged by the grouping.
  parallel_for(n_groups, [&](std::size_t grp) {
    const std::size_t first = 1 + grp * kLineGroup;
    const std::size_t m = std::min(kLineGroup, n_lines + 1 - first);
    cplx* x[kLineGroup];
    const cplx* ph[kLineGroup];
    cplx prev_old[kLineGroup], cur_old[kLineGroup], y_prev[kLineGroup];
    for (std::size_t l = 0; l < m; ++l) {
      x[l] = psi.line(first + l).data();
      ph[l] = half_phase_.data() + (first + l) * n;
      // Potential half step applied on the fly; forward elimination fused with the explicit half.
      prev_old[l] = x[l][0] * ph[l][0];
      cur_old[l] = x[l][1] * ph[l][1];
      x[l][0] = prev_old[l];
      y_prev[l] = cplx{0.0, 0.0};
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const cplx inv = lu.inv[i - 1];
      for (std::size_t l = 0; l < m; ++l) {
        const cplx next_old = x[l][i + 1] * ph[l][i + 1];
        const cplx r = lu.r_diag * cur_old[l] + lu.r_upper * next_old + lu.r_lower * prev_old[l];
        const cplx y = (r - lu.lower * y_prev[l]) * inv;
        x[l][i] = y;
        y_prev[l] = y;
        prev_old[l] = cur_old[l];
        cur_old[l] = next_old;
      }
    }
    for (std::size_t l = 0; l < m; ++l) x[l][n - 1] = cur_old[l];
    for (std::size_t i = n - 3; i >= 1; --i) {
      const cplx cp = lu.cp[i - 1];
      for (std::size_t l = 0; l < m; ++l) x[l][i] -= cp * x[l][i + 1];
    }
  });
}

void Propagator::sweep_R(Wavefunction& psi, std::vector<double>& chunk_norm,
                         std::vector<double>& chunk_removed) const {
  const Grid2D& g = psi.grid();
  const std::size_t nz = g.n_z, nR = g.n_R;
  const ThomasLU& lu = lu_R_;
  const std::size_t n_chunks = (nz + kColumnChunk - 1) / kColumnChunk;
  const bool absorb = cfg_.absorber.has_value();
  cplx* base = psi.data().data();
  chunk_norm.assign(n_chunks * nR, 0.0);
  chunk_removed.assign(n_chunks * nR, 0.0);
  parallel_for(n_chunks, [&](std::size_t ch) {
    const std::size_t i0 = ch * kColumnChunk;
    const std::size_t i1 = std::min(nz, i0 + kColumnChunk);
    const std::size_t w = i1 - i0;
    cplx prev_old[kColumnChunk];
    cplx cur_old[kColumnChunk];
    for (std::size_t i = 0; i < w; ++i) prev_old[i] = base[i0 + i];  // row 0
    for (std::size_t j = 1; j + 1 < nR; ++j) {
      cplx* row = base + j * nz + i0;
      const cplx* next = base + (j + 1) * nz + i0;
      const cplx* yprev = base + (j - 1) * nz + i0;
      const std::size_t k = j - 1;
      const cplx inv = lu.inv[k];
      for (std::size_t i = 0; i < w; ++i) cur_old[i] = row[i];
      if (j == 1) {
        for (std::size_t i = 0; i < w; ++i) {
          const cplx r = lu.r_diag * cur_old[i] + lu.r_upper * next[i] + lu.r_lower * prev_old[i];
          row[i] = r * inv;
        }
      } else {
        for (std::size_t i = 0; i < w; ++i) {
          const cplx r = lu.r_diag * cur_old[i] + lu.r_upper * next[i] + lu.r_lower * prev_old[i];
          row[i] = (r - lu.lower * yprev[i]) * inv;
        }
      }
      std::copy(cur_old, cur_old + w, prev_old);
    }

    // Back substitution. Each row is final once solved, so the closing potential
    // half step, the absorber and the norm tally are applied right away; the raw
    // solution of the row below is kept in `cur_old` for the recursion.
    auto finish_row = [&](std::size_t j, cplx* row) {
      const cplx* ph = half_phase_.data() + j * nz + i0;
      double s = 0.0, removed = 0.0;
      for (std::size_t i = 0; i < w; ++i) {
        cplx v = row[i] * ph[i];
        const std::size_t iz = i0 + i;
        if (absorb && (iz < strip_lo_ || iz >= strip_hi_)) {
          const double before = std::norm(v);
          v *= mask_[iz];
          removed += before - std::norm(v);
        }
        row[i] = v;
        s += std::norm(v);
      }
      chunk_norm[ch * nR + j] = s;
      chunk_removed[ch * nR + j] = removed;
    };
    {
      cplx* row = base + (nR - 2) * nz + i0;
      std::copy(row, row + w, cur_old);
      finish_row(nR - 2, row);
    }
    for (std::size_t j = nR - 3; j >= 1; --j) {
      cplx* row = base + j * nz + i0;
      const cplx cp = lu.cp[j - 1];
      for (std::size_t i = 0; i < w; ++i) {
        const cplx v = row[i] - cp * cur_old[i];
        cur_old[i] = v;
        row[i] = v;
      }
      finish_row(j, row);
    }
    // Dirichlet rows: no kinetic coupling, only the two potential half steps.
    for (std::size_t j : {std::size_t{0}, nR - 1}) {
      cplx* row = base + j * nz + i0;
      const cplx* ph = half_phase_.data() + j * nz + i0;
      for (std::size_t i = 0; i < w; ++i) row[i] *= ph[i];
      finish_row(j, row);
    }
  });
}

void Propagator::step(Wavefunction& psi) {
  const Grid2D& g = psi.grid();
  if (!g.same_sampling(h_.grid)) throw ConfigError("propagator: wavefunction grid mismatch");
  const double dt = signed_dt();
  const double t_mid = psi.t() + 0.5 * dt;

  const double A = cfg_.field.pulses.empty() ? 0.0 : vector_potential(cfg_.field, t_mid);
  if (A != lu_z_field_) {
    const double az = 1.0 / (2.0 * h_.mass_z * g.dz * g.dz);
    const double b = A / (2.0 * g.dz);
    lu_z_ = factorize(2.0 * az, cplx{-az, b}, cplx{-az, -b}, g.n_z - 2);
    lu_z_field_ = A;
  }

  sweep_z(psi, lu_z_);
  sweep_R(psi, chunk_norm_, chunk_removed_);

  // Fixed reduction order: rows outer, column chunks inner.
  const std::size_t n_chunks = chunk_norm_.size() / g.n_R;
  double total = 0.0, removed = 0.0;
  for (std::size_t j = 0; j < g.n_R; ++j)
    for (std::size_t ch = 0; ch < n_chunks; ++ch) {
      total += chunk_norm_[ch * g.n_R + j];
      removed += chunk_removed_[ch * g.n_R + j];
    }
  last_norm_ = total * g.dz * g.dR;
  absorbed_ += removed * g.dz * g.dR;
  if (!std::isfinite(last_norm_))
    throw InstabilityError("propagator: non-finite wavefunction after step at t = " +
                           std::to_string(psi.t() + dt));
  psi.set_t(psi.t() + dt);
}

void Propagator::advance(Wavefunction& psi, std::size_t n_steps) {
  for (std::size_t s = 0; s < n_steps; ++s) step(psi);
}

// ---------------------------------------------------------------------------

Wavefunction apply_hamiltonian(const Hamiltonian& h, const Wavefunction& psi, double A) {
  const Grid2D& g = psi.grid();
  if (!g.same_sampling(h.grid)) throw ConfigError("apply_hamiltonian: grid mismatch");
  const double az = 1.0 / (2.0 * h.mass_z * g.dz * g.dz);
  const double aR = 1.0 / (2.0 * h.mass_R * g.dR * g.dR);
  const cplx b{0.0, A / (2.0 * g.dz)};
  Wavefunction out(g, psi.t());
  const std::size_t nz = g.n_z;
  parallel_for(g.n_R - 2, [&](std::size_t jj) {
    const std::size_t j = jj + 1;
    const cplx* x = psi.data().data() + j * nz;
    const cplx* up = x + nz;
    const cplx* dn = x - nz;
    const double* v = h.potential.data() + j * nz;
    cplx* y = out.data().data() + j * nz;
    for (std::size_t i = 1; i + 1 < nz; ++i) {
      y[i] = az * (2.0 * x[i] - x[i - 1] - x[i + 1]) + aR * (2.0 * x[i] - up[i] - dn[i]) + v[i] * x[i] +
             b * (x[i + 1] - x[i - 1]);
    }
  });
  return out;
}

double energy_expectation(const Hamiltonian& h, const Wavefunction& psi) {
  const Grid2D& g = psi.grid();
  if (!g.same_sampling(h.grid)) throw ConfigError("energy_expectation: grid mismatch");
  const double az = 1.0 / (2.0 * h.mass_z * g.dz * g.dz);
  const double aR = 1.0 / (2.0 * h.mass_R * g.dR * g.dR);
  const std::size_t nz = g.n_z;
  std::vector<double> partial(g.n_R, 0.0);
  parallel_for(g.n_R - 2, [&](std::size_t jj) {
    const std::size_t j = jj + 1;
    const cplx* x = psi.data().data() + j * nz;
    const cplx* up = x + nz;
    const cplx* dn = x - nz;
    const double* v = h.potential.data() + j * nz;
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < nz; ++i) {
      const cplx hx =
          az * (2.0 * x[i] - x[i - 1] - x[i + 1]) + aR * (2.0 * x[i] - up[i] - dn[i]) + v[i] * x[i];
      s += (std::conj(x[i]) * hx).real();
    }
    partial[j] = s;
  });
  double e = 0.0;
  for (double p : partial) e += p;
  const double n = norm(psi);
  if (!(n > 0.0)) throw ConfigError("energy_expectation: zero norm");
  return e * g.dz * g.dR / n;
}

double energy_expectation(const Wavefunction& psi) {
  return energy_expectation(h2plus_hamiltonian(psi.grid()), psi);
}

GroundStateResult solve_ground_state(const Hamiltonian& h, const GroundStateOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("ground state: tolerance must be positive");
  PropagatorConfig cfg;
  cfg.dt = opts.dt_imag;
  cfg.mode = TimeMode::imaginary;
  Propagator prop(h, cfg);

  const double sz = opts.guess_sigma_z, sR = opts.guess_sigma_R, R0 = opts.guess_R0;
  Wavefunction psi = Wavefunction::from_function(h.grid, [&](double z, double R) {
    const double dr = R - R0;
    return cplx{std::exp(-0.5 * z * z / (sz * sz) - 0.5 * dr * dr / (sR * sR)), 0.0};
  });
  if (!(normalize(psi) > 0.0)) throw ConfigError("ground state: initial guess vanishes on the grid");

  GroundStateResult res;
  double e_prev = energy_expectation(h, psi);
  double residual = 0.0;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    prop.step(psi);
    psi.scale(1.0 / std::sqrt(prop.last_norm()));
    const double e = energy_expectation(h, psi);
    residual = std::abs(e - e_prev);
    e_prev = e;
    if (residual < opts.tol) {
      psi.set_t(0.0);
      normalize(psi);
      res.psi0 = std::move(psi);
      res.energy = e;
      res.iterations = it;
      res.residual = residual;
      return res;
    }
  }
  throw ConvergenceError("ground state: no convergence after " + std::to_string(opts.max_iter) +
                             " iterations (last residual " + std::to_string(residual) + ")",
                         residual);
}

GroundStateResult solve_ground_state(const Grid2D& grid, double tol, std::size_t max_iter) {
  GroundStateOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve_ground_state(h2plus_hamiltonian(grid), opts);
}

Wavefunction project_out(const Wavefunction& psi, const Wavefunction& psi0) {
  const cplx overlap = inner_product(psi0, psi);
  Wavefunction out = psi;
  auto d = out.data();
  auto d0 = psi0.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= overlap * d0[k];
  return out;
}

}  // namespace h2p
