#include "h2p/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "h2p/csv.hpp"
#include "h2p/threads.hpp"

namespace h2p {

std::size_t steps_for(double duration, double dt) {
  if (!(dt > 0.0)) throw ConfigError("steps_for: dt must be positive");
  if (duration <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(duration / dt));
}

namespace {

constexpr double kGroundBoxHalfWidth = 50.0;
constexpr double kGroundBoxRMax = 15.0;

// Index range [lo, hi] of grid points with a <= x <= b.
std::pair<std::size_t, std::size_t> index_range(double x0, double dx, std::size_t n, double a, double b) {
  const double eps = 1e-9 * dx;
  std::size_t lo = 0;
  while (lo < n && x0 + static_cast<double>(lo) * dx < a - eps) ++lo;
  std::size_t hi = n - 1;
  while (hi > lo && x0 + static_cast<double>(hi) * dx > b + eps) --hi;
  return {lo, hi};
}

}  // namespace

GroundStateResult prepare_ground_state(const Grid2D& grid, const GroundStateOptions& opts) {
  const auto [iz0, iz1] = index_range(grid.z_min, grid.dz, grid.n_z, -kGroundBoxHalfWidth, kGroundBoxHalfWidth);
  const auto [jr0, jr1] = index_range(grid.R_min, grid.dR, grid.n_R, grid.R_min, kGroundBoxRMax);
  Grid2D box = grid;
  box.z_min = grid.z(iz0);
  box.n_z = iz1 - iz0 + 1;
  box.z_max = box.z(box.n_z - 1);
  box.R_min = grid.R(jr0);
  box.n_R = jr1 - jr0 + 1;
  box.R_max = box.R(box.n_R - 1);
  if (box.n_z < 8 || box.n_R < 8) throw ConfigError("ground state: grid does not cover the molecule");

  GroundStateResult res = solve_ground_state(h2plus_hamiltonian(box), opts);
  if (!box.same_sampling(grid)) res.psi0 = embed(res.psi0, grid);
  return res;
}

PumpResult run_pump(const Wavefunction& psi0, const PulseSpec& pump, const std::optional<Absorber>& absorber) {
  pump.validate();
  const Grid2D& g = psi0.grid();
  PropagatorConfig cfg;
  cfg.dt = g.dt;
  cfg.absorber = absorber;
  cfg.field.pulses = {pump};
  Propagator prop(h2plus_hamiltonian(g), cfg);

  const double t0 = psi0.t();
  const std::size_t n = steps_for(pump.end() - t0, g.dt);
  Wavefunction psi = psi0;
  for (std::size_t k = 0; k < n; ++k) {
    prop.step(psi);
    psi.set_t(t0 + static_cast<double>(k + 1) * g.dt);
  }
  PumpResult out;
  out.excited = project_out(psi, psi0);
  out.excitation_probability = norm(out.excited);
  return out;
}

std::vector<CheckpointInfo> propagate_field_free(Wavefunction& psi, double until,
                                                 const std::vector<double>& checkpoint_at,
                                                 const std::filesystem::path& dir,
                                                 const std::optional<Absorber>& absorber,
                                                 const Observer& observer) {
  const Grid2D& g = psi.grid();
  const double t0 = psi.t();
  const double dt = g.dt;
  if (!std::is_sorted(checkpoint_at.begin(), checkpoint_at.end()))
    throw ConfigError("propagate_field_free: checkpoint times must be ascending");
  std::vector<std::size_t> marks;
  for (double t : checkpoint_at) {
    if (t < t0 - 0.5 * dt || t > until + 0.5 * dt)
      throw ConfigError("propagate_field_free: checkpoint time outside the propagation window");
    marks.push_back(steps_for(t - t0, dt));
  }
  if (!marks.empty()) {
    if (dir.empty()) throw ConfigError("propagate_field_free: checkpoints requested without a directory");
    std::filesystem::create_directories(dir);
  }

  PropagatorConfig cfg;
  cfg.dt = dt;
  cfg.absorber = absorber;
  Propagator prop(h2plus_hamiltonian(g), cfg);

  const std::size_t n_total = steps_for(until - t0, dt);
  std::vector<CheckpointInfo> written;
  std::size_t next_mark = 0;
  for (std::size_t k = 0;; ++k) {
    while (next_mark < marks.size() && marks[next_mark] == k) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%04zu.h2pwf", next_mark);
      const auto path = dir / name;
      write_checkpoint(path, psi);
      written.push_back({psi.t(), norm(psi), path});
      ++next_mark;
    }
    if (observer.callback && observer.every_steps > 0 && (k % observer.every_steps == 0 || k == n_total))
      observer.callback(psi, prop);
    if (k == n_total) break;
    prop.step(psi);
    psi.set_t(t0 + static_cast<double>(k + 1) * dt);
  }
  return written;
}

double ReferenceTrace::at(double t) const {
  const double x = (t - t0) / dt;
  const long long k = std::llround(x);
  if (value.empty() || k < 0 || static_cast<std::size_t>(k) >= value.size())
    throw std::out_of_range("reference trace does not cover t = " + std::to_string(t));
  return value[static_cast<std::size_t>(k)];
}

DelayScanRecord run_probe_from_checkpoint(const Wavefunction& start, PulseSpec probe, const ProbeOptions& opts) {
  const Grid2D& g = start.grid();
  const double t0 = start.t();
  probe.delay = t0;
  probe.validate();
  const Hamiltonian h = h2plus_hamiltonian(g);
  PropagatorConfig cfg;
  cfg.dt = g.dt;
  cfg.absorber = opts.absorber;
  cfg.field.pulses = {probe};
  Propagator prop(h, cfg);

  // Unprobed companion. It supplies the yield reference when no trace is
  // given, and the state subtracted before the momentum analysis.
  PropagatorConfig rc = cfg;
  rc.field.pulses.clear();
  std::optional<Propagator> ref_prop(std::in_place, h, rc);
  std::optional<Wavefunction> ref_psi = start;
  double ref_start = 0.0;
  if (opts.reference) ref_start = opts.reference->at(t0) - ionization_yield(start);
  auto reference = [&](double t) {
    if (opts.reference) return opts.reference->at(t) - ref_start;
    return ionization_yield(*ref_psi, ref_prop->absorbed());
  };

  DelayScanRecord rec;
  rec.tau = t0;
  rec.tau_fs = au_to_fs(t0);

  Wavefunction psi = start;
  std::size_t k = 0;
  auto advance_to = [&](std::size_t target) {
    for (; k < target; ++k) {
      const double t = t0 + static_cast<double>(k + 1) * g.dt;
      prop.step(psi);
      psi.set_t(t);
      if (ref_prop) {
        ref_prop->step(*ref_psi);
        ref_psi->set_t(t);
      }
    }
  };

  const std::size_t n_probe = std::max<std::size_t>(steps_for(probe.duration(), g.dt), 1);
  advance_to(n_probe / 2);
  const NuclearStats mid = nuclear_stats(psi);
  rec.mean_R_at_probe = mid.mean_R;
  rec.sigma_R_at_probe = mid.sigma_R;
  advance_to(n_probe);

  const YieldConvergence& conv = opts.convergence;
  const std::size_t every = std::max<std::size_t>(steps_for(conv.sample_every, g.dt), 1);
  const std::size_t n_budget = steps_for(conv.budget, g.dt);
  std::vector<YieldSample> history;
  // Probe-induced amplitude: probed minus unprobed state at the same instant.
  // Continuum electrons left by the pump cancel, so they cannot swamp the
  // probe lobe of the momentum spectrum.
  std::optional<Wavefunction> spectral_state;
  bool spectral_open = true;
  for (std::size_t extra = 0;; extra += every) {
    const double y = ionization_yield(psi, prop.absorbed()) - reference(psi.t());
    history.push_back({psi.t(), y});
    if (spectral_open) {
      // Only what the probe sent into the absorber counts against the snapshot.
      const double absorbed = prop.absorbed() - ref_prop->absorbed();
      if (absorbed <= opts.spectrum_absorbed_fraction * std::max(y, 0.0)) {
        spectral_state = psi;
        auto out = spectral_state->data();
        auto ref = ref_psi->data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= ref[i];
      } else if (spectral_state) {
        spectral_open = false;
        if (opts.reference) {
          ref_prop.reset();
          ref_psi.reset();
        }
      }
    }
    if (yield_converged(history, conv.window, conv.tol)) {
      rec.converged = true;
      break;
    }
    if (extra + every > n_budget) break;
    advance_to(k + every);
  }
  rec.yield = history.back().yield;

  if (!spectral_state) {
    spectral_state = psi;
    auto out = spectral_state->data();
    auto ref = ref_psi ? ref_psi->data() : std::span<cplx>{};
    for (std::size_t i = 0; i < ref.size(); ++i) out[i] -= ref[i];
  }
  try {
    const MomentumSpectrum spec = momentum_spectrum(*spectral_state);
    rec.k0 = spec.k0;
    rec.delta_k = spec.delta_k;
  } catch (const std::domain_error&) {
    rec.k0 = 0.0;  // nothing left the molecule
    rec.delta_k = 0.0;
  }
  return rec;
}

DelayScanRecord run_probe_from_checkpoint(const std::filesystem::path& checkpoint, PulseSpec probe,
                                          const ProbeOptions& opts) {
  return run_probe_from_checkpoint(read_checkpoint(checkpoint), std::move(probe), opts);
}

void ScanPlan::validate() const {
  pump.validate();
  probe.validate();
  if (delays.empty()) throw ConfigError("scan: no delays");
  for (std::size_t k = 1; k < delays.size(); ++k)
    if (!(delays[k] > delays[k - 1])) throw ConfigError("scan: delays must be strictly ascending");
  if (delays.front() < pump.duration())
    throw ConfigError("scan: the probe would overlap the pump (delay " + std::to_string(delays.front()) +
                      " a.u. < pump duration " + std::to_string(pump.duration()) + " a.u.)");
  if (grid.n_z < 8 || grid.n_R < 8) throw ConfigError("scan: grid not initialised");
  if (absorber) validate_absorber_clear_of_analysis(grid, *absorber);
  if (workers == 0) throw ConfigError("scan: at least one worker is required");
}

ScanResult run_scan(const ScanPlan& plan, const Wavefunction* excited) {
  plan.validate();
  const Grid2D& g = plan.grid;
  ScanResult result;

  Wavefunction psi;
  if (excited) {
    if (!excited->grid().same_sampling(g)) throw ConfigError("scan: excited state grid differs from the plan");
    psi = *excited;
    result.excitation_probability = norm(psi);
  } else {
    if (plan.progress) plan.progress("relaxing the ground state");
    GroundStateResult gs = prepare_ground_state(g, plan.ground);
    if (plan.progress) plan.progress("pump propagation");
    result.ground_energy = gs.energy;
    PumpResult pump = run_pump(gs.psi0, plan.pump, plan.absorber);
    result.excitation_probability = pump.excitation_probability;
    psi = std::move(pump.excited);
  }
  result.excited_stats = nuclear_stats(psi);

  // Probe start times on the absolute clock; tau is measured from the pump start.
  std::vector<double> starts;
  for (double tau : plan.delays) starts.push_back(plan.pump.delay + tau);
  if (starts.front() < psi.t() - 0.5 * g.dt)
    throw ConfigError("scan: the first delay precedes the time stamp of the excited state");

  const auto ckpt_dir = plan.output_dir / "checkpoints";
  if (plan.progress) plan.progress("field-free propagation to the last delay");
  // The unprobed trajectory doubles as the reference for every delay, so it
  // runs on past the last probe by the probe length and the yield budget.
  ReferenceTrace trace;
  trace.t0 = psi.t();
  trace.dt = g.dt;
  Observer obs;
  obs.every_steps = 1;
  obs.callback = [&](const Wavefunction& w, const Propagator& p) {
    trace.value.push_back(ionization_yield(w, p.absorbed()));
  };
  const double horizon = starts.back() + plan.probe.duration() + plan.convergence.budget +
                         2.0 * plan.convergence.sample_every;
  const auto ckpts = propagate_field_free(psi, horizon, starts, ckpt_dir, plan.absorber, obs);

  ProbeOptions popts;
  popts.absorber = plan.absorber;
  popts.convergence = plan.convergence;
  popts.reference = &trace;

  std::vector<DelayScanRecord> records(ckpts.size());
  std::mutex progress_mutex;
  auto run_one = [&](std::size_t idx) {
    DelayScanRecord rec;
    try {
      rec = run_probe_from_checkpoint(ckpts[idx].path, plan.probe, popts);
    } catch (const std::exception& e) {
      rec.error = e.what();
      rec.yield = std::nan("");
      rec.k0 = rec.delta_k = std::nan("");
      rec.mean_R_at_probe = rec.sigma_R_at_probe = std::nan("");
    }
    rec.tau = ckpts[idx].t - plan.pump.delay;
    rec.tau_fs = au_to_fs(rec.tau);
    records[idx] = rec;
    if (plan.progress) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "probe at tau = %.4f fs: yield %.6e, k0 %.4f, converged %d%s", rec.tau_fs,
                    rec.yield, rec.k0, rec.converged ? 1 : 0, rec.error.empty() ? "" : " (failed)");
      std::lock_guard lock(progress_mutex);
      plan.progress(msg);
    }
  };

  const std::size_t n_workers = std::min(plan.workers, records.size());
  if (n_workers <= 1) {
    for (std::size_t idx = 0; idx < records.size(); ++idx) run_one(idx);
  } else {
    // Each worker owns its probe state; the records vector is written at disjoint slots.
    const int inner = std::max(1, worker_threads() / static_cast<int>(n_workers));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w)
      pool.emplace_back([&, inner] {
        set_worker_threads(inner);
        for (std::size_t idx = next++; idx < records.size(); idx = next++) run_one(idx);
      });
    for (auto& t : pool) t.join();
  }

  std::sort(records.begin(), records.end(),
            [](const DelayScanRecord& a, const DelayScanRecord& b) { return a.tau < b.tau; });
  write_yield_csv(plan.output_dir / "yield.csv", records);
  write_scan_diagnostics_csv(plan.output_dir / "scan_diagnostics.csv", records);
  result.records = std::move(records);
  return result;
}

}  // namespace h2p
