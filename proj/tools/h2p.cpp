// h2p: pump-probe simulations of the 1D H2+ model.
//
//   h2p [--config cfg.yaml] [--out dir] [--threads n] [--checkpoint file] <command>
//
// Commands: groundstate, pump, dissociate, scan, spectrum, fit.
// Exit codes: 0 success, 2 configuration error, 3 numerical instability,
// 4 non-convergence, 1 anything else.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "h2p/analysis.hpp"
#include "h2p/config.hpp"
#include "h2p/core.hpp"
#include "h2p/csv.hpp"
#include "h2p/manifest.hpp"
#include "h2p/observables.hpp"
#include "h2p/pipeline.hpp"
#include "h2p/propagator.hpp"
#include "h2p/threads.hpp"

namespace fs = std::filesystem;
using namespace h2p;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kInstability = 3, kNonConvergence = 4 };

struct Globals {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  std::string checkpoint;
  std::string dump_density;
  std::size_t dump_stride = 1;
};

struct FitFlags {
  std::string yield_path;
  std::optional<double> k0, dk, dkp;
  bool freeze_v = false;
};

class Run {
 public:
  Run(const Globals& g, std::string command) : g_(g), command_(std::move(command)) {
    cfg_ = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (!g.out_dir.empty()) cfg_.output_dir = g.out_dir;
    fs::create_directories(cfg_.output_dir);
    grid_ = make_grid(cfg_.grid);
    start_ = std::chrono::steady_clock::now();
    spdlog::info("{}: grid {} x {} (z x R), dt {} a.u., output {}", command_, grid_.n_z, grid_.n_R, grid_.dt,
                 cfg_.output_dir.string());
  }

  const RunConfig& cfg() const { return cfg_; }
  const Grid2D& grid() const { return grid_; }
  fs::path out(const std::string& name) const { return cfg_.output_dir / name; }

  void add_output(const fs::path& p) { outputs_.push_back(p); }
  nlohmann::json& results() { return results_; }

  Wavefunction load_state(const char* what) const {
    spdlog::info("loading {} from {}", what, g_.checkpoint);
    Wavefunction psi = read_checkpoint(g_.checkpoint);
    if (!psi.grid().same_sampling(grid_))
      throw ConfigError("checkpoint " + g_.checkpoint + " was written on a different grid than the config");
    return psi;
  }
  bool has_checkpoint() const { return !g_.checkpoint.empty(); }

  GroundStateResult ground_state() const {
    spdlog::info("relaxing the ground state (tol {:g})", cfg_.ground.tol);
    GroundStateResult gs = prepare_ground_state(grid_, cfg_.ground);
    spdlog::info("E0 = {:.8f} a.u. after {} iterations", gs.energy, gs.iterations);
    return gs;
  }

  Wavefunction excited_state() {
    if (has_checkpoint()) return load_state("excited state");
    GroundStateResult gs = ground_state();
    PumpResult pr = run_pump(gs.psi0, cfg_.pump, cfg_.absorber);
    spdlog::info("excitation probability {:.6e}", pr.excitation_probability);
    results_["ground_energy"] = gs.energy;
    results_["excitation_probability"] = pr.excitation_probability;
    return std::move(pr.excited);
  }

  void maybe_dump(const Wavefunction& psi) {
    if (g_.dump_density.empty()) return;
    write_density_csv(g_.dump_density, psi, g_.dump_stride);
    add_output(g_.dump_density);
  }

  void finish() {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    ManifestInput m;
    m.command = command_;
    m.config = &cfg_;
    m.wall_seconds = wall;
    m.threads = g_.threads;
    m.outputs = outputs_;
    m.results = results_;
    const fs::path path = out("manifest_" + command_ + ".json");
    write_manifest(path, m);
    spdlog::info("{} done in {:.1f} s; manifest {}", command_, wall, path.string());
  }

 private:
  const Globals& g_;
  std::string command_;
  RunConfig cfg_;
  Grid2D grid_;
  std::vector<fs::path> outputs_;
  nlohmann::json results_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_;
};

int cmd_groundstate(const Globals& g) {
  Run run(g, "groundstate");
  GroundStateResult gs = run.ground_state();
  const Hamiltonian h = h2plus_hamiltonian(run.grid());
  const StatsRow row = stats_row(h, gs.psi0);
  const fs::path ckpt = run.out("ground.h2pwf");
  write_checkpoint(ckpt, gs.psi0);
  write_stats_csv(run.out("stats.csv"), {row});
  run.add_output(ckpt);
  run.add_output(run.out("stats.csv"));
  run.maybe_dump(gs.psi0);
  run.results() = {{"energy", gs.energy},
                   {"mean_R", row.mean_R},
                   {"sigma_R", row.sigma_R},
                   {"iterations", gs.iterations},
                   {"residual", gs.residual}};
  spdlog::info("<R> = {:.5f} a.u., sigma_R = {:.5f} a.u.", row.mean_R, row.sigma_R);
  run.finish();
  return kOk;
}

int cmd_pump(const Globals& g) {
  Run run(g, "pump");
  Wavefunction psi0;
  if (run.has_checkpoint()) {
    psi0 = run.load_state("ground state");
  } else {
    GroundStateResult gs = run.ground_state();
    run.results()["ground_energy"] = gs.energy;
    psi0 = std::move(gs.psi0);
  }
  PumpResult pr = run_pump(psi0, run.cfg().pump, run.cfg().absorber);
  spdlog::info("excitation probability {:.6e}", pr.excitation_probability);
  const Hamiltonian h = h2plus_hamiltonian(run.grid());
  const fs::path ckpt = run.out("excited.h2pwf");
  write_checkpoint(ckpt, pr.excited);
  write_stats_csv(run.out("stats.csv"), {stats_row(h, psi0), stats_row(h, pr.excited)});
  run.add_output(ckpt);
  run.add_output(run.out("stats.csv"));
  run.maybe_dump(pr.excited);
  const NuclearStats s = nuclear_stats(pr.excited);
  run.results()["excitation_probability"] = pr.excitation_probability;
  run.results()["excited_mean_R"] = s.mean_R;
  run.results()["excited_sigma_R"] = s.sigma_R;
  run.finish();
  return kOk;
}

int cmd_dissociate(const Globals& g) {
  Run run(g, "dissociate");
  Wavefunction psi = run.excited_state();
  const NuclearStats s0 = nuclear_stats(psi);
  run.results()["excited_sigma_R"] = s0.sigma_R;
  const Hamiltonian h = h2plus_hamiltonian(run.grid());
  const double dt = run.grid().dt;
  const double until = run.cfg().dissociate_until();

  std::vector<double> marks;
  if (run.cfg().checkpoint_every > 0.0)
    for (double t = psi.t(); t <= until + 0.5 * dt; t += run.cfg().checkpoint_every) marks.push_back(t);

  std::vector<StatsRow> rows;
  Observer obs;
  obs.every_steps = std::max<std::size_t>(steps_for(run.cfg().stats_every, dt), 1);
  obs.callback = [&](const Wavefunction& w, const Propagator&) { rows.push_back(stats_row(h, w)); };
  spdlog::info("field-free propagation from t = {:.3f} to {:.3f} a.u. ({:.3f} fs)", psi.t(), until, au_to_fs(until));
  const auto ckpts = propagate_field_free(psi, until, marks, run.out("checkpoints"), run.cfg().absorber, obs);
  if (rows.empty() || rows.back().t < psi.t()) rows.push_back(stats_row(h, psi));

  write_stats_csv(run.out("stats.csv"), rows);
  run.add_output(run.out("stats.csv"));
  const fs::path final_ckpt = run.out("dissociated.h2pwf");
  write_checkpoint(final_ckpt, psi);
  run.add_output(final_ckpt);
  for (const auto& c : ckpts) run.add_output(c.path);
  run.maybe_dump(psi);

  // d<R>/dt by least squares over the last 2 fs of the record.
  const double t_from = rows.back().t - fs_to_au(2.0);
  double n = 0, st = 0, sr = 0, stt = 0, str = 0;
  for (const auto& r : rows)
    if (r.t >= t_from) {
      n += 1;
      st += r.t;
      sr += r.mean_R;
      stt += r.t * r.t;
      str += r.t * r.mean_R;
    }
  if (n >= 2) {
    const double slope = (n * str - st * sr) / (n * stt - st * st);
    run.results()["dR_dt_last_2fs"] = slope;
    spdlog::info("d<R>/dt over the last 2 fs: {:.6f} a.u. ({:.4f} a.u./fs)", slope, slope / au_to_fs(1.0));
  }
  run.results()["final_mean_R"] = rows.back().mean_R;
  run.results()["final_sigma_R"] = rows.back().sigma_R;
  run.finish();
  return kOk;
}

int cmd_scan(const Globals& g) {
  Run run(g, "scan");
  ScanPlan plan = make_scan_plan(run.cfg());
  plan.progress = [](const std::string& msg) { spdlog::info("{}", msg); };
  ScanResult res;
  if (run.has_checkpoint()) {
    const Wavefunction excited = run.load_state("excited state");
    res = run_scan(plan, &excited);
  } else {
    res = run_scan(plan);
  }
  run.add_output(run.out("yield.csv"));
  run.add_output(run.out("scan_diagnostics.csv"));
  auto& r = run.results();
  r["excitation_probability"] = res.excitation_probability;
  r["ground_energy"] = res.ground_energy;
  r["excited_mean_R"] = res.excited_stats.mean_R;
  r["excited_sigma_R"] = res.excited_stats.sigma_R;

  bool all_converged = true, instability = false;
  std::vector<DelaySample> samples;
  for (const auto& rec : res.records) {
    all_converged = all_converged && rec.converged;
    instability = instability || rec.error.find("non-finite") != std::string::npos;
    if (rec.error.empty()) samples.push_back({rec.tau, rec.yield});
  }
  if (samples.size() >= 8) {
    try {
      const FrequencyEstimate f = dominant_frequency(samples);
      r["omega_au"] = f.omega;
      r["omega_uncertainty_au"] = f.uncertainty;
      spdlog::info("dominant angular frequency {:.5f} +- {:.5f} a.u.", f.omega, f.uncertainty);
    } catch (const std::invalid_argument& e) {
      spdlog::warn("no frequency estimate: {}", e.what());
    }
  }
  r["all_converged"] = all_converged;
  run.finish();
  if (instability) return kInstability;
  if (!all_converged) {
    spdlog::error("some delays did not converge or failed; see scan_diagnostics.csv");
    return kNonConvergence;
  }
  return kOk;
}

int cmd_spectrum(const Globals& g, bool unmasked) {
  Run run(g, "spectrum");
  if (!run.has_checkpoint()) throw ConfigError("spectrum needs --checkpoint <state file>");
  const Wavefunction psi = run.load_state("state");
  const MomentumSpectrum spec = unmasked ? momentum_spectrum_unmasked(psi) : momentum_spectrum(psi);
  write_spectrum_csv(run.out("spectrum.csv"), spec);
  run.add_output(run.out("spectrum.csv"));
  run.maybe_dump(psi);
  run.results() = {{"k0", spec.k0}, {"delta_k", spec.delta_k}, {"total", spec.total()}, {"masked", !unmasked}};
  spdlog::info("k0 = {:.5f} a.u., delta_k = {:.5f} a.u., integral {:.6e}", spec.k0, spec.delta_k, spec.total());
  run.finish();
  return kOk;
}

int cmd_fit(const Globals& g, const FitFlags& f) {
  Run run(g, "fit");
  const fs::path yield_path = f.yield_path.empty() ? run.out("yield.csv") : fs::path(f.yield_path);
  const auto rows = read_yield_csv(yield_path);
  std::vector<DelaySample> samples;
  double k0_sum = 0.0, dk_sum = 0.0;
  std::size_t n_k = 0;
  for (const auto& r : rows) {
    if (!std::isfinite(r.yield)) continue;
    samples.push_back({r.delay_au, r.yield});
    if (std::isfinite(r.k0) && r.k0 != 0.0) {
      k0_sum += r.k0;
      dk_sum += r.delta_k;
      ++n_k;
    }
  }

  FitOptions opts;
  opts.freeze_v = f.freeze_v;
  if (f.k0) opts.k0 = *f.k0;
  else if (n_k) opts.k0 = k0_sum / static_cast<double>(n_k);
  if (f.dk) opts.delta_k = *f.dk;
  else if (n_k) opts.delta_k = dk_sum / static_cast<double>(n_k);
  if (f.dkp) {
    opts.delta_k_p = *f.dkp;
  } else {
    // Heuristic: 1 / (2 sigma_R) of the packet right after the pump, when the scan recorded it.
    const fs::path m = yield_path.parent_path() / "manifest_scan.json";
    bool found = false;
    if (fs::exists(m)) {
      const auto j = read_manifest(m);
      if (j.contains("results") && j["results"].contains("excited_sigma_R")) {
        const double s = j["results"]["excited_sigma_R"].get<double>();
        if (s > 0.0) {
          opts.delta_k_p = 1.0 / (2.0 * s);
          found = true;
        }
      }
    }
    if (!found) spdlog::warn("delta_k_p not given and no scan manifest found; using {:g}", opts.delta_k_p);
  }
  spdlog::info("fitting {} samples with k0 = {:.4f}, delta_k = {:.4f}, delta_k_p = {:.4f}{}", samples.size(),
               opts.k0, opts.delta_k, opts.delta_k_p, opts.freeze_v ? ", v frozen" : "");

  const FrequencyEstimate freq = dominant_frequency(samples);
  const FitResult fit = fit_interference(samples, opts);
  write_fit_csv(run.out("fit.csv"), fit, &freq);
  write_fit_curve_csv(run.out("fit_curve.csv"), samples, fit.params);
  run.add_output(run.out("fit.csv"));
  run.add_output(run.out("fit_curve.csv"));
  const auto& p = fit.params;
  run.results() = {{"C", p.C},       {"v", p.v},         {"R_c", p.R_c},
                   {"delta_R_c", p.delta_R_c}, {"Phi", p.Phi}, {"residual_rms", fit.residual_rms},
                   {"converged", fit.converged}, {"iterations", fit.iterations}, {"omega_au", freq.omega}};
  spdlog::info("v = {:.6f}, R_c = {:.4f}, delta_R_c = {:.4f}, Phi = {:.4f}, rms {:.3e}{}", p.v, p.R_c, p.delta_R_c,
               p.Phi, fit.residual_rms, fit.converged ? "" : " (not converged)");
  run.finish();
  return fit.converged ? kOk : kNonConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("h2p"));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"Pump-probe simulations of the one-dimensional H2+ model"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "YAML configuration file (empty: production defaults)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory (overrides output.directory)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--checkpoint", g.checkpoint, "Input state: ground (pump), excited (dissociate, scan), any (spectrum)");

  auto add_dump = [&](CLI::App* sub) {
    sub->add_option("--dump-density", g.dump_density, "Write |psi|^2 as z,R,density CSV");
    sub->add_option("--dump-stride", g.dump_stride, "Keep every n-th point per axis in the dump")
        ->check(CLI::PositiveNumber);
  };
  auto* gs = app.add_subcommand("groundstate", "Imaginary-time ground state");
  auto* pump = app.add_subcommand("pump", "Pump pulse and ground-state projection");
  auto* dis = app.add_subcommand("dissociate", "Field-free dissociation with stats and checkpoints");
  auto* scan = app.add_subcommand("scan", "Pump-probe delay scan");
  auto* spec = app.add_subcommand("spectrum", "Momentum spectrum of a checkpointed state");
  auto* fit = app.add_subcommand("fit", "Fit the interference model to yield.csv");
  for (auto* s : {gs, pump, dis, spec}) add_dump(s);
  bool unmasked = false;
  spec->add_flag("--unmasked", unmasked, "Transform the whole state, not only |z| > 10 + R/2");
  FitFlags ff;
  double k0 = 0, dk = 0, dkp = 0;
  fit->add_option("--yield", ff.yield_path, "yield.csv to fit (default <out>/yield.csv)");
  auto* o_k0 = fit->add_option("--k0", k0, "Photoelectron momentum k0 (a.u.)");
  auto* o_dk = fit->add_option("--dk", dk, "Momentum width delta_k (a.u.)");
  auto* o_dkp = fit->add_option("--dkp", dkp, "Proton momentum spread delta_k_p (a.u.)");
  fit->add_flag("--freeze-v", ff.freeze_v, "Hold v at the frequency-derived value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (*o_k0) ff.k0 = k0;
  if (*o_dk) ff.dk = dk;
  if (*o_dkp) ff.dkp = dkp;
  set_worker_threads(g.threads);

  try {
    if (*gs) return cmd_groundstate(g);
    if (*pump) return cmd_pump(g);
    if (*dis) return cmd_dissociate(g);
    if (*scan) return cmd_scan(g);
    if (*spec) return cmd_spectrum(g, unmasked);
    if (*fit) return cmd_fit(g, ff);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kConfig;
  } catch (const InstabilityError& e) {
    spdlog::error("numerical instability: {}", e.what());
    return kInstability;
  } catch (const ConvergenceError& e) {
    spdlog::error("no convergence: {} (residual {:g})", e.what(), e.residual());
    return kNonConvergence;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
  return kOther;
}
