#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "h2p/core.hpp"
#include "h2p/model.hpp"
#include "h2p/observables.hpp"
#include "h2p/propagator.hpp"

namespace h2p {

/// When the post-probe yield counts as settled, and how long to wait for it.
struct YieldConvergence {
  double window = 50.0;        // a.u.
  double tol = 1e-4;           // relative
  double budget = 400.0;       // a.u. of propagation after the probe ends
  double sample_every = 0.5;   // a.u. between yield samples
};

/// Relaxes the ground state on a compact box around the molecule
/// (|z| <= 50, R <= 15, clipped to the grid) and embeds it into `grid`.
/// The state decays far inside that box, so the embedding is exact to
/// round-off and saves relaxing on large scan grids.
GroundStateResult prepare_ground_state(const Grid2D& grid, const GroundStateOptions& opts = {});

struct PumpResult {
  Wavefunction excited;  // unnormalized, ground state projected out
  double excitation_probability = 0.0;
};

/// Propagate psi0 through the pump window, then remove the psi0 component.
PumpResult run_pump(const Wavefunction& psi0, const PulseSpec& pump,
                    const std::optional<Absorber>& absorber = std::nullopt);

struct CheckpointInfo {
  double t = 0.0;
  double norm = 0.0;
  std::filesystem::path path;
};

/// Called every `every_steps` steps (and at the start and end) during field-free propagation.
struct Observer {
  std::size_t every_steps = 0;
  std::function<void(const Wavefunction&, const Propagator&)> callback;
};

/// Field-free propagation of psi until `until`, writing a checkpoint file into
/// `dir` whenever one of `checkpoint_at` is reached. Times are rounded to the
/// nearest step; t is kept as start + n dt so it does not drift.
std::vector<CheckpointInfo> propagate_field_free(Wavefunction& psi, double until,
                                                 const std::vector<double>& checkpoint_at,
                                                 const std::filesystem::path& dir,
                                                 const std::optional<Absorber>& absorber = std::nullopt,
                                                 const Observer& observer = {});

struct DelayScanRecord {
  double tau = 0.0;  // a.u., pump start to probe start
  double tau_fs = 0.0;
  double yield = 0.0;
  double k0 = 0.0;
  double delta_k = 0.0;
  double mean_R_at_probe = 0.0;   // at the probe midpoint
  double sigma_R_at_probe = 0.0;
  bool converged = false;
  std::string error;  // empty on success
};

/// Outgoing-region population plus absorbed probability of the unprobed
/// (field-free) evolution, one value per time step starting at t0.
struct ReferenceTrace {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> value;
  /// Value at the step nearest t; throws if t is outside the trace.
  double at(double t) const;
};

struct ProbeOptions {
  std::optional<Absorber> absorber;
  /// Unprobed evolution through the end of the probe budget. Without one the
  /// unprobed companion run is kept for the whole budget instead of only until
  /// the momentum snapshot is taken.
  const ReferenceTrace* reference = nullptr;
  YieldConvergence convergence;
  /// Momentum statistics are taken from the probed minus unprobed state at the
  /// latest sample where the absorber has removed at most this fraction of the
  /// probe yield.
  double spectrum_absorbed_fraction = 1e-3;
};

/// Probe a field-free state whose time stamp is the probe start. The yield is
/// the outgoing-region population plus the probability absorbed since the probe
/// start, minus the same quantity for the unprobed evolution. The subtraction
/// removes slow electrons from the pump drifting across |z| = 10 + R/2.
DelayScanRecord run_probe_from_checkpoint(const Wavefunction& start, PulseSpec probe,
                                          const ProbeOptions& opts = {});
DelayScanRecord run_probe_from_checkpoint(const std::filesystem::path& checkpoint, PulseSpec probe,
                                          const ProbeOptions& opts = {});

struct ScanPlan {
  PulseSpec pump = pulse_preset("pump117");
  PulseSpec probe = pulse_preset("probe45");
  std::vector<double> delays;  // a.u., ascending
  Grid2D grid;
  std::optional<Absorber> absorber = Absorber{};
  std::filesystem::path output_dir = "out";
  GroundStateOptions ground;
  YieldConvergence convergence;
  /// Parallel probe workers; each probe owns its state exclusively.
  std::size_t workers = 1;
  /// Optional progress messages (stage boundaries, one line per finished delay).
  std::function<void(const std::string&)> progress;

  /// Sorted delays, probe starting after the pump ends, valid pulses and absorber.
  void validate() const;
};

struct ScanResult {
  std::vector<DelayScanRecord> records;  // ascending tau
  double excitation_probability = 0.0;
  double ground_energy = 0.0;
  NuclearStats excited_stats;  // of the packet right after the pump
};

/// Ground state, pump, projection, checkpointed field-free dissociation, then
/// one probe per delay. `excited`, when given, replaces the first three stages.
/// Writes checkpoints/, yield.csv and scan_diagnostics.csv into the output directory.
ScanResult run_scan(const ScanPlan& plan, const Wavefunction* excited = nullptr);

/// Number of steps of size dt that reach `duration`, rounding to nearest.
std::size_t steps_for(double duration, double dt);

}  // namespace h2p
