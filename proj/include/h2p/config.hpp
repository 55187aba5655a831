#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "h2p/core.hpp"
#include "h2p/model.hpp"
#include "h2p/pipeline.hpp"
#include "h2p/propagator.hpp"

namespace h2p {

/// Everything a run needs, in atomic units. Defaults are the production setup:
/// full grid, pump117 and probe45.
///
/// YAML layout (every key optional, unknown keys rejected). Dimensioned
/// scalars carry a unit tag: "0.1 au", "16 fs", "117 nm", "0 rad".
///
///   grid:       { z_min, z_max, dz, R_min, R_max, dR }           lengths
///   pulses:
///     pump:     <preset name> | { preset, A0, omega | wavelength, cycles, phase, delay }
///     probe:    same
///   scan:       { delays: "16fs:18fs:0.1fs" | [list], workers }
///   propagator: { dt, absorber: off | { width, strength },
///                 ground_state: { tol, max_iter, dt_imag },
///                 yield: { window, tol, budget, sample_every } }
///   output:     { directory, checkpoint_every, stats_every, until }
struct RunConfig {
  GridSpec grid;
  PulseSpec pump = pulse_preset("pump117");
  PulseSpec probe = pulse_preset("probe45");
  std::vector<double> delays;  // a.u., pump start to probe start
  std::size_t workers = 1;
  std::optional<Absorber> absorber = Absorber{};
  GroundStateOptions ground;
  YieldConvergence convergence;
  std::filesystem::path output_dir = "out";
  double checkpoint_every = 0.0;  // a.u.; 0 disables periodic checkpoints
  double stats_every = 1.0;       // a.u.
  std::optional<double> until;    // a.u.; end of `dissociate`, defaults to the last delay

  RunConfig();
  double dissociate_until() const;
  bool operator==(const RunConfig&) const;
};

/// Parse YAML text. Errors are ConfigError with "<source>:<line>: ..." prefixes.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical YAML for `cfg`, every value in atomic units; parse_config of the
/// result compares equal to `cfg`.
std::string write_config(const RunConfig& cfg);

/// "16fs:18fs:0.1fs" (inclusive) or "600 au"; returns a.u.
std::vector<double> parse_delay_range(std::string_view text);

/// Scalar with a unit tag, converted to atomic units. `allowed` lists the
/// accepted tags among au, fs, nm, rad.
double parse_quantity(std::string_view text, std::initializer_list<std::string_view> allowed);

ScanPlan make_scan_plan(const RunConfig& cfg);

}  // namespace h2p
