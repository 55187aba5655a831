#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "h2p/analysis.hpp"
#include "h2p/core.hpp"
#include "h2p/observables.hpp"
#include "h2p/pipeline.hpp"

namespace h2p {

// CSV files written by the tools. Column order and header names are fixed;
// numbers use %.17g so that identical runs produce identical bytes.

inline constexpr const char* kStatsHeader = "t_au,t_fs,norm,mean_R,sigma_R,energy";
inline constexpr const char* kSpectrumHeader = "k_au,dPdk";
inline constexpr const char* kYieldHeader = "delay_au,delay_fs,yield,k0,delta_k";
inline constexpr const char* kScanDiagnosticsHeader =
    "delay_au,delay_fs,mean_R_at_probe,sigma_R_at_probe,converged,error";
inline constexpr const char* kFitHeader = "parameter,value,uncertainty";
inline constexpr const char* kFitCurveHeader = "tau,data,model,envelope_hi,envelope_lo";
inline constexpr const char* kDensityHeader = "z,R,density";

struct StatsRow {
  double t = 0.0;
  double norm = 0.0;
  double mean_R = 0.0;
  double sigma_R = 0.0;
  double energy = 0.0;
};

/// nuclear_stats plus the field-free energy of psi.
StatsRow stats_row(const Hamiltonian& h, const Wavefunction& psi);

std::string format_double(double x);

void write_stats_csv(const std::filesystem::path& path, const std::vector<StatsRow>& rows);
void write_spectrum_csv(const std::filesystem::path& path, const MomentumSpectrum& spec);
/// yield.csv is preceded by one '#' comment line stating the delay convention.
void write_yield_csv(const std::filesystem::path& path, const std::vector<DelayScanRecord>& rows);
void write_scan_diagnostics_csv(const std::filesystem::path& path,
                                const std::vector<DelayScanRecord>& rows);

struct YieldRow {
  double delay_au = 0.0;
  double delay_fs = 0.0;
  double yield = 0.0;
  double k0 = 0.0;
  double delta_k = 0.0;
};

/// Reads yield.csv, skipping '#' comment lines; errors name the offending line.
std::vector<YieldRow> read_yield_csv(const std::filesystem::path& path);

/// Rows: C, v, R_c, delta_R_c, Phi (fitted) followed by the fixed inputs
/// k0, delta_k, delta_k_p, m_p (uncertainty 0), residual_rms and, when
/// given, the dominant angular frequency of the data as omega_au.
void write_fit_csv(const std::filesystem::path& path, const FitResult& fit,
                   const FrequencyEstimate* frequency = nullptr);
void write_fit_curve_csv(const std::filesystem::path& path, const std::vector<DelaySample>& data,
                         const InterferenceModelParams& p);

/// |psi|^2 on the grid, every `stride`-th point along each axis.
void write_density_csv(const std::filesystem::path& path, const Wavefunction& psi, std::size_t stride = 1);

}  // namespace h2p
