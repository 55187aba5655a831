#include "h2p/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "h2p/propagator.hpp"

namespace h2p {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class... T>
void row(std::ofstream& out, const T&... fields) {
  bool first = true;
  auto put = [&](const auto& f) {
    if (!first) out << ',';
    first = false;
    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(f)>>)
      out << format_double(static_cast<double>(f));
    else
      out << f;
  };
  (put(fields), ...);
  out << '\n';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

StatsRow stats_row(const Hamiltonian& h, const Wavefunction& psi) {
  const NuclearStats s = nuclear_stats(psi);
  return {psi.t(), s.norm, s.mean_R, s.sigma_R, energy_expectation(h, psi)};
}

void write_stats_csv(const std::filesystem::path& path, const std::vector<StatsRow>& rows) {
  auto out = open_out(path);
  out << kStatsHeader << '\n';
  for (const auto& r : rows) row(out, r.t, au_to_fs(r.t), r.norm, r.mean_R, r.sigma_R, r.energy);
  finish(out, path);
}

void write_spectrum_csv(const std::filesystem::path& path, const MomentumSpectrum& spec) {
  auto out = open_out(path);
  out << kSpectrumHeader << '\n';
  for (std::size_t q = 0; q < spec.k_axis.size(); ++q) row(out, spec.k_axis[q], spec.density[q]);
  finish(out, path);
}

void write_yield_csv(const std::filesystem::path& path, const std::vector<DelayScanRecord>& rows) {
  auto out = open_out(path);
  out << "# delay = probe start - pump start\n";
  out << kYieldHeader << '\n';
  for (const auto& r : rows) row(out, r.tau, r.tau_fs, r.yield, r.k0, r.delta_k);
  finish(out, path);
}

void write_scan_diagnostics_csv(const std::filesystem::path& path,
                                const std::vector<DelayScanRecord>& rows) {
  auto out = open_out(path);
  out << kScanDiagnosticsHeader << '\n';
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    row(out, r.tau, r.tau_fs, r.mean_R_at_probe, r.sigma_R_at_probe, r.converged ? "1" : "0", err);
  }
  finish(out, path);
}

std::vector<YieldRow> read_yield_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<YieldRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kYieldHeader)
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected header '" +
                                 kYieldHeader + "'");
      header_seen = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 5)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    double v[5];
    for (int c = 0; c < 5; ++c) {
      try {
        std::size_t used = 0;
        v[c] = std::stod(f[c], &used);
        if (used != f[c].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + f[c] + "'");
      }
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  if (!header_seen) throw std::runtime_error(path.string() + ": missing header");
  return rows;
}

void write_fit_csv(const std::filesystem::path& path, const FitResult& fit, const FrequencyEstimate* frequency) {
  auto out = open_out(path);
  const auto& p = fit.params;
  out << kFitHeader << '\n';
  row(out, "C", p.C, fit.uncertainty[0]);
  row(out, "v", p.v, fit.uncertainty[1]);
  row(out, "R_c", p.R_c, fit.uncertainty[2]);
  row(out, "delta_R_c", p.delta_R_c, fit.uncertainty[3]);
  row(out, "Phi", p.Phi, fit.uncertainty[4]);
  row(out, "k0", p.k0, 0.0);
  row(out, "delta_k", p.delta_k, 0.0);
  row(out, "delta_k_p", p.delta_k_p, 0.0);
  row(out, "m_p", p.m_p, 0.0);
  row(out, "residual_rms", fit.residual_rms, 0.0);
  if (frequency) row(out, "omega_au", frequency->omega, frequency->uncertainty);
  finish(out, path);
}

void write_fit_curve_csv(const std::filesystem::path& path, const std::vector<DelaySample>& data,
                         const InterferenceModelParams& p) {
  auto out = open_out(path);
  out << kFitCurveHeader << '\n';
  for (const auto& s : data) {
    const EnvelopeBand band = model_envelope(p, s.tau);
    row(out, s.tau, s.yield, model_yield(p, s.tau), band.hi, band.lo);
  }
  finish(out, path);
}

void write_density_csv(const std::filesystem::path& path, const Wavefunction& psi, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("write_density_csv: stride must be positive");
  auto out = open_out(path);
  const Grid2D& g = psi.grid();
  out << kDensityHeader << '\n';
  for (std::size_t j = 0; j < g.n_R; j += stride)
    for (std::size_t i = 0; i < g.n_z; i += stride) row(out, g.z(i), g.R(j), std::norm(psi.at(j, i)));
  finish(out, path);
}

}  // namespace h2p
