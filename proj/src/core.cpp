#include "h2p/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "parallel.hpp"

namespace h2p {

namespace {

std::size_t axis_count(double lo, double hi, double step, const char* name) {
  if (!(step > 0.0) || !std::isfinite(step))
    throw ConfigError(std::string("grid: spacing d") + name + " must be positive");
  if (!(hi > lo)) throw ConfigError(std::string("grid: ") + name + "_max must exceed " + name + "_min");
  const double n = std::round((hi - lo) / step) + 1.0;
  if (n < 3.0) throw ConfigError(std::string("grid: fewer than 3 points along ") + name);
  return static_cast<std::size_t>(n);
}

}  // namespace

std::vector<double> Grid2D::z_axis() const {
  std::vector<double> a(n_z);
  for (std::size_t i = 0; i < n_z; ++i) a[i] = z(i);
  return a;
}

std::vector<double> Grid2D::R_axis() const {
  std::vector<double> a(n_R);
  for (std::size_t j = 0; j < n_R; ++j) a[j] = R(j);
  return a;
}

bool Grid2D::same_sampling(const Grid2D& o) const {
  return n_z == o.n_z && n_R == o.n_R && z_min == o.z_min && dz == o.dz && R_min == o.R_min &&
         dR == o.dR;
}

Grid2D make_grid(const GridSpec& s) {
  if (!(s.R_min > 0.0)) throw ConfigError("grid: R_min must be positive");
  if (!(s.dt > 0.0)) throw ConfigError("grid: dt must be positive");
  Grid2D g;
  g.n_z = axis_count(s.z_min, s.z_max, s.dz, "z");
  g.n_R = axis_count(s.R_min, s.R_max, s.dR, "R");
  g.z_min = s.z_min;
  g.dz = s.dz;
  g.z_max = g.z(g.n_z - 1);
  g.R_min = s.R_min;
  g.dR = s.dR;
  g.R_max = g.R(g.n_R - 1);
  g.dt = s.dt;
  return g;
}

void Wavefunction::clamp_boundary() {
  const std::size_t nz = grid_.n_z, nR = grid_.n_R;
  if (data_.empty()) return;
  for (std::size_t i = 0; i < nz; ++i) {
    at(0, i) = 0.0;
    at(nR - 1, i) = 0.0;
  }
  for (std::size_t j = 0; j < nR; ++j) {
    at(j, 0) = 0.0;
    at(j, nz - 1) = 0.0;
  }
}

void Wavefunction::scale(cplx factor) {
  for (auto& v : data_) v *= factor;
}

double norm(const Wavefunction& psi) {
  const Grid2D& g = psi.grid();
  std::vector<double> partial(g.n_R, 0.0);
  parallel_for(g.n_R, [&](std::size_t j) {
    double s = 0.0;
    for (const cplx& v : psi.line(j)) s += std::norm(v);
    partial[j] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total * g.dz * g.dR;
}

cplx inner_product(const Wavefunction& a, const Wavefunction& b) {
  if (!a.grid().same_sampling(b.grid())) throw ConfigError("inner_product: grid mismatch");
  const Grid2D& g = a.grid();
  std::vector<cplx> partial(g.n_R);
  parallel_for(g.n_R, [&](std::size_t j) {
    cplx s{0.0, 0.0};
    auto la = a.line(j);
    auto lb = b.line(j);
    for (std::size_t i = 0; i < g.n_z; ++i) s += std::conj(la[i]) * lb[i];
    partial[j] = s;
  });
  cplx total{0.0, 0.0};
  for (const cplx& p : partial) total += p;
  return total * (g.dz * g.dR);
}

double normalize(Wavefunction& psi) {
  const double n = norm(psi);
  if (n > 0.0) psi.scale(1.0 / std::sqrt(n));
  return n;
}

Wavefunction embed(const Wavefunction& psi, const Grid2D& target) {
  const Grid2D& src = psi.grid();
  if (src.dz != target.dz || src.dR != target.dR)
    throw ConfigError("embed: spacings differ");
  const double oz = (src.z_min - target.z_min) / target.dz;
  const double oR = (src.R_min - target.R_min) / target.dR;
  const double iz = std::round(oz), iR = std::round(oR);
  if (std::abs(oz - iz) > 1e-6 || std::abs(oR - iR) > 1e-6)
    throw ConfigError("embed: axes are not aligned");
  Wavefunction out(target, psi.t());
  for (std::size_t j = 0; j < src.n_R; ++j) {
    const long jt = static_cast<long>(j) + static_cast<long>(iR);
    if (jt < 0 || jt >= static_cast<long>(target.n_R)) continue;
    for (std::size_t i = 0; i < src.n_z; ++i) {
      const long it = static_cast<long>(i) + static_cast<long>(iz);
      if (it < 0 || it >= static_cast<long>(target.n_z)) continue;
      out.at(static_cast<std::size_t>(jt), static_cast<std::size_t>(it)) = psi.at(j, i);
    }
  }
  out.clamp_boundary();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: "H2PWF1\0\0", u32 n_R, u32 n_z, f64 z_min dz R_min dR dt t norm,
// then n_R*n_z (re, im) f64 pairs, all little-endian, R-major.

namespace {

constexpr char kMagic[8] = {'H', '2', 'P', 'W', 'F', '1', '\0', '\0'};

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Wavefunction& psi) {
  const Grid2D& g = psi.grid();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.n_R));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.n_z));
  for (double v : {g.z_min, g.dz, g.R_min, g.dR, g.dt, psi.t(), norm(psi)}) put_le<double>(os, v);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(psi.data().data()),
             static_cast<std::streamsize>(psi.data().size() * sizeof(cplx)));
  } else {
    for (const cplx& v : psi.data()) {
      put_le<double>(os, v.real());
      put_le<double>(os, v.imag());
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Wavefunction read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto n_R = get_le<std::uint32_t>(is);
  const auto n_z = get_le<std::uint32_t>(is);
  Grid2D g;
  g.n_R = n_R;
  g.n_z = n_z;
  g.z_min = get_le<double>(is);
  g.dz = get_le<double>(is);
  g.R_min = get_le<double>(is);
  g.dR = get_le<double>(is);
  g.dt = get_le<double>(is);
  g.z_max = g.z(g.n_z - 1);
  g.R_max = g.R(g.n_R - 1);
  const double t = get_le<double>(is);
  (void)get_le<double>(is);  // stored norm, informational
  Wavefunction psi(g, t);
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(psi.data().data()),
            static_cast<std::streamsize>(psi.data().size() * sizeof(cplx)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
  } else {
    for (cplx& v : psi.data()) {
      const double re = get_le<double>(is);
      const double im = get_le<double>(is);
      v = {re, im};
    }
  }
  return psi;
}

}  // namespace h2p
