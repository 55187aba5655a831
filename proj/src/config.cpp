#include "h2p/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace h2p {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool parse_number(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

// Missing keys and explicit nulls both mean "keep the default".
bool absent(const YAML::Node& n) { return !n.IsDefined() || n.IsNull(); }

// Reads one section of the YAML tree, tracking which keys were consumed so
// that anything left over is reported as unknown.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::string_view source)
      : node_(node), path_(std::move(path)), source_(source) {
    if (!absent(node_) && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
    const int line = at.Mark().line >= 0 ? at.Mark().line + 1 : 0;
    throw ConfigError(std::string(source_) + ":" + std::to_string(line) + ": " + path_ + ": " + what);
  }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    const YAML::Node& cn = node_;
    return cn[key];
  }

  Section sub(const std::string& key) { return Section(get(key), path_.empty() ? key : path_ + "." + key, source_); }

  std::string scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected a scalar");
    return n.Scalar();
  }

  /// Dimensioned value; fs converted to a.u., nm and rad returned as given.
  std::optional<double> quantity(const std::string& key, std::initializer_list<std::string_view> allowed) {
    YAML::Node n = get(key);
    if (absent(n)) return std::nullopt;
    try {
      return parse_quantity(scalar(n, key), allowed);
    } catch (const ConfigError& e) {
      fail(n, key + ": " + e.what());
    }
  }

  std::optional<double> number(const std::string& key) {
    YAML::Node n = get(key);
    if (absent(n)) return std::nullopt;
    double v = 0.0;
    if (!parse_number(scalar(n, key), v)) fail(n, key + ": expected a plain number");
    return v;
  }

  std::optional<long long> integer(const std::string& key) {
    YAML::Node n = get(key);
    if (absent(n)) return std::nullopt;
    const std::string s = trim(scalar(n, key));
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(n, key + ": expected an integer");
    return v;
  }

  std::optional<std::string> string(const std::string& key) {
    YAML::Node n = get(key);
    if (absent(n)) return std::nullopt;
    return scalar(n, key);
  }

  const YAML::Node& node() const { return node_; }
  const std::string& path() const { return path_; }
  std::string_view source() const { return source_; }

  void reject_unknown() const {
    if (!node_ || !node_.IsMap()) return;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!seen_.count(key)) fail(it->first, "unknown key '" + key + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::string_view source_;
  std::set<std::string> seen_;
};

PulseSpec parse_pulse(const YAML::Node& node, const std::string& path, std::string_view source,
                      const PulseSpec& fallback, PulseRole role) {
  PulseSpec p = fallback;
  if (absent(node)) return p;
  auto fail = [&](const YAML::Node& at, const std::string& what) {
    throw ConfigError(std::string(source) + ":" + std::to_string(at.Mark().line + 1) + ": " + path + ": " + what);
  };
  try {
    if (node.IsScalar()) {
      p = pulse_preset(trim(node.Scalar()));
      p.role = role;
      return p;
    }
    Section s(node, path, source);
    if (auto preset = s.string("preset")) p = pulse_preset(trim(*preset));
    if (auto v = s.quantity("A0", {"au"})) p.A0 = *v;
    const YAML::Node om = node["omega"], wl = node["wavelength"];
    if (!absent(om) && !absent(wl)) fail(node, "give either omega or wavelength, not both");
    if (auto v = s.quantity("omega", {"au"})) p.omega = *v;
    if (auto v = s.quantity("wavelength", {"nm"})) {
      if (!(*v > 0.0)) fail(wl, "wavelength must be positive");
      p.omega = nm_to_omega(*v);
    }
    if (auto v = s.integer("cycles")) p.n_cycles = static_cast<int>(*v);
    if (auto v = s.quantity("phase", {"rad"})) p.phase = *v;
    if (auto v = s.quantity("delay", {"au", "fs"})) p.delay = *v;
    s.reject_unknown();
    p.role = role;
    p.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(std::string(source), 0) == 0) throw;
    fail(node, msg);
  }
  return p;
}

std::string fmt_au(double v, std::string_view unit = "au") {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g %s", v, std::string(unit).c_str());
  return buf;
}

std::string fmt_plain(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool same_pulse(const PulseSpec& a, const PulseSpec& b) {
  return a.A0 == b.A0 && a.omega == b.omega && a.n_cycles == b.n_cycles && a.delay == b.delay &&
         a.phase == b.phase && a.role == b.role;
}

}  // namespace

double parse_quantity(std::string_view text, std::initializer_list<std::string_view> allowed) {
  std::string t = trim(text);
  std::size_t k = t.size();
  while (k > 0 && std::isalpha(static_cast<unsigned char>(t[k - 1]))) --k;
  const std::string unit = t.substr(k);
  const std::string num = trim(t.substr(0, k));
  double v = 0.0;
  if (!parse_number(num, v)) throw ConfigError("'" + t + "' is not a number with a unit tag");
  auto allowed_list = [&] {
    std::string s;
    for (auto a : allowed) s += (s.empty() ? "" : ", ") + std::string(a);
    return s;
  };
  if (unit.empty()) throw ConfigError("missing unit tag in '" + t + "' (expected one of " + allowed_list() + ")");
  if (std::find(allowed.begin(), allowed.end(), unit) == allowed.end())
    throw ConfigError("unit '" + unit + "' not accepted here (expected one of " + allowed_list() + ")");
  if (unit == "fs") return fs_to_au(v);
  return v;
}

std::vector<double> parse_delay_range(std::string_view text) {
  const std::string t = trim(text);
  std::vector<std::string> parts;
  std::stringstream ss(t);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() == 1) return {parse_quantity(parts[0], {"au", "fs"})};
  if (parts.size() != 3) throw ConfigError("delay range '" + t + "' must read start:stop:step");
  const double a = parse_quantity(parts[0], {"au", "fs"});
  const double b = parse_quantity(parts[1], {"au", "fs"});
  const double h = parse_quantity(parts[2], {"au", "fs"});
  if (!(h > 0.0)) throw ConfigError("delay range '" + t + "': step must be positive");
  if (b < a) throw ConfigError("delay range '" + t + "': stop precedes start");
  const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a + static_cast<double>(k) * h;
  return out;
}

RunConfig::RunConfig() { delays = parse_delay_range("10fs:24fs:1fs"); }

double RunConfig::dissociate_until() const {
  if (until) return *until;
  if (delays.empty()) throw ConfigError("output.until is not set and there are no delays");
  return delays.back();
}

bool RunConfig::operator==(const RunConfig& o) const {
  auto same_grid = [](const GridSpec& a, const GridSpec& b) {
    return a.z_min == b.z_min && a.z_max == b.z_max && a.dz == b.dz && a.R_min == b.R_min &&
           a.R_max == b.R_max && a.dR == b.dR && a.dt == b.dt;
  };
  auto same_abs = [](const std::optional<Absorber>& a, const std::optional<Absorber>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->width == b->width && a->strength == b->strength);
  };
  return same_grid(grid, o.grid) && same_pulse(pump, o.pump) && same_pulse(probe, o.probe) &&
         delays == o.delays && workers == o.workers && same_abs(absorber, o.absorber) &&
         ground.tol == o.ground.tol && ground.max_iter == o.ground.max_iter &&
         ground.dt_imag == o.ground.dt_imag && ground.guess_sigma_z == o.ground.guess_sigma_z &&
         ground.guess_R0 == o.ground.guess_R0 && ground.guess_sigma_R == o.ground.guess_sigma_R &&
         convergence.window == o.convergence.window && convergence.tol == o.convergence.tol &&
         convergence.budget == o.convergence.budget && convergence.sample_every == o.convergence.sample_every &&
         output_dir == o.output_dir && checkpoint_every == o.checkpoint_every && stats_every == o.stats_every &&
         until == o.until;
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string(source) + ":" + std::to_string(e.mark.line + 1) + ": syntax error: " + e.msg);
  }
  RunConfig cfg;
  Section top(root, "", source);

  {
    Section g = top.sub("grid");
    if (auto v = g.quantity("z_min", {"au"})) cfg.grid.z_min = *v;
    if (auto v = g.quantity("z_max", {"au"})) cfg.grid.z_max = *v;
    if (auto v = g.quantity("dz", {"au"})) cfg.grid.dz = *v;
    if (auto v = g.quantity("R_min", {"au"})) cfg.grid.R_min = *v;
    if (auto v = g.quantity("R_max", {"au"})) cfg.grid.R_max = *v;
    if (auto v = g.quantity("dR", {"au"})) cfg.grid.dR = *v;
    g.reject_unknown();
    try {
      make_grid(cfg.grid);
    } catch (const ConfigError& e) {
      g.fail(g.node() ? g.node() : root, e.what());
    }
  }
  {
    Section p = top.sub("pulses");
    cfg.pump = parse_pulse(p.get("pump"), "pulses.pump", source, cfg.pump, PulseRole::pump);
    cfg.probe = parse_pulse(p.get("probe"), "pulses.probe", source, cfg.probe, PulseRole::probe);
    p.reject_unknown();
  }
  {
    Section s = top.sub("scan");
    YAML::Node d = s.get("delays");
    if (!absent(d)) {
      try {
        if (d.IsSequence()) {
          cfg.delays.clear();
          for (const auto& item : d) {
            if (!item.IsScalar()) s.fail(item, "delays: expected scalars");
            for (double v : parse_delay_range(item.Scalar())) cfg.delays.push_back(v);
          }
        } else if (d.IsScalar()) {
          cfg.delays = parse_delay_range(d.Scalar());
        } else {
          s.fail(d, "delays: expected a range string or a list");
        }
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(std::string(source), 0) == 0) throw;
        s.fail(d, "delays: " + msg);
      }
    }
    if (auto v = s.integer("workers")) {
      if (*v < 1) s.fail(s.node()["workers"], "workers must be >= 1");
      cfg.workers = static_cast<std::size_t>(*v);
    }
    s.reject_unknown();
  }
  {
    Section pr = top.sub("propagator");
    if (auto v = pr.quantity("dt", {"au", "fs"})) {
      if (!(*v > 0.0)) pr.fail(pr.node()["dt"], "dt must be positive");
      cfg.grid.dt = *v;
    }
    YAML::Node a = pr.get("absorber");
    if (!absent(a)) {
      if (a.IsScalar()) {
        const std::string v = trim(a.Scalar());
        if (v == "off" || v == "false" || v == "none")
          cfg.absorber.reset();
        else if (v == "on" || v == "true")
          cfg.absorber = Absorber{};
        else
          pr.fail(a, "absorber: expected off, on or a mapping");
      } else {
        Section as(a, "propagator.absorber", source);
        Absorber ab;
        if (auto v = as.quantity("width", {"au"})) ab.width = *v;
        if (auto v = as.number("strength")) ab.strength = *v;
        as.reject_unknown();
        if (!(ab.width > 0.0)) as.fail(a, "width must be positive");
        if (!(ab.strength >= 0.0 && ab.strength <= 1.0)) as.fail(a, "strength must lie in [0, 1]");
        cfg.absorber = ab;
      }
    }
    {
      Section gs = pr.sub("ground_state");
      if (auto v = gs.number("tol")) cfg.ground.tol = *v;
      if (auto v = gs.integer("max_iter")) cfg.ground.max_iter = static_cast<std::size_t>(std::max(1LL, *v));
      if (auto v = gs.quantity("dt_imag", {"au"})) cfg.ground.dt_imag = *v;
      if (auto v = gs.quantity("guess_sigma_z", {"au"})) cfg.ground.guess_sigma_z = *v;
      if (auto v = gs.quantity("guess_R0", {"au"})) cfg.ground.guess_R0 = *v;
      if (auto v = gs.quantity("guess_sigma_R", {"au"})) cfg.ground.guess_sigma_R = *v;
      gs.reject_unknown();
      if (!(cfg.ground.tol > 0.0) || !(cfg.ground.dt_imag > 0.0))
        gs.fail(gs.node(), "tol and dt_imag must be positive");
    }
    {
      Section y = pr.sub("yield");
      if (auto v = y.quantity("window", {"au", "fs"})) cfg.convergence.window = *v;
      if (auto v = y.number("tol")) cfg.convergence.tol = *v;
      if (auto v = y.quantity("budget", {"au", "fs"})) cfg.convergence.budget = *v;
      if (auto v = y.quantity("sample_every", {"au", "fs"})) cfg.convergence.sample_every = *v;
      y.reject_unknown();
      if (!(cfg.convergence.window > 0.0) || !(cfg.convergence.tol > 0.0) || !(cfg.convergence.budget >= 0.0) ||
          !(cfg.convergence.sample_every > 0.0))
        y.fail(y.node(), "window, tol and sample_every must be positive, budget non-negative");
    }
    pr.reject_unknown();
  }
  {
    Section o = top.sub("output");
    if (auto v = o.string("directory")) cfg.output_dir = *v;
    if (auto v = o.quantity("checkpoint_every", {"au", "fs"})) cfg.checkpoint_every = *v;
    if (auto v = o.quantity("stats_every", {"au", "fs"})) {
      if (!(*v > 0.0)) o.fail(o.node()["stats_every"], "stats_every must be positive");
      cfg.stats_every = *v;
    }
    if (auto v = o.quantity("until", {"au", "fs"})) cfg.until = *v;
    o.reject_unknown();
  }
  top.reject_unknown();

  if (cfg.absorber) {
    try {
      validate_absorber(make_grid(cfg.grid), *cfg.absorber);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ": propagator.absorber: " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string write_config(const RunConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "z_min" << YAML::Value << fmt_au(c.grid.z_min);
  e << YAML::Key << "z_max" << YAML::Value << fmt_au(c.grid.z_max);
  e << YAML::Key << "dz" << YAML::Value << fmt_au(c.grid.dz);
  e << YAML::Key << "R_min" << YAML::Value << fmt_au(c.grid.R_min);
  e << YAML::Key << "R_max" << YAML::Value << fmt_au(c.grid.R_max);
  e << YAML::Key << "dR" << YAML::Value << fmt_au(c.grid.dR);
  e << YAML::EndMap;

  auto pulse = [&](const char* name, const PulseSpec& p) {
    e << YAML::Key << name << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "A0" << YAML::Value << fmt_au(p.A0);
    e << YAML::Key << "omega" << YAML::Value << fmt_au(p.omega);
    e << YAML::Key << "cycles" << YAML::Value << p.n_cycles;
    e << YAML::Key << "phase" << YAML::Value << fmt_au(p.phase, "rad");
    e << YAML::Key << "delay" << YAML::Value << fmt_au(p.delay);
    e << YAML::EndMap;
  };
  e << YAML::Key << "pulses" << YAML::Value << YAML::BeginMap;
  pulse("pump", c.pump);
  pulse("probe", c.probe);
  e << YAML::EndMap;

  e << YAML::Key << "scan" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "delays" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double d : c.delays) e << fmt_au(d);
  e << YAML::EndSeq;
  e << YAML::Key << "workers" << YAML::Value << c.workers;
  e << YAML::EndMap;

  e << YAML::Key << "propagator" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dt" << YAML::Value << fmt_au(c.grid.dt);
  if (c.absorber) {
    e << YAML::Key << "absorber" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "width" << YAML::Value << fmt_au(c.absorber->width);
    e << YAML::Key << "strength" << YAML::Value << fmt_plain(c.absorber->strength);
    e << YAML::EndMap;
  } else {
    e << YAML::Key << "absorber" << YAML::Value << "off";
  }
  e << YAML::Key << "ground_state" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "tol" << YAML::Value << fmt_plain(c.ground.tol);
  e << YAML::Key << "max_iter" << YAML::Value << c.ground.max_iter;
  e << YAML::Key << "dt_imag" << YAML::Value << fmt_au(c.ground.dt_imag);
  e << YAML::Key << "guess_sigma_z" << YAML::Value << fmt_au(c.ground.guess_sigma_z);
  e << YAML::Key << "guess_R0" << YAML::Value << fmt_au(c.ground.guess_R0);
  e << YAML::Key << "guess_sigma_R" << YAML::Value << fmt_au(c.ground.guess_sigma_R);
  e << YAML::EndMap;
  e << YAML::Key << "yield" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "window" << YAML::Value << fmt_au(c.convergence.window);
  e << YAML::Key << "tol" << YAML::Value << fmt_plain(c.convergence.tol);
  e << YAML::Key << "budget" << YAML::Value << fmt_au(c.convergence.budget);
  e << YAML::Key << "sample_every" << YAML::Value << fmt_au(c.convergence.sample_every);
  e << YAML::EndMap;
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "directory" << YAML::Value << YAML::DoubleQuoted << c.output_dir.string();
  e << YAML::Key << "checkpoint_every" << YAML::Value << fmt_au(c.checkpoint_every);
  e << YAML::Key << "stats_every" << YAML::Value << fmt_au(c.stats_every);
  if (c.until) e << YAML::Key << "until" << YAML::Value << fmt_au(*c.until);
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

ScanPlan make_scan_plan(const RunConfig& cfg) {
  ScanPlan plan;
  plan.pump = cfg.pump;
  plan.probe = cfg.probe;
  plan.delays = cfg.delays;
  plan.grid = make_grid(cfg.grid);
  plan.absorber = cfg.absorber;
  plan.output_dir = cfg.output_dir;
  plan.ground = cfg.ground;
  plan.convergence = cfg.convergence;
  plan.workers = cfg.workers;
  return plan;
}

}  // namespace h2p
