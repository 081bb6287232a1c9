#include "nlspace/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace nlspace {

std::string to_string(Command c) {
  switch (c) {
    case Command::kernel_check: return "kernel-check";
    case Command::seminorm: return "seminorm";
    case Command::mollify: return "mollify";
    case Command::poincare: return "poincare";
    case Command::boundary: return "boundary";
    case Command::compactness: return "compactness";
    case Command::sequence: return "sequence";
  }
  return "?";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::kernel_check, Command::seminorm, Command::mollify, Command::poincare, Command::boundary,
                    Command::compactness, Command::sequence})
    if (to_string(c) == s) return c;
  throw ArgumentError("unknown command '" + s + "'");
}

ConfigError::ConfigError(int line_no, const std::string& msg)
    : ArgumentError(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg), line(line_no) {}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

double to_double(const std::string& v, int line) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(line, "expected true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& v, int line) {
  std::vector<double> out;
  for (const auto& x : split(v)) out.push_back(to_double(x, line));
  return out;
}

Vec to_vec(const std::string& v, int line) {
  const auto xs = to_doubles(v, line);
  if (xs.empty() || xs.size() > 3) throw ConfigError(line, "expected 1 to 3 coordinates");
  Vec out{};
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i];
  return out;
}

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(const Vec& v) { return fmt(v[0]) + ", " + fmt(v[1]) + ", " + fmt(v[2]); }

std::string fmt(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out;
}

struct Entry {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, int)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

using Opt = std::optional<std::string>;

const std::vector<Entry>& entries() {
  using C = ExperimentConfig;
  static const std::vector<Entry> table = {
      {"command", [](C& c, const std::string& v, int l) {
         try {
           c.command = command_from_string(v);
         } catch (const ArgumentError& e) {
           throw ConfigError(l, e.what());
         }
       }, [](const C& c) -> Opt { return to_string(c.command); }},
      {"kind", [](C& c, const std::string& v, int) { c.kind = v; }, [](const C& c) -> Opt { return c.kind; }},
      {"d", [](C& c, const std::string& v, int l) { c.d = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.d); }},
      {"p", [](C& c, const std::string& v, int l) { c.p = to_double(v, l); }, [](const C& c) -> Opt { return fmt(c.p); }},
      {"s", [](C& c, const std::string& v, int l) { c.s = to_double(v, l); }, [](const C& c) -> Opt { return fmt(c.s); }},
      {"support_radius", [](C& c, const std::string& v, int l) { c.support_radius = to_double(v, l); },
       [](const C& c) -> Opt { return c.support_radius ? Opt(fmt(*c.support_radius)) : std::nullopt; }},
      {"cone.axis", [](C& c, const std::string& v, int l) { c.cone_axis = to_vec(v, l); },
       [](const C& c) -> Opt { return c.cone_axis ? Opt(fmt(*c.cone_axis)) : std::nullopt; }},
      {"cone.aperture", [](C& c, const std::string& v, int l) { c.cone_aperture = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.cone_aperture); }},
      {"cone.restrict_kernel", [](C& c, const std::string& v, int l) { c.restrict_kernel = to_bool(v, l); },
       [](const C& c) -> Opt { return c.restrict_kernel ? "true" : "false"; }},
      {"domain.shape", [](C& c, const std::string& v, int) { c.shape = v; }, [](const C& c) -> Opt { return c.shape; }},
      {"domain.lo", [](C& c, const std::string& v, int l) { c.lo = to_vec(v, l); }, [](const C& c) -> Opt { return fmt(c.lo); }},
      {"domain.hi", [](C& c, const std::string& v, int l) { c.hi = to_vec(v, l); }, [](const C& c) -> Opt { return fmt(c.hi); }},
      {"domain.center", [](C& c, const std::string& v, int l) { c.center = to_vec(v, l); },
       [](const C& c) -> Opt { return fmt(c.center); }},
      {"domain.radius", [](C& c, const std::string& v, int l) { c.radius = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.radius); }},
      {"domain.zeta_table", [](C& c, const std::string& v, int) { c.zeta_table = v; },
       [](const C& c) -> Opt { return c.zeta_table.empty() ? std::nullopt : Opt(c.zeta_table); }},
      {"domain.window_radius", [](C& c, const std::string& v, int l) { c.window_radius = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.window_radius); }},
      {"grid.n_per_axis", [](C& c, const std::string& v, int l) { c.n_per_axis = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return c.n_per_axis ? Opt(std::to_string(*c.n_per_axis)) : std::nullopt; }},
      {"grid.h", [](C& c, const std::string& v, int l) { c.h = to_double(v, l); },
       [](const C& c) -> Opt { return c.h ? Opt(fmt(*c.h)) : std::nullopt; }},
      {"field.source", [](C& c, const std::string& v, int) { c.field_source = v; },
       [](const C& c) -> Opt { return c.field_source; }},
      {"field.csv", [](C& c, const std::string& v, int) { c.field_csv = v; },
       [](const C& c) -> Opt { return c.field_csv.empty() ? std::nullopt : Opt(c.field_csv); }},
      {"field.n", [](C& c, const std::string& v, int l) { c.field_n = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.field_n); }},
      {"sequence.kind", [](C& c, const std::string& v, int l) {
         try {
           c.sequence.kind = sequence_kind_from_string(v);
         } catch (const ArgumentError& e) {
           throw ConfigError(l, e.what());
         }
       }, [](const C& c) -> Opt { return to_string(c.sequence.kind); }},
      {"sequence.normalize", [](C& c, const std::string& v, int l) { c.sequence.normalize = to_bool(v, l); },
       [](const C& c) -> Opt { return c.sequence.normalize ? "true" : "false"; }},
      {"sequence.frequency", [](C& c, const std::string& v, int l) { c.sequence.frequency = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.sequence.frequency); }},
      {"sequence.scale", [](C& c, const std::string& v, int l) { c.sequence.scale = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.sequence.scale); }},
      {"sequence.center", [](C& c, const std::string& v, int l) { c.sequence.center = to_vec(v, l); },
       [](const C& c) -> Opt { return c.sequence.center ? Opt(fmt(*c.sequence.center)) : std::nullopt; }},
      {"sequence.shift", [](C& c, const std::string& v, int l) { c.sequence.shift = to_vec(v, l); },
       [](const C& c) -> Opt { return fmt(c.sequence.shift); }},
      {"sequence.width", [](C& c, const std::string& v, int l) { c.sequence.width = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.sequence.width); }},
      {"sequence.smoothness", [](C& c, const std::string& v, int l) { c.sequence.smoothness = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.sequence.smoothness); }},
      {"sequence.modes", [](C& c, const std::string& v, int l) { c.sequence.modes = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.sequence.modes); }},
      {"sequence.n_values", [](C& c, const std::string& v, int l) {
         c.n_values.clear();
         for (const auto& x : split(v)) c.n_values.push_back(static_cast<int>(to_integer(x, l)));
       }, [](const C& c) -> Opt {
         std::string out;
         for (std::size_t i = 0; i < c.n_values.size(); ++i) out += (i ? ", " : "") + std::to_string(c.n_values[i]);
         return out;
       }},
      {"deltas", [](C& c, const std::string& v, int l) { c.deltas = to_doubles(v, l); },
       [](const C& c) -> Opt { return c.deltas.empty() ? std::nullopt : Opt(fmt(c.deltas)); }},
      {"r_values", [](C& c, const std::string& v, int l) { c.r_values = to_doubles(v, l); },
       [](const C& c) -> Opt { return c.r_values.empty() ? std::nullopt : Opt(fmt(c.r_values)); }},
      {"taus", [](C& c, const std::string& v, int l) { c.taus = to_doubles(v, l); },
       [](const C& c) -> Opt { return c.taus.empty() ? std::nullopt : Opt(fmt(c.taus)); }},
      {"theta0", [](C& c, const std::string& v, int l) { c.theta0 = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.theta0); }},
      {"theta_grid", [](C& c, const std::string& v, int l) { c.theta_grid = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.theta_grid); }},
      {"epsilon0", [](C& c, const std::string& v, int l) { c.epsilon0 = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.epsilon0); }},
      {"r0", [](C& c, const std::string& v, int l) { c.r0 = to_double(v, l); },
       [](const C& c) -> Opt { return c.r0 ? Opt(fmt(*c.r0)) : std::nullopt; }},
      {"seed", [](C& c, const std::string& v, int l) {
         c.seed = to_u64(v, l);
       }, [](const C& c) -> Opt { return std::to_string(c.seed); }},
      {"compactness.mode", [](C& c, const std::string& v, int) { c.mode = v; }, [](const C& c) -> Opt { return c.mode; }},
      {"compactness.family", [](C& c, const std::string& v, int l) {
         try {
           c.family = kernel_family_from_string(v);
         } catch (const ArgumentError& e) {
           throw ConfigError(l, e.what());
         }
       }, [](const C& c) -> Opt { return to_string(c.family); }},
      {"compactness.gap_fraction", [](C& c, const std::string& v, int l) { c.thresholds.gap_fraction = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.thresholds.gap_fraction); }},
      {"compactness.mass_fraction", [](C& c, const std::string& v, int l) { c.thresholds.mass_fraction = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.thresholds.mass_fraction); }},
      {"compactness.seminorm_growth", [](C& c, const std::string& v, int l) { c.thresholds.seminorm_growth = to_double(v, l); },
       [](const C& c) -> Opt { return fmt(c.thresholds.seminorm_growth); }},
      {"poincare.refine", [](C& c, const std::string& v, int l) { c.poincare.refine = to_bool(v, l); },
       [](const C& c) -> Opt { return c.poincare.refine ? "true" : "false"; }},
      {"poincare.restarts", [](C& c, const std::string& v, int l) { c.poincare.restarts = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.poincare.restarts); }},
      {"poincare.iterations", [](C& c, const std::string& v, int l) { c.poincare.iterations = static_cast<int>(to_integer(v, l)); },
       [](const C& c) -> Opt { return std::to_string(c.poincare.iterations); }},
      {"poincare.dense_limit", [](C& c, const std::string& v, int l) {
         c.poincare.dense_limit = static_cast<std::size_t>(to_u64(v, l));
       }, [](const C& c) -> Opt { return std::to_string(c.poincare.dense_limit); }},
      {"out", [](C& c, const std::string& v, int) { c.out = v; }, [](const C& c) -> Opt { return c.out; }},
  };
  return table;
}

void validate(const ExperimentConfig& c, const std::map<std::string, int>& lines) {
  auto line_of = [&](const std::string& k) {
    const auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  };
  if (!(c.p >= 1.0)) throw ConfigError(line_of("p"), "p >= 1 required");
  if (c.d < 1 || c.d > 3) throw ConfigError(line_of("d"), "d must be 1, 2 or 3");
  for (std::size_t i = 0; i < c.deltas.size(); ++i)
    if (!(c.deltas[i] > 0.0) || (i > 0 && !(c.deltas[i] < c.deltas[i - 1])))
      throw ConfigError(line_of("deltas"), "deltas must be positive and strictly decreasing");
  for (double r : c.r_values)
    if (!(r > 0.0)) throw ConfigError(line_of("r_values"), "r_values must be positive");
  for (double t : c.taus)
    if (!(t > 0.0)) throw ConfigError(line_of("taus"), "taus must be positive");
  if (c.theta_grid != kThetaGridPoints)
    throw ConfigError(line_of("theta_grid"), "theta_grid is fixed at " + std::to_string(kThetaGridPoints));
  if (!(c.theta0 > 0.0 && c.theta0 < 1.0)) throw ConfigError(line_of("theta0"), "theta0 must lie in (0, 1)");
  if (!(c.epsilon0 > 0.0 && c.epsilon0 <= 0.125))
    throw ConfigError(line_of("epsilon0"), "epsilon0 must lie in (0, 1/8]");
  if (c.n_per_axis && c.h) throw ConfigError(line_of("grid.h"), "give either grid.n_per_axis or grid.h, not both");
  if (c.n_per_axis && *c.n_per_axis < 1) throw ConfigError(line_of("grid.n_per_axis"), "grid.n_per_axis must be >= 1");
  if (c.h && !(*c.h > 0.0)) throw ConfigError(line_of("grid.h"), "grid.h must be positive");
  if (c.n_values.empty()) throw ConfigError(line_of("sequence.n_values"), "sequence.n_values is empty");
  for (int n : c.n_values)
    if (n < 1) throw ConfigError(line_of("sequence.n_values"), "sequence indices must be >= 1");
  if (c.field_n < 1) throw ConfigError(line_of("field.n"), "field.n must be >= 1");
  if (c.shape != "box" && c.shape != "ball" && c.shape != "graph_patch")
    throw ConfigError(line_of("domain.shape"), "domain.shape must be box, ball or graph_patch");
  if (c.field_source != "zero" && c.field_source != "rigid" && c.field_source != "sequence" && c.field_source != "csv")
    throw ConfigError(line_of("field.source"), "field.source must be zero, rigid, sequence or csv");
  if (c.mode != "family" && c.mode != "probe")
    throw ConfigError(line_of("compactness.mode"), "compactness.mode must be family or probe");
  if (c.field_source == "csv" && c.field_csv.empty())
    throw ConfigError(line_of("field.source"), "field.source = csv needs field.csv");
  if (c.shape == "graph_patch" && c.zeta_table.empty())
    throw ConfigError(line_of("domain.shape"), "graph_patch needs domain.zeta_table");
  for (const auto& [key, path] : {std::pair<std::string, std::string>{"field.csv", c.field_csv},
                                  {"domain.zeta_table", c.zeta_table}})
    if (!path.empty() && !std::filesystem::exists(path))
      throw ConfigError(line_of(key), "file not found: " + path);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "empty key");
    if (!section.empty()) key = section + "." + key;
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key == key; });
    if (it == table.end()) throw ConfigError(line, "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(line, "duplicate key '" + key + "'");
    seen[key] = line;
    it->set(cfg, value, line);
  }
  validate(cfg, seen);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "file not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& e : entries())
    if (const auto v = e.get(cfg)) out += e.key + " = " + *v + "\n";
  return out;
}

// ---------------------------------------------------------------------------

Cone make_cone(const ExperimentConfig& cfg) {
  if (!cfg.cone_axis) return Cone::full_sphere(cfg.d);
  return Cone::cap(cfg.d, *cfg.cone_axis, cfg.cone_aperture);
}

Kernel make_kernel(const ExperimentConfig& cfg) {
  Kernel base = [&] {
    if (cfg.kind == "fractional") return Kernel::fractional(cfg.d, cfg.p, cfg.s, cfg.support_radius.value_or(Kernel::kUnbounded));
    if (cfg.kind == "log") return Kernel::log(cfg.d, cfg.p);
    if (cfg.kind == "borderline") return Kernel::borderline(cfg.d, cfg.p, cfg.support_radius.value_or(1.0));
    if (cfg.kind == "indicator") return Kernel::indicator(cfg.d, cfg.p, cfg.support_radius.value_or(1.0));
    if (cfg.kind == "integrable_quotient") {
      // |xi|^p chi_{B_R}
      const double R = cfg.support_radius.value_or(1.0);
      const double p = cfg.p;
      return Kernel::tabulate(cfg.d, p, [p](double r) { return std::pow(r, p); }, 1e-6 * R, R, 64);
    }
    throw ArgumentError("unknown kernel kind '" + cfg.kind + "'");
  }();
  if (cfg.restrict_kernel) return Kernel::cone_restricted(base, make_cone(cfg));
  return base;
}

Domain make_domain(const ExperimentConfig& cfg) {
  // coordinates beyond d are ignored, so the 3-vector defaults serve every d
  auto cut = [&](Vec v) {
    for (int a = cfg.d; a < kMaxDim; ++a) v[static_cast<std::size_t>(a)] = 0.0;
    return v;
  };
  if (cfg.shape == "box") return Domain::box(cfg.d, cut(cfg.lo), cut(cfg.hi));
  if (cfg.shape == "ball") return Domain::ball(cfg.d, cut(cfg.center), cfg.radius);
  if (cfg.d != 2) throw CapabilityError("graph_patch tables from CSV are two-column, so d = 2 only");
  std::ifstream in(cfg.zeta_table);
  if (!in) throw ArgumentError("file not found: " + cfg.zeta_table);
  std::vector<double> xs, zs;
  std::string line;
  while (std::getline(in, line)) {
    const auto cols = split(trim(line));
    if (cols.empty()) continue;
    if (cols.size() != 2) throw ArgumentError("zeta table rows need two columns");
    try {
      xs.push_back(std::stod(cols[0]));
      zs.push_back(std::stod(cols[1]));
    } catch (const std::invalid_argument&) {
      if (!xs.empty()) throw ArgumentError("non-numeric row in zeta table");  // header only at the top
    }
  }
  if (xs.size() < 2) throw ArgumentError("zeta table needs >= 2 rows");
  const double step = xs[1] - xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (std::abs(xs[i] - xs[i - 1] - step) > 1e-9 * std::abs(step))
      throw ArgumentError("zeta table abscissae must be uniformly spaced");
  return Domain::graph_patch(GraphFunction::on_line(xs[0], step, zs), cfg.window_radius);
}

GridPtr make_grid(const ExperimentConfig& cfg) {
  const Domain dom = make_domain(cfg);
  if (cfg.h) return Grid::with_spacing(dom, *cfg.h);
  return Grid::uniform(dom, cfg.n_per_axis.value_or(16));
}

VectorField make_field(const ExperimentConfig& cfg, const GridPtr& grid) {
  if (cfg.field_source == "zero") return VectorField::zero(grid);
  if (cfg.field_source == "csv") {
    std::ifstream in(cfg.field_csv);
    if (!in) throw ArgumentError("file not found: " + cfg.field_csv);
    return read_field_csv(in, grid);
  }
  if (cfg.field_source == "rigid") {
    // random combination of the rigid generators
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> N;
    VectorField u = VectorField::zero(grid);
    for (const auto& r : rigid_basis(grid)) u = u + r.scaled(N(rng));
    return u;
  }
  SequenceSpec s = cfg.sequence;
  s.p = cfg.p;
  s.seed = cfg.seed;
  return make_sequence(s, grid, cfg.field_n);
}

}  // namespace nlspace
