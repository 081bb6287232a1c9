#include "nlspace/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>

namespace nlspace {

using json = nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const HypothesisViolated*>(&e)) return kExitHypothesis;
  if (dynamic_cast<const DegenerateError*>(&e)) return kExitDegenerate;
  return kExitUsage;
}

void write_csv(const std::string& path, const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  out << header << '\n';
  char buf[40];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

std::string report_payload(const std::string& text) { return json::parse(text).at("payload").dump(); }

namespace {

// JSON has no inf/NaN; keep them distinguishable as strings.
json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

json pairs(const std::vector<std::pair<double, double>>& xs) {
  json a = json::array();
  for (const auto& [x, y] : xs) a.push_back({num(x), num(y)});
  return a;
}

std::vector<std::vector<double>> rows(const std::vector<std::pair<double, double>>& xs) {
  std::vector<std::vector<double>> out;
  for (const auto& [x, y] : xs) out.push_back({x, y});
  return out;
}

json condition_json(const KernelConditionReport& r) {
  return {{"condition", to_string(r.condition_id)},
          {"verdict", to_string(r.verdict)},
          {"fitted_log_slope", num(r.fitted_log_slope)},
          {"note", r.note},
          {"samples", pairs(r.samples)}};
}

json grid_json(const Grid& g) {
  return {{"nodes", g.size()}, {"h", num(g.max_h())}, {"digest", std::to_string(g.digest())}};
}

json compactness_json(const CompactnessReport& r) {
  json j = {{"sequence_id", r.sequence_id},
            {"n_values", r.n_values},
            {"sup_seminorm", num(r.sup_seminorm)},
            {"sup_lp", num(r.sup_lp)},
            {"gap_curve", pairs(r.gap_curve)},
            {"boundary_mass_curve", pairs(r.boundary_mass_curve)},
            {"bound_curve", pairs(r.bound_curve)},
            {"boundary_mass_limit", num(r.boundary_mass_limit)},
            {"verdict", to_string(r.verdict)},
            {"note", r.note}};
  json s = json::array(), l = json::array();
  for (double x : r.seminorms) s.push_back(num(x));
  for (double x : r.lp_norms) l.push_back(num(x));
  j["seminorms"] = s;
  j["lp_norms"] = l;
  if (!r.normalized_gaps.empty()) {
    json ng = json::array();
    for (const auto& row : r.normalized_gaps) {
      json a = json::array();
      for (double c : row) a.push_back(num(c));
      ng.push_back(a);
    }
    j["normalized_gaps"] = ng;
    j["envelope_constant"] = num(r.envelope_constant);
    j["envelope_growth"] = num(r.envelope_growth);
    j["envelope_holds"] = r.envelope_holds;
  }
  return j;
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Run {
  const ExperimentConfig& cfg;
  std::filesystem::path dir;
  std::ostream& out;
  json payload = json::object();
  int code = kExitOk;

  std::string path(const std::string& name) const { return (dir / name).string(); }
  void line(const std::string& k, const std::string& v) { out << std::left << std::setw(28) << k << v << '\n'; }
  void line(const std::string& k, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    line(k, std::string(buf));
  }

  void kernel_check() {
    const Kernel k = make_kernel(cfg);
    const auto deltas = cfg.deltas.empty() ? default_deltas() : cfg.deltas;
    payload["kernel"] = k.describe();
    json conds = json::array();
    auto attempt = [&](const char* name, auto&& f) {
      try {
        const auto rep = f();
        conds.push_back(condition_json(rep));
        line(name, to_string(rep.verdict) + " (slope " + std::to_string(rep.fitted_log_slope) + ")");
        return std::optional<KernelConditionReport>(rep);
      } catch (const CapabilityError& e) {
        conds.push_back({{"condition", name}, {"verdict", "skipped"}, {"note", e.what()}});
        line(name, std::string("skipped: ") + e.what());
        return std::optional<KernelConditionReport>();
      }
    };
    if (const auto mr = attempt("mass_ratio_limit", [&] { return check_mass_ratio_limit(k, deltas); }))
      write_csv(path("mass_ratio.csv"), "delta,ratio", rows(mr->samples));
    if (k.is_radial()) {
      const std::vector<double> radii(deltas.rbegin(), deltas.rend());
      attempt("radial_monotone", [&] { return check_radial_monotone(k, radii); });
    }
    if (cfg.cone_axis || cfg.restrict_kernel) {
      if (const auto cc = attempt("cone_condition", [&] { return check_cone_condition(k, cfg.theta0, make_cone(cfg), deltas); }))
        write_csv(path("cone_ratio.csv"), "delta,ratio", rows(cc->samples));
    }
    payload["conditions"] = conds;
  }

  void seminorm_run() {
    const auto grid = make_grid(cfg);
    const auto u = make_field(cfg, grid);
    const Kernel k = make_kernel(cfg);
    const auto r = seminorm(u, k, cfg.p, true);
    payload["kernel"] = k.describe();
    payload["grid"] = grid_json(*grid);
    payload["value_p"] = num(r.value_p);
    payload["pair_count"] = r.pair_count;
    payload["diagonal_exclusion_radius"] = num(r.diagonal_exclusion_radius);
    payload["estimated_quadrature_error"] = num(r.estimated_quadrature_error);
    payload["kernel_hash"] = r.kernel_hash;
    payload["field_hash"] = r.field_hash;
    payload["lp_norm_p"] = num(u.lp_norm_p(cfg.p));
    line("seminorm", r.value_p);
    line("pairs", std::to_string(r.pair_count));
    line("error estimate", r.estimated_quadrature_error);
  }

  void mollify_run() {
    const auto grid = make_grid(cfg);
    const auto u = make_field(cfg, grid);
    const auto mm = cone_matrix(make_cone(cfg));
    const auto deltas = cfg.deltas.empty() ? resolvable_deltas(*grid) : cfg.deltas;
    json Q = json::array();
    for (int a = 0; a < mm.d; ++a) {
      json row = json::array();
      for (int b = 0; b < mm.d; ++b) row.push_back(num(mm.Q[a][b]));
      Q.push_back(row);
    }
    payload["Q"] = Q;
    payload["lambda_min"] = num(mm.lambda_min);
    payload["grid"] = grid_json(*grid);
    std::vector<std::pair<double, double>> gaps;
    json per = json::array();
    for (double dl : deltas) {
      const auto st = mollifier_stencil(*grid, dl, mm);
      const Mat tot = st.total();
      double dev = 0.0;
      for (int a = 0; a < mm.d; ++a)
        for (int b = 0; b < mm.d; ++b) dev = std::max(dev, std::abs(tot[a][b] - (a == b ? 1.0 : 0.0)));
      const double gap = smoothing_gap(u, st, cfg.p);
      gaps.emplace_back(dl, gap);
      per.push_back({{"delta", num(dl)}, {"gap", num(gap)}, {"normalization_deviation", num(dev)},
                     {"stencil_size", st.offsets.size()}});
    }
    payload["deltas"] = per;
    write_csv(path("gap_curve.csv"), "delta,gap", rows(gaps));
    const auto smooth = mollify(u, mollifier_stencil(*grid, deltas.back(), mm));
    std::ofstream f(path("mollified.csv"), std::ios::binary);
    write_field_csv(smooth, f);
    payload["mollified_hash"] = smooth.hash();
    line("lambda_min(Q)", mm.lambda_min);
    for (const auto& [dl, gap] : gaps) line("gap at delta " + std::to_string(dl), gap);
  }

  void poincare_run() {
    const auto grid = make_grid(cfg);
    const Kernel k = make_kernel(cfg);
    PoincareOptions opt = cfg.poincare;
    opt.seed = cfg.seed;
    const auto est = poincare_constant(SubspaceSpec::orthogonal_to_rigid(grid), k, cfg.p, opt);
    payload["kernel"] = k.describe();
    payload["grid"] = grid_json(*grid);
    payload["constant"] = num(est.constant);
    payload["method"] = to_string(est.method);
    payload["lower_bound"] = est.lower_bound;
    payload["restarts"] = est.restarts;
    payload["refinement_drift"] = num(est.refinement_drift);
    payload["minimizer_hash"] = est.minimizer_hash;
    payload["subspace"] = est.subspace;
    std::ofstream f(path("minimizer.csv"), std::ios::binary);
    write_field_csv(VectorField(grid, est.minimizer), f);
    line("constant", est.constant);
    line("method", to_string(est.method) + (est.lower_bound ? " (lower bound)" : ""));
    line("refinement drift", est.refinement_drift);
  }

  void boundary_run() {
    const auto grid = make_grid(cfg);
    const auto u = make_field(cfg, grid);
    const Kernel k = make_kernel(cfg);
    const double r0 = cfg.r0.value_or(default_r0(grid->domain()));
    const auto rs = cfg.r_values.empty() ? std::vector<double>{r0 / 4, r0 / 2, 3 * r0 / 4} : cfg.r_values;
    json list = json::array();
    std::vector<std::vector<double>> csv;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double r : rs) {
      const auto rep = boundary_mass_check(u, k, r, cfg.epsilon0, cfg.p, r0);
      list.push_back({{"r", num(r)},
                      {"lhs", num(rep.lhs)},
                      {"interior_term", num(rep.interior_term)},
                      {"C1", num(rep.C1)},
                      {"seminorm", num(rep.seminorm)},
                      {"seminorm_term", num(rep.seminorm_term)},
                      {"implied_C2", num(rep.implied_C2.value_or(nan))},
                      {"collar_term", num(rep.collar_term)},
                      {"vanishes_on_inner", rep.vanishes_on_inner},
                      {"implied_collar_C", num(rep.implied_collar_C.value_or(nan))}});
      csv.push_back({r, rep.lhs, rep.C1, rep.interior_term, rep.seminorm_term, rep.implied_C2.value_or(nan)});
      line("implied C2 at r=" + std::to_string(r), rep.implied_C2.value_or(nan));
    }
    payload["r0"] = num(r0);
    payload["epsilon0"] = num(cfg.epsilon0);
    payload["radii"] = list;
    write_csv(path("boundary.csv"), "r,lhs,C1,interior,seminorm_term,implied_C2", csv);
  }

  ExperimentOptions experiment_options() const {
    ExperimentOptions opt;
    opt.n_values = cfg.n_values;
    opt.deltas = cfg.deltas;
    opt.taus = cfg.taus;
    opt.thresholds = cfg.thresholds;
    return opt;
  }

  SequenceSpec sequence_spec() const {
    SequenceSpec s = cfg.sequence;
    s.p = cfg.p;
    s.seed = cfg.seed;
    return s;
  }

  void compactness_run() {
    const auto grid = make_grid(cfg);
    const Kernel k = make_kernel(cfg);
    const auto src = sequence_source(sequence_spec(), grid);
    const auto rep = cfg.mode == "probe"
                         ? compactness_probe(src, k, cfg.p, grid, make_cone(cfg), cfg.theta0, experiment_options())
                         : kernel_sequence_experiment(cfg.family, k, src, cfg.p, grid, experiment_options());
    payload["mode"] = cfg.mode;
    if (cfg.mode == "family") payload["family"] = to_string(cfg.family);
    payload["kernel"] = k.describe();
    payload["grid"] = grid_json(*grid);
    payload["report"] = compactness_json(rep);
    write_csv(path("gap_curve.csv"), "delta,gap", rows(rep.gap_curve));
    write_csv(path("boundary_mass.csv"), "tau,mass", rows(rep.boundary_mass_curve));
    line("verdict", to_string(rep.verdict));
    line("boundary mass limit", rep.boundary_mass_limit);
    if (cfg.mode == "probe") line("envelope constant", rep.envelope_constant);
    if (!rep.note.empty()) line("note", rep.note);
    if (rep.verdict == CompactnessVerdict::hypothesis_violated) code = kExitHypothesis;
  }

  void sequence_run() {
    const auto grid = make_grid(cfg);
    const Kernel k = make_kernel(cfg);
    const auto src = sequence_source(sequence_spec(), grid);
    json members = json::array();
    for (int n : cfg.n_values) {
      const auto u = src.member(n);
      const std::string name = "member_" + std::to_string(n) + ".csv";
      std::ofstream f(path(name), std::ios::binary);
      write_field_csv(u, f);
      const double s = seminorm(u, k, cfg.p).value_p;
      members.push_back({{"n", n}, {"file", name}, {"lp_norm_p", num(u.lp_norm_p(cfg.p))}, {"seminorm", num(s)},
                         {"hash", u.hash()}});
      line("seminorm n=" + std::to_string(n), s);
    }
    payload["sequence_id"] = src.id;
    payload["kernel"] = k.describe();
    payload["grid"] = grid_json(*grid);
    payload["members"] = members;
  }
};

}  // namespace

int run(const ExperimentConfig& cfg, std::ostream& summary) {
  std::filesystem::create_directories(cfg.out);
  Run r{cfg, cfg.out, summary};
  summary << "command: " << to_string(cfg.command) << '\n';
  switch (cfg.command) {
    case Command::kernel_check: r.kernel_check(); break;
    case Command::seminorm: r.seminorm_run(); break;
    case Command::mollify: r.mollify_run(); break;
    case Command::poincare: r.poincare_run(); break;
    case Command::boundary: r.boundary_run(); break;
    case Command::compactness: r.compactness_run(); break;
    case Command::sequence: r.sequence_run(); break;
  }
  r.payload["command"] = to_string(cfg.command);
  // the output directory is not part of the experiment
  std::string text = serialize(cfg);
  const auto at = text.find("\nout = ");
  if (at != std::string::npos) text.erase(at + 1, text.find('\n', at + 1) - at);
  r.payload["config"] = text;
  const std::string body = r.payload.dump();
  const json report = {{"payload", r.payload},
                       {"metadata",
                        {{"timestamp", timestamp()},
                         {"threads", thread_count()},
                         {"payload_hash", Hasher().text(body).hex()}}}};
  std::ofstream f(r.path("report.json"), std::ios::binary);
  f << report.dump(2) << '\n';
  return r.code;
}

int run_checked(const ExperimentConfig& cfg, std::ostream& summary, std::ostream& err) {
  try {
    return run(cfg, summary);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace nlspace
