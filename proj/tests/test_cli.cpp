#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nlspace/runner.hpp"

using namespace nlspace;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nlspace_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_text(const std::string& text, const fs::path& out) {
  auto cfg = parse_config(text);
  cfg.out = out.string();
  std::ostringstream summary, err;
  return run_checked(cfg, summary, err);
}

}  // namespace

TEST_CASE("kernel-check reports the fractional slope p s") {
  const auto out = scratch("kc");
  CHECK(run_text("command = kernel-check\nkind = fractional\nd = 2\np = 2\ns = 0.5\n", out) == kExitOk);
  const auto rep = json::parse(slurp(out / "report.json"));
  const auto& mr = rep["payload"]["conditions"][0];
  CHECK(mr["condition"] == "mass_ratio_limit");
  CHECK(mr["verdict"] == "satisfied");
  CHECK(mr["fitted_log_slope"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
  const std::string csv = slurp(out / "mass_ratio.csv");
  CHECK(csv.rfind("delta,ratio\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  // second row: delta = 1/2 and p (1-s) delta^{ps} / sigma_1 = 1/(4 pi) written with 17 digits
  std::istringstream rows(csv);
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  CHECK(row.substr(0, 4) == "0.5,");
  CHECK(std::stod(row.substr(4)) == doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-6));
  CHECK(row.size() - 4 >= 17);
}

TEST_CASE("seminorm of a rigid motion vanishes") {
  const auto out = scratch("sn");
  CHECK(run_text("command = seminorm\nkind = indicator\nd = 2\nfield.source = rigid\nseed = 5\ngrid.n_per_axis = 16\n", out) ==
        kExitOk);
  const auto rep = json::parse(slurp(out / "report.json"));
  CHECK(rep["payload"]["value_p"].get<double>() <= 1e-12);
}

TEST_CASE("poincare payload is byte-identical across runs and thread counts") {
  const std::string text = "command = poincare\nd = 1\ngrid.n_per_axis = 32\n";
  const auto a = scratch("pa"), b = scratch("pb");
  const unsigned before = thread_count();
  set_thread_count(1);
  CHECK(run_text(text, a) == kExitOk);
  set_thread_count(3);
  CHECK(run_text(text, b) == kExitOk);
  set_thread_count(before);
  const auto ra = slurp(a / "report.json"), rb = slurp(b / "report.json");
  CHECK(report_payload(ra) == report_payload(rb));
  CHECK(json::parse(ra)["metadata"].contains("timestamp"));
  CHECK(slurp(a / "minimizer.csv") == slurp(b / "minimizer.csv"));
}

TEST_CASE("exit codes") {
  SUBCASE("degenerate spectrum") {
    CHECK(run_text("command = poincare\nkind = indicator\nsupport_radius = 0.01\ngrid.n_per_axis = 6\n", scratch("deg")) ==
          kExitDegenerate);
  }
  SUBCASE("hypothesis violated") {
    const auto out = scratch("hv");
    CHECK(run_text("command = compactness\nkind = indicator\nsupport_radius = 0.5\ngrid.n_per_axis = 8\n"
                   "compactness.mode = probe\ncone.axis = 1, 0\n",
                   out) == kExitHypothesis);
    CHECK(json::parse(slurp(out / "report.json"))["payload"]["report"]["verdict"] == "hypothesis_violated");
  }
  SUBCASE("usage") {
    CHECK(run_text("command = mollify\ngrid.n_per_axis = 8\ndeltas = 0.1\n", scratch("res")) == kExitUsage);
  }
  CHECK(exit_code_for(HypothesisViolated("x")) == 2);
  CHECK(exit_code_for(DegenerateError("x")) == 3);
  CHECK(exit_code_for(ArgumentError("x")) == 1);
}

TEST_CASE("curve outputs") {
  const auto out = scratch("cmp");
  CHECK(run_text("command = compactness\nkind = fractional\nsupport_radius = 2\ngrid.n_per_axis = 16\n"
                 "sequence.kind = translating\nsequence.width = 0.3\nsequence.n_values = 1, 2\n",
                 out) == kExitOk);
  CHECK(slurp(out / "gap_curve.csv").rfind("delta,gap\n", 0) == 0);
  CHECK(slurp(out / "boundary_mass.csv").rfind("tau,mass\n", 0) == 0);
  const auto mo = scratch("mo");
  CHECK(run_text("command = mollify\ngrid.n_per_axis = 16\nsequence.kind = translating\n", mo) == kExitOk);
  const auto rep = json::parse(slurp(mo / "report.json"));
  for (const auto& d : rep["payload"]["deltas"]) CHECK(d["normalization_deviation"].get<double>() < 1e-3);
  CHECK(fs::exists(mo / "mollified.csv"));
  const auto bd = scratch("bd");
  CHECK(run_text("command = boundary\ngrid.n_per_axis = 16\nsequence.kind = oscillatory\n", bd) == kExitOk);
  CHECK(slurp(bd / "boundary.csv").rfind("r,lhs,C1,interior,seminorm_term,implied_C2\n", 0) == 0);
  const auto sq = scratch("sq");
  CHECK(run_text("command = sequence\ngrid.n_per_axis = 8\nsequence.n_values = 1, 2\n", sq) == kExitOk);
  CHECK(fs::exists(sq / "member_2.csv"));
}
