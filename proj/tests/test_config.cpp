#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nlspace/config.hpp"

using namespace nlspace;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal kernel-check config gets defaults") {
  const auto cfg = parse_config("kind = fractional\nd = 2\np = 2\ns = 0.5\ndeltas = 0.5, 0.25, 0.125\n");
  CHECK(cfg.command == Command::kernel_check);
  CHECK(cfg.deltas == std::vector<double>{0.5, 0.25, 0.125});
  CHECK(cfg.epsilon0 == 1.0 / 16.0);
  CHECK(cfg.theta_grid == 64);
  CHECK(cfg.seed == 0);
  CHECK(make_kernel(cfg).kind() == KernelKind::fractional);
}

TEST_CASE("config diagnostics") {
  CHECK(error_of("d = 2\np = 0.5\n") == "line 2: p >= 1 required");
  CHECK(error_of("# comment\nfoo = 1\n").find("line 2: unknown key 'foo'") != std::string::npos);
  CHECK(error_of("p = 2\np = 3\n").find("duplicate key 'p'") != std::string::npos);
  CHECK(error_of("deltas = 0.25, 0.5\n").find("strictly decreasing") != std::string::npos);
  CHECK(error_of("d = two\n").find("line 1: expected an integer") != std::string::npos);
  CHECK(error_of("theta_grid = 32\n").find("fixed at 64") != std::string::npos);
  CHECK(error_of("just text\n").find("expected 'key = value'") != std::string::npos);
  CHECK(error_of("[grid\n").find("malformed section") != std::string::npos);
  const auto missing = error_of("field.source = csv\nfield.csv = /nonexistent/field.csv\n");
  CHECK(missing.find("/nonexistent/field.csv") != std::string::npos);
  CHECK(missing.find("line 2") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("section headers prefix keys") {
  const auto cfg = parse_config("[grid]\nn_per_axis = 12\n[sequence]\nkind = random\nn_values = 1, 3\n");
  CHECK(cfg.n_per_axis == 12);
  CHECK(cfg.sequence.kind == SequenceKind::random);
  CHECK(cfg.n_values == std::vector<int>{1, 3});
}

TEST_CASE("parse(serialize(config)) == config") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto tmp = std::filesystem::temp_directory_path() / "nlspace_config_field.csv";
  std::ofstream(tmp) << "x_1,u_1\n";
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig c;
    c.command = static_cast<Command>(trial % 7);
    c.kind = trial % 2 ? "indicator" : "fractional";
    c.d = 1 + trial % 3;
    c.p = 1.0 + 3.0 * U(rng);
    c.s = U(rng);
    if (trial % 3 == 0) c.support_radius = U(rng);
    if (trial % 4 == 0) c.cone_axis = Vec{U(rng), U(rng), U(rng)};
    c.cone_aperture = U(rng);
    c.restrict_kernel = trial % 5 == 0;
    c.lo = {U(rng), U(rng), U(rng)};
    c.hi = {1 + U(rng), 1 + U(rng), 1 + U(rng)};
    if (trial % 2) c.n_per_axis = 4 + trial; else c.h = 0.01 + U(rng);
    c.field_source = trial % 3 ? "sequence" : "csv";
    if (c.field_source == "csv") c.field_csv = tmp.string();
    c.sequence.kind = static_cast<SequenceKind>(trial % 4);
    c.sequence.width = U(rng);
    if (trial % 2) c.sequence.center = Vec{U(rng), U(rng), 0.0};
    c.sequence.shift = {U(rng), -U(rng), 0.0};
    c.n_values = {1, 2 + trial % 5};
    c.deltas = {0.5 * U(rng) + 0.5, 0.25 * U(rng)};
    c.r_values = {U(rng) + 1e-3};
    c.theta0 = 0.1 + 0.8 * U(rng);
    c.epsilon0 = 0.125 * (U(rng) + 1e-3) / 1.001;
    if (trial % 3 == 1) c.r0 = U(rng);
    c.seed = rng();
    c.mode = trial % 2 ? "probe" : "family";
    c.family = static_cast<KernelFamily>(trial % 3);
    c.thresholds.gap_fraction = U(rng);
    c.poincare.refine = trial % 2;
    c.poincare.restarts = trial;
    c.out = "dir_" + std::to_string(trial);
    const auto back = parse_config(serialize(c));
    REQUIRE_MESSAGE(back == c, serialize(c));
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("config objects") {
  auto cfg = parse_config("d = 2\ndomain.hi = 2, 1\ngrid.n_per_axis = 8\n");
  const auto g = make_grid(cfg);
  CHECK(g->size() == 64);
  CHECK(g->h()[0] == doctest::Approx(0.25));
  cfg = parse_config("d = 2\ncone.axis = 0, 1\ncone.aperture = 0.5\ncone.restrict_kernel = true\n");
  CHECK_FALSE(make_cone(cfg).is_full_sphere());
  CHECK(make_kernel(cfg).kind() == KernelKind::cone_restricted);
  cfg = parse_config("d = 1\nkind = log\n");
  CHECK(make_kernel(cfg).kind() == KernelKind::log);
  cfg = parse_config("kind = spline\n");
  CHECK_THROWS_AS(make_kernel(cfg), ArgumentError);
}
