#pragma once

// Experiment configuration: a flat `key = value` text format with optional
// [section] headers that prefix the keys below them. Lists are comma
// separated, '#' starts a comment.

#include <optional>
#include <string>
#include <vector>

#include "nlspace/analysis.hpp"

namespace nlspace {

enum class Command { kernel_check, seminorm, mollify, poincare, boundary, compactness, sequence };
std::string to_string(Command c);
Command command_from_string(const std::string& s);

/// Parse or validation failure; line is 0 when no single line is at fault.
struct ConfigError : ArgumentError {
  ConfigError(int line, const std::string& msg);
  int line;
};

struct ExperimentConfig {
  Command command = Command::kernel_check;

  // kernel
  std::string kind = "fractional";
  int d = 2;
  double p = 2.0;
  double s = 0.5;
  std::optional<double> support_radius;
  std::optional<Vec> cone_axis;  ///< absent: the full sphere
  double cone_aperture = 0.7853981633974483;
  bool restrict_kernel = false;  ///< kernel = base chi_{B_1^Lambda}

  // domain and grid
  std::string shape = "box";
  Vec lo{0.0, 0.0, 0.0};
  Vec hi{1.0, 1.0, 1.0};
  Vec center{0.0, 0.0, 0.0};
  double radius = 1.0;
  std::string zeta_table;
  double window_radius = 1.0;
  std::optional<int> n_per_axis;
  std::optional<double> h;

  // field: zero, rigid, sequence or csv
  std::string field_source = "sequence";
  std::string field_csv;
  int field_n = 1;

  SequenceSpec sequence{};
  std::vector<int> n_values{1, 2, 4, 8};

  std::vector<double> deltas;  ///< empty: the command's default sequence
  std::vector<double> r_values;
  std::vector<double> taus;
  double theta0 = 0.5;
  int theta_grid = kThetaGridPoints;
  double epsilon0 = kDefaultEpsilon0;
  std::optional<double> r0;
  std::uint64_t seed = 0;  ///< used for random fields, sequences and descent starts

  std::string mode = "family";  ///< compactness: family or probe
  KernelFamily family = KernelFamily::mollified;
  CompactnessThresholds thresholds{};

  PoincareOptions poincare{};

  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize(const ExperimentConfig& cfg);

/// Objects described by a config.
Kernel make_kernel(const ExperimentConfig& cfg);
Cone make_cone(const ExperimentConfig& cfg);
Domain make_domain(const ExperimentConfig& cfg);
GridPtr make_grid(const ExperimentConfig& cfg);
/// The field of seminorm, mollify and boundary runs.
VectorField make_field(const ExperimentConfig& cfg, const GridPtr& grid);

}  // namespace nlspace
