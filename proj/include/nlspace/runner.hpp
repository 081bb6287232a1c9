#pragma once

// Runs a configured experiment: report.json plus CSV curves in the output
// directory and a short summary table on the given stream.

#include <exception>
#include <ostream>
#include <string>

#include "nlspace/config.hpp"

namespace nlspace {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitHypothesis = 2, kExitDegenerate = 3 };

/// 2 for HypothesisViolated, 3 for DegenerateError, 1 for everything else.
int exit_code_for(const std::exception& e);

/// Runs cfg, writing artifacts under cfg.out. Returns kExitHypothesis when
/// the run completes with a hypothesis-violated verdict; module errors
/// propagate as exceptions.
int run(const ExperimentConfig& cfg, std::ostream& summary);

/// run() with module errors reported on err and mapped to exit codes.
int run_checked(const ExperimentConfig& cfg, std::ostream& summary, std::ostream& err);

/// The "payload" member of a report.json, re-serialized canonically.
std::string report_payload(const std::string& report_json_text);

/// Rows of doubles as CSV: header line, %.17g values, LF endings.
void write_csv(const std::string& path, const std::string& header, const std::vector<std::vector<double>>& rows);

}  // namespace nlspace
