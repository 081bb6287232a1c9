// Command-line front end: one subcommand per experiment.

#include <CLI11.hpp>
#include <iostream>

#include "nlspace/runner.hpp"

int main(int argc, char** argv) {
  using namespace nlspace;
  CLI::App app{"Numerical experiments on the nonlocal space S_{rho,p}"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  for (Command c : {Command::kernel_check, Command::seminorm, Command::mollify, Command::poincare, Command::boundary,
                    Command::compactness, Command::sequence}) {
    auto* sub = app.add_subcommand(to_string(c));
    sub->add_option("--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default: hardware)");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  const auto* sub = app.get_subcommands().front();
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitUsage;
  }
  cfg.command = command_from_string(sub->get_name());
  if (sub->count("--out")) cfg.out = out_dir;
  if (sub->count("--seed")) cfg.seed = seed;
  if (threads > 0) set_thread_count(threads);
  return run_checked(cfg, std::cout, std::cerr);
}
