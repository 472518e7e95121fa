#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "subspec/runner.hpp"

using namespace subspec;

namespace {

void add_common(CLI::App* cmd, std::string& config, RunOptions& opts) {
  cmd->add_option("config", config, "case file")->required();
  cmd->add_option("-o,--out", opts.out_dir, "output directory (overrides output.dir)");
  cmd->add_option("--seed", opts.seed, "random seed (overrides seed)");
  cmd->add_option("--tol", opts.tol, "solver tolerance (overrides solver.tol)");
  cmd->add_option("-j,--workers", opts.workers, "worker threads for sweep points");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspec: spectra of warped submersions over 1-D bases"};
  app.require_subcommand(1);

  std::string run_config;
  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "run the selected checks at every declared sweep point");
  add_common(run, run_config, run_opts);

  std::string sweep_config;
  std::string axis_name;
  RunOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "run one declared sweep axis");
  add_common(sweep, sweep_config, sweep_opts);
  sweep->add_option("-a,--axis", axis_name, "R, n or a")->required();

  std::string cases_dir = "cases";
  if (const char* env = std::getenv("SUBSPEC_CASES")) cases_dir = env;
  auto* list = app.add_subcommand("list-cases", "list bundled case files");
  list->add_option("--dir", cases_dir, "case directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (*run) {
    run_opts.verb = "run";
    return run_command(run_config, run_opts, std::cout, std::cerr);
  }
  if (*sweep) {
    const auto axis = parse_axis(axis_name);
    if (!axis) {
      std::cerr << fmt::format("unknown axis '{}' (expected R, n or a)\n", axis_name);
      return 2;
    }
    sweep_opts.verb = "sweep";
    sweep_opts.axis = *axis;
    return run_command(sweep_config, sweep_opts, std::cout, std::cerr);
  }
  try {
    for (const auto& c : list_cases(cases_dir)) {
      std::cout << fmt::format("{:<28}{:<22}{}\n", c.file, c.id, c.description);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
