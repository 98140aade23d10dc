#include <CLI11.hpp>

#include "cbfaux/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Barrier-function safety filters with auxiliary excitation constraints"};
  app.require_subcommand(1);
  cbfaux::RunnerOptions opt;

  auto common = [&opt](CLI::App* sub, bool needs_scenario) {
    auto* s = sub->add_option("--scenario", opt.scenario, "Scenario JSON file");
    if (needs_scenario) s->required();
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_flag("--strict", opt.strict, "Stop a run at the first controller failure (exit 3)");
    sub->add_option("--rho", opt.rhos, "Boundary-layer width; repeatable")->take_all();
    sub->add_option("--dt-override", opt.dt_override, "Replace sim.dt");
  };

  auto* run = app.add_subcommand("run", "Simulate every initial state of a scenario");
  common(run, true);

  auto* sweep = app.add_subcommand("sweep", "Simulate a grid, ring or list of initial states");
  common(sweep, true);
  sweep->add_option("--ics", opt.ics, "JSON file with a sweep section overriding the scenario's");
  sweep->add_option("--threads", opt.threads, "Worker threads (0 = hardware concurrency)");

  auto* verify = app.add_subcommand("verify", "Feasibility grids and derivative checks");
  verify->add_option("--out", opt.out, "Output directory")->required();
  verify->add_option("--inject-fault", opt.fault,
                     "Corrupt a row builder: cbf_sign, aux_sign, hocbf_drift, heading_sign")
      ->group("");

  auto* analyze = app.add_subcommand("analyze", "Re-run the analysis on stored trajectories");
  common(analyze, true);

  auto* plot = app.add_subcommand("plot", "Render trajectory CSVs to SVG");
  plot->add_option("csv", opt.inputs, "Trajectory CSV files")->required();
  plot->add_option("--out", opt.out, "Output SVG; _h.svg and _w.svg companions are written too")
      ->required();
  plot->add_option("--scenario", opt.scenario, "Scenario supplying the obstacle and goal");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cbfaux::kExitSchema;
  }

  if (run->parsed()) return cbfaux::cmd_run(opt);
  if (sweep->parsed()) return cbfaux::cmd_sweep(opt);
  if (verify->parsed()) return cbfaux::cmd_verify(opt);
  if (analyze->parsed()) return cbfaux::cmd_analyze(opt);
  return cbfaux::cmd_plot(opt);
}
