#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbfaux/scenario.hpp"

namespace cbfaux {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitSchema = 2, kExitStrict = 3 };

struct RunnerOptions {
  std::string scenario;
  std::string out;
  bool strict = false;
  std::vector<double> rhos;           // replaces analysis.rho when nonempty
  std::optional<double> dt_override;  // replaces sim.dt
  std::string ics;                    // sweep: file holding a sweep section
  std::string fault;                  // verify: injected row-builder fault
  std::vector<std::string> inputs;    // plot: trajectory CSVs
  int threads = 0;                    // sweep: 0 picks the hardware concurrency
};

/// Applies --strict, --rho and --dt-override to a loaded scenario.
void apply_overrides(Scenario& s, const RunnerOptions& opt);

/// Per-run summary: safety, goal, events, residence per rho, containment.
Json run_summary(const Scenario& s, const FeedbackLaw& law, const Trajectory& traj,
                 std::size_t index, const StateVec& x0);

int cmd_run(const RunnerOptions& opt);
int cmd_sweep(const RunnerOptions& opt);
int cmd_verify(const RunnerOptions& opt);
int cmd_analyze(const RunnerOptions& opt);
int cmd_plot(const RunnerOptions& opt);

}  // namespace cbfaux
