#include "cbfaux/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "cbfaux/io.hpp"
#include "cbfaux/svg.hpp"

namespace cbfaux {

namespace fs = std::filesystem;

void apply_overrides(Scenario& s, const RunnerOptions& opt) {
  if (opt.strict) s.sim.strict = true;
  if (!opt.rhos.empty()) {
    for (double r : opt.rhos) {
      if (!(r > 0.0)) throw SchemaError("--rho: values must be positive");
    }
    s.rhos = opt.rhos;
  }
  if (opt.dt_override) {
    if (!(*opt.dt_override > 0.0) || !(s.sim.horizon > *opt.dt_override)) {
      throw SchemaError("--dt-override: must be positive and below the horizon");
    }
    s.sim.dt = *opt.dt_override;
  }
}

namespace {

std::string traj_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%03zu.csv", i);
  return buf;
}

Json events_json(const Trajectory& traj) {
  Json counts = Json::object();
  for (EventKind k : {EventKind::SafetyViolation, EventKind::QpInfeasible,
                      EventKind::DegenerateAuxDropped, EventKind::GoalReached,
                      EventKind::ControllerError}) {
    counts[std::string(to_string(k))] = traj.count_events(k);
  }
  return counts;
}

Json residence_json(const Trajectory& traj, const FeedbackLaw& law, double rho) {
  try {
    return to_json(check_residence_bound(traj, law.auxiliary(), BoundaryLayer{rho}));
  } catch (const std::domain_error& e) {
    Json j = to_json(check_residence_bound(traj, nullptr, BoundaryLayer{rho}));
    j["error"] = e.what();
    return j;
  }
}

struct Loaded {
  Scenario scenario;
  int code = kExitOk;
};

Loaded load(const RunnerOptions& opt) {
  Loaded l;
  try {
    if (opt.scenario.empty()) throw SchemaError("--scenario is required");
    l.scenario = load_scenario(opt.scenario);
    apply_overrides(l.scenario, opt);
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    l.code = kExitSchema;
  }
  return l;
}

bool prepare_out(const std::string& out) {
  if (out.empty()) {
    std::cerr << "error: --out is required\n";
    return false;
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    std::cerr << "error: cannot create " << out << ": " << ec.message() << "\n";
    return false;
  }
  return true;
}

struct RunOutcome {
  Trajectory traj;
  Json summary;
  std::string error;  // initial-state rejection
};

RunOutcome simulate_one(const Scenario& s, const SystemModel& model, const FeedbackLaw& law,
                        std::size_t i, const StateVec& x0) {
  RunOutcome r;
  SimConfig cfg = s.sim;
  cfg.initial_state = x0;
  try {
    r.traj = simulate(model, law, cfg, BoundaryLayer{s.rhos.front()});
  } catch (const std::invalid_argument& e) {
    r.error = e.what();
    return r;
  }
  r.summary = run_summary(s, law, r.traj, i, x0);
  return r;
}

// Runs every initial state, in parallel when threads > 1; results keep input order.
std::vector<RunOutcome> simulate_all(const Scenario& s, const std::vector<StateVec>& ics,
                                     int threads) {
  const SystemModel model = s.model();
  std::vector<RunOutcome> out(ics.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    const auto law = s.make_law();
    for (std::size_t i = next++; i < ics.size(); i = next++) {
      out[i] = simulate_one(s, model, *law, i, ics[i]);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      std::min<std::size_t>(ics.size(), threads > 0 ? static_cast<std::size_t>(threads) : hw);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }
  return out;
}

int finish_runs(const Scenario& s, const std::vector<RunOutcome>& runs, const std::string& out,
                Json& summary) {
  bool all_safe = true, all_goal = true, strict_fail = false;
  Json list = Json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    write_trajectory_csv((fs::path(out) / traj_name(i)).string(), r.traj, s.system);
    list.push_back(r.summary);
    all_safe = all_safe && !r.traj.has_event(EventKind::SafetyViolation);
    all_goal = all_goal && r.traj.has_event(EventKind::GoalReached);
    const bool failed = r.traj.has_event(EventKind::QpInfeasible) ||
                        r.traj.has_event(EventKind::ControllerError);
    strict_fail = strict_fail || (s.sim.strict && failed);
  }
  const int code = strict_fail ? kExitStrict : (all_safe ? kExitOk : kExitFailure);
  summary["scenario"] = s.name;
  summary["system"] = std::string(to_string(s.system));
  summary["controller"] = to_string(s.controller);
  summary["run_count"] = runs.size();
  summary["all_safe"] = all_safe;
  summary["all_goal_reached"] = all_goal;
  summary["exit_code"] = code;
  summary["runs"] = list;
  write_json((fs::path(out) / "summary.json").string(), summary);
  return code;
}

int reject_bad_ics(const std::vector<RunOutcome>& runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].error.empty()) {
      std::cerr << "schema error: initial state " << i << ": " << runs[i].error << "\n";
      return kExitSchema;
    }
  }
  return kExitOk;
}

}  // namespace

Json run_summary(const Scenario& s, const FeedbackLaw& law, const Trajectory& traj,
                 std::size_t index, const StateVec& x0) {
  Json j;
  j["index"] = index;
  j["csv"] = traj_name(index);
  j["initial_state"] = state_json(x0);
  double min_h = std::numeric_limits<double>::infinity(), t_min_h = 0.0;
  for (const auto& smp : traj.samples) {
    if (smp.h < min_h) {
      min_h = smp.h;
      t_min_h = smp.t;
    }
  }
  j["min_h"] = min_h;
  j["t_min_h"] = t_min_h;
  j["safe"] = !traj.has_event(EventKind::SafetyViolation);
  j["goal_reached"] = traj.has_event(EventKind::GoalReached);
  Json goal_time = nullptr;
  for (const auto& e : traj.events) {
    if (e.kind == EventKind::GoalReached) {
      goal_time = e.t;
      break;
    }
  }
  j["goal_time"] = goal_time;
  const auto& last = traj.samples.back();
  j["final_time"] = last.t;
  j["final_state"] = state_json(last.state);
  j["final_h"] = last.h;
  j["sample_count"] = traj.samples.size();
  j["stopped_on_error"] = traj.stopped_on_error;
  j["events"] = events_json(traj);
  Json first_errors = Json::array();
  for (const auto& e : traj.events) {
    if (e.kind == EventKind::ControllerError && first_errors.size() < 5) {
      first_errors.push_back({{"t", e.t}, {"detail", e.detail}});
    }
  }
  j["controller_errors"] = first_errors;
  Json res = Json::array();
  for (double rho : s.rhos) res.push_back(residence_json(traj, law, rho));
  j["residence"] = res;
  j["containment"] = to_json(check_compact_containment(traj, s.bound_box));
  return j;
}

int cmd_run(const RunnerOptions& opt) {
  Loaded l = load(opt);
  if (l.code != kExitOk) return l.code;
  const Scenario& s = l.scenario;
  if (s.initial_states.empty()) {
    std::cerr << "schema error: initial_states: at least one state is required\n";
    return kExitSchema;
  }
  if (!prepare_out(opt.out)) return kExitFailure;
  const auto runs = simulate_all(s, s.initial_states, 1);
  if (const int c = reject_bad_ics(runs); c != kExitOk) return c;
  write_json((fs::path(opt.out) / "effective_config.json").string(), effective_config(s));
  Json summary;
  const int code = finish_runs(s, runs, opt.out, summary);
  std::cout << s.name << ": " << runs.size() << " run(s), safe=" << summary["all_safe"]
            << ", goal=" << summary["all_goal_reached"] << ", exit " << code << "\n";
  return code;
}

int cmd_sweep(const RunnerOptions& opt) {
  Loaded l = load(opt);
  if (l.code != kExitOk) return l.code;
  Scenario& s = l.scenario;
  if (!opt.ics.empty()) {
    try {
      std::ifstream in(opt.ics, std::ios::binary);
      if (!in) throw SchemaError(opt.ics + ": cannot open");
      std::stringstream buf;
      buf << in.rdbuf();
      Json section;
      try {
        section = Json::parse(buf.str());
      } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(opt.ics + ": " + e.what());
      }
      Json doc = effective_config(s);
      doc["sweep"] = section;
      s = parse_scenario(doc);
    } catch (const SchemaError& e) {
      std::cerr << "schema error: " << e.what() << "\n";
      return kExitSchema;
    }
  }
  const auto ics = s.sweep_states();
  if (ics.empty()) {
    std::cerr << "schema error: sweep produced no initial states\n";
    return kExitSchema;
  }
  if (!prepare_out(opt.out)) return kExitFailure;
  const auto runs = simulate_all(s, ics, opt.threads);
  if (const int c = reject_bad_ics(runs); c != kExitOk) return c;
  write_json((fs::path(opt.out) / "effective_config.json").string(), effective_config(s));
  Json summary;
  const int code = finish_runs(s, runs, opt.out, summary);

  // Aggregate table, one row per initial state.
  std::ofstream agg(fs::path(opt.out) / "sweep.csv", std::ios::binary);
  agg << "index";
  for (const auto& c : state_columns(s.system)) agg << "," << c << "0";
  agg << ",goal_reached,goal_time,min_h,final_h";
  for (double rho : s.rhos) {
    agg << ",max_residence_" << format_double(rho) << ",bound_satisfied_" << format_double(rho);
  }
  agg << "\n";
  std::size_t reached = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Json& r = runs[i].summary;
    agg << i;
    for (Eigen::Index k = 0; k < ics[i].size(); ++k) agg << "," << format_double(ics[i](k));
    const bool g = r["goal_reached"].get<bool>();
    reached += g ? 1 : 0;
    agg << "," << (g ? 1 : 0) << ","
        << (r["goal_time"].is_null() ? "" : format_double(r["goal_time"].get<double>())) << ","
        << format_double(r["min_h"].get<double>()) << ","
        << format_double(r["final_h"].get<double>());
    for (const auto& res : r["residence"]) {
      agg << "," << format_double(res["max_residence"].get<double>()) << ","
          << (res["bound_satisfied"].is_null() ? ""
                                               : (res["bound_satisfied"].get<bool>() ? "1" : "0"));
    }
    agg << "\n";
  }
  std::cout << s.name << ": sweep of " << runs.size() << ", goal reached " << reached << "/"
            << runs.size() << ", exit " << code << "\n";
  return code;
}

int cmd_verify(const RunnerOptions& opt) {
  if (!prepare_out(opt.out)) return kExitFailure;
  RowBuilders rows;
  if (!opt.fault.empty()) {
    try {
      rows = RowBuilders::with_fault(opt.fault);
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitSchema;
    }
  }
  BarrierSpec bar;
  bar.obstacle.center0 = Vec2(0.0, 3.0);
  bar.obstacle.radius = 1.5;
  const auto grid1 =
      feasibility_grid_single(bar, AuxiliarySpec::position_angle(0.8, 0.12), PlanarGrid{}, rows);
  // A grid through the center exercises the excluded singular point.
  const auto grid1c = feasibility_grid_single(bar, AuxiliarySpec::position_angle(0.8, 0.12),
                                              PlanarGrid{-5.0, 5.0, 11, 1e-3}, rows);
  const auto grid2 = feasibility_grid_double(HocbfSpec{bar, 1.0, 1.0},
                                             AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05),
                                             sample_phase_points(10000, 11, -5.0, 5.0, 2.0), rows);
  const auto fd = gradient_fd_suite(FdSpecs::defaults(), 100, 1e-6, 7, rows);
  const bool fd_ok = fd.max_rel_error <= 1e-5;
  const bool ok = grid1.passed() && grid1.infeasible_points.empty() && grid1c.passed() &&
                  grid1c.infeasible_points.empty() && grid2.passed() && fd_ok;

  Json rep;
  rep["fault"] = opt.fault.empty() ? Json(nullptr) : Json(opt.fault);
  rep["feasibility_single"] = to_json(grid1);
  rep["feasibility_single_through_center"] = to_json(grid1c);
  rep["feasibility_double"] = to_json(grid2);
  rep["gradient_fd"] = to_json(fd);
  rep["gradient_fd"]["tolerance"] = 1e-5;
  rep["gradient_fd"]["passed"] = fd_ok;
  rep["passed"] = ok;
  write_json((fs::path(opt.out) / "verify_report.json").string(), rep);
  std::cout << "verify: single grid infeasible=" << grid1.infeasible_points.size()
            << ", double samples infeasible=" << grid2.infeasible_points.size()
            << " (degenerate " << grid2.degenerate_points.size()
            << "), fd max rel error=" << fd.max_rel_error << ", " << (ok ? "PASS" : "FAIL")
            << "\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_analyze(const RunnerOptions& opt) {
  Loaded l = load(opt);
  if (l.code != kExitOk) return l.code;
  const Scenario& s = l.scenario;
  std::vector<fs::path> csvs;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(opt.out, ec)) {
    const auto name = e.path().filename().string();
    if (name.rfind("traj_", 0) == 0 && e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  if (ec || csvs.empty()) {
    std::cerr << "schema error: no trajectory CSVs in " << opt.out << "\n";
    return kExitSchema;
  }
  const auto law = s.make_law();
  Json runs = Json::array();
  bool ok = true;
  for (const auto& p : csvs) {
    LoadedTrajectory lt;
    try {
      lt = read_trajectory_csv(p.string());
    } catch (const CsvError& e) {
      std::cerr << "schema error: " << e.what() << "\n";
      return kExitSchema;
    }
    if (lt.kind != s.system) {
      std::cerr << "schema error: " << p.string() << ": columns do not match the scenario\n";
      return kExitSchema;
    }
    Trajectory& tr = lt.traj;
    if (tr.dt == 0.0) tr.dt = s.sim.dt;
    replay_observations(tr, *law);
    Json r;
    r["csv"] = p.filename().string();
    double min_h = std::numeric_limits<double>::infinity();
    for (const auto& smp : tr.samples) min_h = std::min(min_h, smp.h);
    r["min_h"] = min_h;
    r["safe"] = min_h >= -s.sim.safety_tol;
    Json res = Json::array();
    for (double rho : s.rhos) {
      Json rj = residence_json(tr, *law, rho);
      if (rj["bound_satisfied"].is_boolean() && !rj["bound_satisfied"].get<bool>()) ok = false;
      res.push_back(rj);
    }
    r["residence"] = res;
    r["containment"] = to_json(check_compact_containment(tr, s.bound_box));
    ok = ok && r["safe"].get<bool>();
    runs.push_back(r);
  }
  Json eq = Json::array();
  for (const auto& x : detect_boundary_equilibria(*law, s.model(), s.barrier(), RingSampler{})) {
    eq.push_back(state_json(x));
  }
  Json rep;
  rep["scenario"] = s.name;
  rep["runs"] = runs;
  rep["boundary_equilibria"] = eq;
  rep["passed"] = ok;
  write_json((fs::path(opt.out) / "analysis.json").string(), rep);
  std::cout << s.name << ": analyzed " << csvs.size() << " trajectories, "
            << eq.size() << " boundary equilibria, " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_plot(const RunnerOptions& opt) {
  if (opt.inputs.empty()) {
    std::cerr << "schema error: no trajectory CSVs given\n";
    return kExitSchema;
  }
  if (opt.out.empty()) {
    std::cerr << "error: --out is required\n";
    return kExitFailure;
  }
  PlotScene scene;
  if (!opt.scenario.empty()) {
    Loaded l = load(opt);
    if (l.code != kExitOk) return l.code;
    scene.obstacle = l.scenario.barrier().obstacle;
    scene.goal = l.scenario.sim.goal;
  }
  std::vector<PlotRun> runs;
  for (const auto& path : opt.inputs) {
    try {
      runs.push_back({fs::path(path).stem().string(), read_trajectory_csv(path)});
    } catch (const CsvError& e) {
      std::cerr << "schema error: " << e.what() << "\n";
      return kExitSchema;
    }
  }
  fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const fs::path stem = out.parent_path() / out.stem();
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    return static_cast<bool>(f);
  };
  const bool ok = write(out, trajectory_svg(runs, scene)) &&
                  write(stem.string() + "_h.svg", time_series_svg(runs, SeriesField::H)) &&
                  write(stem.string() + "_w.svg", time_series_svg(runs, SeriesField::WUnwrapped));
  if (!ok) {
    std::cerr << "error: cannot write " << out.string() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace cbfaux
