#include "cbfaux/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cbfaux {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> state_columns(SystemKind kind) {
  switch (kind) {
    case SystemKind::SingleIntegrator:
      return {"x1", "x2"};
    case SystemKind::DoubleIntegrator:
      return {"x1", "x2", "v1", "v2"};
    case SystemKind::Unicycle:
      return {"x", "y", "theta"};
    case SystemKind::Mechanical:
      return {"q1", "q2", "qd1", "qd2"};
  }
  return {};
}

std::vector<std::string> input_columns(SystemKind kind) {
  if (kind == SystemKind::Unicycle) return {"v", "omega"};
  return {"u1", "u2"};
}

std::vector<std::string> csv_header(SystemKind kind) {
  std::vector<std::string> cols{"t"};
  for (auto& c : state_columns(kind)) cols.push_back(c);
  for (auto& c : input_columns(kind)) cols.push_back(c);
  for (const char* c : {"delta", "h", "h1", "w", "w_unwrapped", "gate", "in_layer", "qp_status"}) {
    cols.emplace_back(c);
  }
  return cols;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::string opt(double x) { return std::isfinite(x) ? format_double(x) : ""; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line, const std::string& col) {
  if (s.empty()) return std::nan("");
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw CsvError("line " + std::to_string(line) + ", column " + col + ": not a number '" + s +
                   "'");
  }
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj, SystemKind kind) {
  std::string out = join(csv_header(kind)) + "\n";
  for (const auto& s : traj.samples) {
    std::vector<std::string> f;
    f.push_back(format_double(s.t));
    for (Eigen::Index i = 0; i < s.state.size(); ++i) f.push_back(format_double(s.state(i)));
    f.push_back(format_double(s.input(0)));
    f.push_back(format_double(s.input(1)));
    f.push_back(s.delta ? format_double(*s.delta) : "");
    f.push_back(format_double(s.h));
    f.push_back(s.h1 ? format_double(*s.h1) : "");
    f.push_back(opt(s.w));
    f.push_back(opt(s.w_unwrapped));
    f.push_back(format_double(s.gate));
    f.push_back(s.in_layer ? "1" : "0");
    f.emplace_back(to_string(s.qp_status));
    out += join(f) + "\n";
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, SystemKind kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << trajectory_csv(traj, kind);
}

LoadedTrajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);

  LoadedTrajectory lt;
  bool matched = false;
  for (SystemKind k : {SystemKind::SingleIntegrator, SystemKind::DoubleIntegrator,
                       SystemKind::Unicycle, SystemKind::Mechanical}) {
    if (header == csv_header(k)) {
      lt.kind = k;
      matched = true;
    }
  }
  if (!matched) throw CsvError("line 1: header does not match any trajectory schema");

  const int ns = static_cast<int>(state_columns(lt.kind).size());
  std::size_t lineno = 1;
  double prev_t = std::nan("");
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw CsvError("line " + std::to_string(lineno) + ": expected " +
                     std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    auto num = [&](std::size_t i) { return parse_number(f[i], lineno, header[i]); };
    auto required = [&](std::size_t i) {
      const double x = num(i);
      if (!std::isfinite(x)) {
        throw CsvError("line " + std::to_string(lineno) + ", column " + header[i] +
                       ": value required");
      }
      return x;
    };
    TrajectorySample s;
    std::size_t c = 0;
    s.t = required(c++);
    s.state = StateVec(ns);
    for (int i = 0; i < ns; ++i) s.state(i) = required(c++);
    s.input(0) = required(c++);
    s.input(1) = required(c++);
    const double delta = num(c++);
    if (std::isfinite(delta)) s.delta = delta;
    s.h = required(c++);
    const double h1 = num(c++);
    if (std::isfinite(h1)) s.h1 = h1;
    s.w = num(c++);
    s.w_unwrapped = num(c++);
    s.gate = required(c++);
    const std::string& layer = f[c++];
    if (layer != "0" && layer != "1") {
      throw CsvError("line " + std::to_string(lineno) + ", column in_layer: expected 0 or 1");
    }
    s.in_layer = layer == "1";
    const std::string& st = f[c++];
    if (st == "Optimal") {
      s.qp_status = QpStatus::Optimal;
    } else if (st == "Infeasible") {
      s.qp_status = QpStatus::Infeasible;
    } else {
      throw CsvError("line " + std::to_string(lineno) + ", column qp_status: unknown status '" +
                     st + "'");
    }
    if (std::isfinite(prev_t) && !(s.t > prev_t)) {
      throw CsvError("line " + std::to_string(lineno) + ": time is not increasing");
    }
    if (std::isfinite(prev_t) && lt.traj.dt == 0.0) lt.traj.dt = s.t - prev_t;
    prev_t = s.t;
    lt.traj.samples.push_back(std::move(s));
  }
  if (lt.traj.samples.empty()) throw CsvError("no samples");
  return lt;
}

LoadedTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_trajectory_csv(buf.str());
  } catch (const CsvError& e) {
    throw CsvError(path + ": " + e.what());
  }
}

void replay_observations(Trajectory& traj, const FeedbackLaw& law) {
  for (auto& s : traj.samples) {
    const Observation o = law.observe(s.t, s.state, s.input);
    s.w_rate = o.w_rate;
    s.speed_gate = o.speed_gate;
    s.aux_enforced = law.auxiliary() != nullptr && s.qp_status == QpStatus::Optimal &&
                     o.gate > 0.0 && std::isfinite(o.w);
  }
}

namespace {

Json opt_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace

Json state_json(const StateVec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json to_json(const ResidenceReport& r) {
  Json j;
  j["rho"] = r.rho;
  Json iv = Json::array();
  for (const auto& i : r.intervals) iv.push_back(Json::array({i.t_enter, i.t_exit}));
  j["intervals"] = iv;
  j["interval_count"] = r.intervals.size();
  j["max_residence"] = r.max_residence;
  j["total_occupancy"] = r.total_occupancy;
  j["final_interval_open"] = r.final_interval_open;
  j["applicable"] = r.applicable;
  j["eta_rho"] = opt_json(r.eta_rho);
  j["bound"] = opt_json(r.bound);
  j["bound_satisfied"] = r.bound_satisfied ? Json(*r.bound_satisfied) : Json(nullptr);
  j["conditional"] = r.conditional;
  j["realized_min_w_rate_in_layer"] = opt_json(r.realized_min_w_rate_in_layer);
  j["min_floor_margin_in_layer"] = opt_json(r.min_floor_margin_in_layer);
  j["realized_min_speed_gate_in_layer"] = opt_json(r.realized_min_speed_gate_in_layer);
  return j;
}

Json to_json(const FeasibilityReport& r) {
  auto list = [](const std::vector<StateVec>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back(state_json(p));
    return a;
  };
  Json j;
  j["grid_size"] = r.grid_size;
  j["passed"] = r.passed();
  j["infeasible_points"] = list(r.infeasible_points);
  j["degenerate_points"] = list(r.degenerate_points);
  j["excluded_points"] = list(r.excluded_points);
  j["max_kkt_residual"] = r.max_kkt_residual;
  return j;
}

Json to_json(const FdReport& r) {
  Json j;
  Json checks = Json::object();
  for (const auto& c : r.checks) checks[c.name] = c.max_rel_error;
  j["checks"] = checks;
  j["max_rel_error"] = r.max_rel_error;
  return j;
}

Json to_json(const ContainmentResult& r) {
  Json j;
  j["contained"] = r.contained;
  j["first_exit_time"] = opt_json(r.first_exit_time);
  return j;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cbfaux
