#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "cbfaux/runner.hpp"
#include "cbfaux/scenario.hpp"

namespace py = pybind11;
using namespace cbfaux;

namespace {

py::dict solve(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
               const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw std::invalid_argument("A and b have different row counts");
  QpProblem p;
  p.Q = Q;
  p.q = q;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    AffineConstraintRow r;
    r.a = A.row(i).transpose();
    r.b = b(i);
    p.rows.push_back(r);
  }
  const QpSolution s = solve_qp(p);
  py::dict out;
  out["status"] = std::string(to_string(s.status));
  out["z"] = s.z;
  out["multipliers"] = s.multipliers;
  out["active_set"] = s.active_set;
  out["objective"] = s.objective;
  out["kkt_residual"] = s.status == QpStatus::Optimal ? check_kkt(p, s)
                                                      : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Scenario parse(const std::string& text) { return parse_scenario_text(text); }

py::dict trajectory_dict(const Trajectory& t) {
  const Eigen::Index n = static_cast<Eigen::Index>(t.samples.size());
  const Eigen::Index dim = n ? t.samples.front().state.size() : 0;
  Eigen::VectorXd time(n), h(n), w(n), gate(n);
  Eigen::MatrixXd state(n, dim), input(n, 2);
  std::vector<bool> in_layer(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = t.samples[static_cast<std::size_t>(i)];
    time(i) = s.t;
    state.row(i) = s.state.transpose();
    input.row(i) = s.input.transpose();
    h(i) = s.h;
    w(i) = s.w_unwrapped;
    gate(i) = s.gate;
    in_layer[static_cast<std::size_t>(i)] = s.in_layer;
  }
  py::list events;
  for (const auto& e : t.events) {
    events.append(py::make_tuple(e.t, std::string(to_string(e.kind)), e.detail));
  }
  py::dict out;
  out["t"] = time;
  out["state"] = state;
  out["input"] = input;
  out["h"] = h;
  out["w_unwrapped"] = w;
  out["gate"] = gate;
  out["in_layer"] = in_layer;
  out["events"] = events;
  out["stopped_on_error"] = t.stopped_on_error;
  return out;
}

py::dict simulate_scenario(const std::string& text, std::size_t index, bool with_summary) {
  const Scenario s = parse(text);
  if (index >= s.initial_states.size()) throw py::index_error("initial state index out of range");
  SimConfig cfg = s.sim;
  cfg.initial_state = s.initial_states[index];
  const auto law = s.make_law();
  Trajectory t;
  {
    py::gil_scoped_release release;
    t = simulate(s.model(), *law, cfg, BoundaryLayer{s.rhos.front()});
  }
  py::dict out = trajectory_dict(t);
  if (with_summary) out["summary"] = run_summary(s, *law, t, index, cfg.initial_state).dump();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Barrier-function safety filters with auxiliary excitation constraints";
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);

  m.def("solve_qp", &solve, py::arg("Q"), py::arg("q"), py::arg("A"), py::arg("b"),
        "Minimize 1/2 z'Qz + q'z subject to A z >= b.");
  m.def("gate_rational", [](double h, double h_gate) {
    return gate_rational(GateSpec::rational(h_gate), h);
  }, py::arg("h"), py::arg("h_gate"));
  m.def("gate_velocity", [](double speed, double v_min) {
    return gate_velocity(GateSpec::velocity(v_min), speed);
  }, py::arg("speed"), py::arg("v_min"));
  m.def("gate_polynomial", [](double h, double d_gate, int p_gate) {
    return gate_polynomial(GateSpec::polynomial(d_gate, p_gate), h);
  }, py::arg("h"), py::arg("d_gate"), py::arg("p_gate"));
  m.def("effective_config", [](const std::string& text) {
    return effective_config(parse(text)).dump(2);
  }, py::arg("scenario_json"), "Validate a scenario and return it with every default filled in.");
  m.def("initial_states", [](const std::string& text, bool sweep) {
    const Scenario s = parse(text);
    return sweep ? s.sweep_states() : s.initial_states;
  }, py::arg("scenario_json"), py::arg("sweep") = false);
  m.def("simulate", &simulate_scenario, py::arg("scenario_json"), py::arg("index") = 0,
        py::arg("with_summary") = true);
}
