#include "cbfaux/sim.hpp"

#include <cmath>
#include <sstream>

namespace cbfaux {

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon > dt)) throw std::invalid_argument("horizon must exceed dt");
  if (controller_rate_divisor < 1) {
    throw std::invalid_argument("controller_rate_divisor must be >= 1");
  }
  if (!(goal_tol > 0.0)) throw std::invalid_argument("goal_tol must be positive");
  if (!(safety_tol >= 0.0)) throw std::invalid_argument("safety_tol must be nonnegative");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::SafetyViolation:
      return "SafetyViolation";
    case EventKind::QpInfeasible:
      return "QpInfeasible";
    case EventKind::DegenerateAuxDropped:
      return "DegenerateAuxDropped";
    case EventKind::GoalReached:
      return "GoalReached";
    case EventKind::ControllerError:
      return "ControllerError";
  }
  return "?";
}

bool Trajectory::has_event(EventKind kind) const { return count_events(kind) > 0; }

std::size_t Trajectory::count_events(EventKind kind) const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.kind == kind ? 1 : 0;
  return n;
}

namespace {

StateVec checked_rhs(const SystemModel& model, double t, const StateVec& x, const Vec2& u) {
  StateVec dx = dynamics(model, t, x, u);
  if (!dx.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state derivative at t=" << t << " state=[" << x.transpose() << "]";
    throw NonFiniteStateError(msg.str());
  }
  return dx;
}

}  // namespace

StateVec rk4_step(const SystemModel& model, const Vec2& input, double t, const StateVec& state,
                  double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const StateVec k1 = checked_rhs(model, t, state, input);
  const StateVec k2 = checked_rhs(model, t + 0.5 * dt, state + 0.5 * dt * k1, input);
  const StateVec k3 = checked_rhs(model, t + 0.5 * dt, state + 0.5 * dt * k2, input);
  const StateVec k4 = checked_rhs(model, t + dt, state + dt * k3, input);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory simulate(const SystemModel& model, const FeedbackLaw& law, const SimConfig& cfg,
                    const BoundaryLayer& layer) {
  cfg.validate();
  if (cfg.initial_state.size() != model.state_dim()) {
    throw std::invalid_argument("initial state dimension does not match the system");
  }
  const BarrierSpec& barrier = law.barrier();
  if (eval_h(barrier, cfg.t0, model.position(cfg.initial_state)) < 0.0) {
    throw std::invalid_argument("initial state lies outside the safe set");
  }

  Trajectory traj;
  traj.dt = cfg.dt;
  const long n_steps = std::lround(cfg.horizon / cfg.dt);
  traj.samples.reserve(static_cast<std::size_t>(n_steps) + 1);

  StateVec x = cfg.initial_state;
  ControlResult held;
  held.status = QpStatus::Optimal;
  bool violating = false;
  bool goal_reached = false;
  double last_w = std::nan("");
  double w_unwrapped = std::nan("");
  double last_rate = 0.0;

  for (long k = 0; k <= n_steps; ++k) {
    const double t = cfg.t0 + static_cast<double>(k) * cfg.dt;
    if (k % cfg.controller_rate_divisor == 0) {
      try {
        ControlResult cr = law.control(t, x);
        if (cr.status == QpStatus::Infeasible) {
          traj.events.push_back({t, EventKind::QpInfeasible, "safety program infeasible"});
          if (cfg.strict) {
            traj.stopped_on_error = true;
          } else {
            cr.u = held.u;
          }
        }
        if (cr.aux_dropped) {
          traj.events.push_back(
              {t, EventKind::DegenerateAuxDropped, "auxiliary row conflicts with barrier row"});
        }
        held = std::move(cr);
      } catch (const std::exception& e) {
        traj.events.push_back({t, EventKind::ControllerError, e.what()});
        held.status = QpStatus::Infeasible;
        if (cfg.strict) traj.stopped_on_error = true;
      }
    }

    const Observation obs = law.observe(t, x, held.u);
    TrajectorySample s;
    s.t = t;
    s.state = x;
    s.input = held.u;
    s.delta = held.delta;
    s.h = obs.h;
    s.h1 = obs.h1;
    s.w = obs.w;
    s.w_rate = obs.w_rate;
    s.gate = obs.gate;
    s.speed_gate = obs.speed_gate;
    s.in_layer = in_boundary_layer(obs.h, layer);
    s.qp_status = held.status;
    s.active_labels = held.active_labels;
    s.aux_enforced = law.auxiliary() != nullptr && held.status == QpStatus::Optimal &&
                     !held.aux_dropped && obs.gate > 0.0 && std::isfinite(obs.w);

    // Unwrapped W integrates the analytic rate; re-anchors when W was undefined.
    if (std::isfinite(obs.w)) {
      if (!std::isfinite(w_unwrapped)) {
        w_unwrapped = obs.w;
      } else if (!std::isfinite(last_w)) {
        w_unwrapped += wrap_angle(obs.w - wrap_angle(w_unwrapped));
      } else {
        w_unwrapped += 0.5 * cfg.dt * (last_rate + obs.w_rate);
      }
    }
    s.w_unwrapped = w_unwrapped;
    last_w = obs.w;
    last_rate = obs.w_rate;

    if (obs.h < -cfg.safety_tol) {
      if (!violating) {
        std::ostringstream msg;
        msg << "h=" << obs.h;
        traj.events.push_back({t, EventKind::SafetyViolation, msg.str()});
      }
      violating = true;
    } else {
      violating = false;
    }

    bool stop = traj.stopped_on_error;
    if (!goal_reached && (model.position(x) - cfg.goal).norm() <= cfg.goal_tol) {
      goal_reached = true;
      traj.events.push_back({t, EventKind::GoalReached, ""});
      stop = stop || cfg.stop_at_goal;
    }
    traj.samples.push_back(std::move(s));
    if (stop || k == n_steps) break;

    try {
      x = rk4_step(model, held.u, t, x, cfg.dt);
    } catch (const std::exception& e) {
      traj.events.push_back({t, EventKind::ControllerError, e.what()});
      traj.stopped_on_error = true;
      break;
    }
  }
  return traj;
}

}  // namespace cbfaux
