#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cbfaux/controller.hpp"
#include "cbfaux/dynamics.hpp"

namespace cbfaux {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 30.0;
  double t0 = 0.0;
  int controller_rate_divisor = 1;
  StateVec initial_state;
  Vec2 goal = Vec2::Zero();
  double goal_tol = 0.1;
  double safety_tol = 1e-6;
  bool stop_at_goal = true;
  /// Stop at the first controller failure instead of holding the last input.
  bool strict = false;

  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  StateVec state;
  Vec2 input = Vec2::Zero();
  std::optional<double> delta;
  double h = 0.0;
  std::optional<double> h1;
  double w = 0.0;
  double w_unwrapped = 0.0;
  double w_rate = 0.0;
  double gate = 0.0;
  double speed_gate = 1.0;
  bool in_layer = false;
  QpStatus qp_status = QpStatus::Optimal;
  std::vector<RowLabel> active_labels;
  bool aux_enforced = false;  // auxiliary row present in the solved program
};

enum class EventKind { SafetyViolation, QpInfeasible, DegenerateAuxDropped, GoalReached,
                       ControllerError };

std::string_view to_string(EventKind kind);

struct SimEvent {
  double t = 0.0;
  EventKind kind = EventKind::GoalReached;
  std::string detail;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<SimEvent> events;
  double dt = 0.0;
  bool stopped_on_error = false;

  bool has_event(EventKind kind) const;
  std::size_t count_events(EventKind kind) const;
};

/// Raised when the right-hand side evaluates to a non-finite value.
class NonFiniteStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Classical fourth-order Runge-Kutta step with the input held constant.
StateVec rk4_step(const SystemModel& model, const Vec2& input, double t, const StateVec& state,
                  double dt);

/// Fixed-step closed-loop rollout with zero-order-hold control. Every sample
/// is logged; events record safety violations, QP failures, dropped auxiliary
/// rows, and goal arrival.
Trajectory simulate(const SystemModel& model, const FeedbackLaw& law, const SimConfig& cfg,
                    const BoundaryLayer& layer);

}  // namespace cbfaux
