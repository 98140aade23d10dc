#include "cbfaux/auxiliary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cbfaux {

GateSpec GateSpec::rational(double h_gate) {
  GateSpec g;
  g.kind = GateKind::Rational;
  g.h_gate = h_gate;
  return g;
}

GateSpec GateSpec::velocity(double v_min) {
  GateSpec g;
  g.kind = GateKind::Velocity;
  g.v_min = v_min;
  return g;
}

GateSpec GateSpec::polynomial(double d_gate, int p_gate) {
  GateSpec g;
  g.kind = GateKind::Polynomial;
  g.d_gate = d_gate;
  g.p_gate = p_gate;
  return g;
}

double GateSpec::operator()(double arg) const {
  switch (kind) {
    case GateKind::Rational:
      return gate_rational(*this, arg);
    case GateKind::Velocity:
      return gate_velocity(*this, arg);
    case GateKind::Polynomial:
      return gate_polynomial(*this, arg);
  }
  return 0.0;
}

double gate_rational(const GateSpec& g, double h) {
  const double ratio = std::max(h, 0.0) / g.h_gate;
  return 1.0 / (1.0 + ratio * ratio);
}

double gate_velocity(const GateSpec& g, double speed) {
  const double s2 = speed * speed;
  return s2 / (s2 + g.v_min * g.v_min);
}

double gate_polynomial(const GateSpec& g, double h) {
  if (h < 0.0) {
    throw std::domain_error("polynomial gate evaluated outside the safe set");
  }
  if (h >= g.d_gate) return 0.0;
  return std::pow(1.0 - h / g.d_gate, g.p_gate);
}

std::string_view to_string(AuxKind kind) {
  switch (kind) {
    case AuxKind::PositionAngle:
      return "position_angle";
    case AuxKind::VelocityHeading:
      return "velocity_heading";
    case AuxKind::RelativeHeading:
      return "relative_heading";
  }
  return "?";
}

AuxiliarySpec AuxiliarySpec::position_angle(double eta, double h_gate) {
  AuxiliarySpec s;
  s.kind = AuxKind::PositionAngle;
  s.w_bound = std::numbers::pi;
  s.eta = eta;
  s.gate = GateSpec::rational(h_gate);
  return s;
}

AuxiliarySpec AuxiliarySpec::velocity_heading(double eta0, double h_gate, double v_min) {
  AuxiliarySpec s;
  s.kind = AuxKind::VelocityHeading;
  s.w_bound = std::numbers::pi;
  s.eta = eta0;
  s.gate = GateSpec::rational(h_gate);
  s.speed_gate = GateSpec::velocity(v_min);
  return s;
}

AuxiliarySpec AuxiliarySpec::relative_heading(double eta0, double k_psi, double d_gate,
                                              int p_gate) {
  AuxiliarySpec s;
  s.kind = AuxKind::RelativeHeading;
  s.w_bound = std::numbers::pi / 2.0;
  s.eta = eta0;
  s.k_psi = k_psi;
  s.gate = GateSpec::polynomial(d_gate, p_gate);
  return s;
}

double AuxiliarySpec::h_gate_value(double h) const {
  // Small numerical excursions below h = 0 are treated as boundary points,
  // matching the max{h, 0} clamp of the rational gate.
  if (gate.kind == GateKind::Polynomial) return gate_polynomial(gate, std::max(h, 0.0));
  return gate(h);
}

AffineConstraintRow aux_row_position_angle(const AuxiliarySpec& spec, const BarrierSpec& barrier,
                                           double t, const Vec2& x) {
  const PolarFrame frame = polar_frame(x, barrier.obstacle.center(t));
  const double h = eval_h(barrier, t, x);
  AffineConstraintRow row;
  row.a = frame.e_theta / frame.r;
  row.b = spec.eta * spec.h_gate_value(h) + row.a.dot(barrier.obstacle.velocity);
  row.label = RowLabel::Aux;
  return row;
}

namespace {

void require_speed(const Vec2& v) {
  if (!(v.norm() >= kDegenerateRadius)) {
    throw DegenerateGeometryError("velocity heading undefined at zero velocity");
  }
}

double velocity_heading_rhs(const AuxiliarySpec& spec, const BarrierSpec& barrier, double t,
                            const Vec2& x, const Vec2& v) {
  const double h = eval_h(barrier, t, x);
  return spec.eta * spec.h_gate_value(h) * spec.speed_gate(v.norm());
}

double c_psi(double k_psi, double psi) {
  const double kp = k_psi * psi;
  return k_psi / (1.0 + kp * kp);
}

// Bearing rate about the obstacle center induced by the obstacle's own motion,
// with opposite sign: cross(d, c_dot) / r^2.
double bearing_drift(const Vec2& d, const Vec2& c_dot) {
  return cross(d, c_dot) / d.squaredNorm();
}

}  // namespace

AffineConstraintRow aux_row_velocity_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier, double t,
                                             const Vec2& x, const Vec2& v) {
  require_speed(v);
  AffineConstraintRow row;
  row.a = rotate90(v) / v.squaredNorm();
  row.b = velocity_heading_rhs(spec, barrier, t, x, v);
  row.label = RowLabel::Aux;
  return row;
}

AffineConstraintRow aux_row_velocity_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier,
                                             const MechanicalModel& model, double t,
                                             const Vec2& q, const Vec2& qd) {
  require_speed(qd);
  // Wdot = normal^T M^-1 (u - bias); M is symmetric so the row is M^-1 normal.
  const Vec2 normal = rotate90(qd) / qd.squaredNorm();
  const Vec2 a = model.inverse_mass_times(q, normal);
  const Vec2 bias = model.coriolis(q, qd) * qd + model.gravity(q);
  const double drift = -normal.dot(model.inverse_mass_times(q, bias));
  AffineConstraintRow row;
  row.a = a;
  row.b = velocity_heading_rhs(spec, barrier, t, q, qd) - drift;
  row.label = RowLabel::Aux;
  return row;
}

double relative_heading(const Vec2& c, const Pose& pose) {
  const Vec2 d = pose.p - c;
  return wrap_angle(pose.theta - std::atan2(d.y(), d.x()));
}

AffineConstraintRow aux_row_relative_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier, double t,
                                             const Pose& pose) {
  const Vec2 c = barrier.obstacle.center(t);
  const PolarFrame frame = polar_frame(pose.p, c);
  const double psi = relative_heading(c, pose);
  const double cp = c_psi(spec.k_psi, psi);
  const double h = eval_h(barrier, t, pose.p);
  AffineConstraintRow row;
  row.a = Vec2(-cp * std::sin(psi) / frame.r, cp);
  row.b = spec.eta * spec.h_gate_value(h) -
          cp * bearing_drift(pose.p - c, barrier.obstacle.velocity);
  row.label = RowLabel::Aux;
  return row;
}

namespace {

Pose pose_of(const StateVec& s) { return Pose{Vec2(s(0), s(1)), s(2)}; }

void require_size(const StateVec& s, Eigen::Index n) {
  if (s.size() != n) throw std::invalid_argument("state has the wrong dimension");
}

}  // namespace

double eval_w(const AuxiliarySpec& spec, const BarrierSpec& barrier, double t,
              const StateVec& state) {
  switch (spec.kind) {
    case AuxKind::PositionAngle: {
      require_size(state, 2);
      const Vec2 x = state.head<2>();
      const Vec2 d = x - barrier.obstacle.center(t);
      if (!(d.norm() >= kDegenerateRadius)) {
        throw DegenerateGeometryError("bearing undefined at the obstacle center");
      }
      return wrap_angle(std::atan2(d.y(), d.x()));
    }
    case AuxKind::VelocityHeading: {
      require_size(state, 4);
      const Vec2 v = state.segment<2>(2);
      require_speed(v);
      return wrap_angle(std::atan2(v.y(), v.x()));
    }
    case AuxKind::RelativeHeading: {
      require_size(state, 3);
      const Pose pose = pose_of(state);
      const Vec2 c = barrier.obstacle.center(t);
      if (!((pose.p - c).norm() >= kDegenerateRadius)) {
        throw DegenerateGeometryError("bearing undefined at the obstacle center");
      }
      return std::atan(spec.k_psi * relative_heading(c, pose));
    }
  }
  return 0.0;
}

double w_rate(const AuxiliarySpec& spec, const BarrierSpec& barrier, double t,
              const StateVec& state, const Vec2& input) {
  switch (spec.kind) {
    case AuxKind::PositionAngle: {
      require_size(state, 2);
      const PolarFrame frame = polar_frame(state.head<2>(), barrier.obstacle.center(t));
      return frame.e_theta.dot(input - barrier.obstacle.velocity) / frame.r;
    }
    case AuxKind::VelocityHeading: {
      require_size(state, 4);
      const Vec2 v = state.segment<2>(2);
      require_speed(v);
      return cross(v, input) / v.squaredNorm();
    }
    case AuxKind::RelativeHeading: {
      require_size(state, 3);
      const Pose pose = pose_of(state);
      const Vec2 c = barrier.obstacle.center(t);
      const PolarFrame frame = polar_frame(pose.p, c);
      const double psi = relative_heading(c, pose);
      const double bearing_rate = input(0) * std::sin(psi) / frame.r -
                                  bearing_drift(pose.p - c, barrier.obstacle.velocity);
      return c_psi(spec.k_psi, psi) * (input(1) - bearing_rate);
    }
  }
  return 0.0;
}

EffectiveEta effective_eta(const AuxiliarySpec& spec, const BoundaryLayer& layer) {
  if (!(layer.rho > 0.0)) throw std::domain_error("boundary layer width must be positive");
  if (spec.gate.kind == GateKind::Polynomial && layer.rho >= spec.gate.d_gate) {
    throw std::domain_error("gate vanishes inside the boundary layer (rho >= d_gate)");
  }
  EffectiveEta out;
  out.value = spec.eta * spec.h_gate_value(layer.rho);
  out.conditional = spec.kind == AuxKind::VelocityHeading;
  return out;
}

}  // namespace cbfaux
