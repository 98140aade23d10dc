#pragma once

#include <optional>
#include <string_view>

#include "cbfaux/barrier.hpp"

namespace cbfaux {

enum class GateKind { Rational, Velocity, Polynomial };

/// Smooth activation factors for the auxiliary excitation.
///   Rational:   1 / (1 + (max(h, 0) / h_gate)^2)
///   Velocity:   s^2 / (s^2 + v_min^2)
///   Polynomial: (1 - h / d_gate)^p_gate on [0, d_gate), zero beyond
struct GateSpec {
  GateKind kind = GateKind::Rational;
  double h_gate = 0.12;
  double v_min = 0.05;
  double d_gate = 0.5;
  int p_gate = 2;

  static GateSpec rational(double h_gate);
  static GateSpec velocity(double v_min);
  static GateSpec polynomial(double d_gate, int p_gate);

  /// Evaluates the gate on its primary argument (h, or speed for Velocity).
  double operator()(double arg) const;
};

double gate_rational(const GateSpec& g, double h);
double gate_velocity(const GateSpec& g, double speed);
/// Throws std::domain_error for h < 0.
double gate_polynomial(const GateSpec& g, double h);

enum class AuxKind { PositionAngle, VelocityHeading, RelativeHeading };

std::string_view to_string(AuxKind kind);

/// A bounded auxiliary function W with its excitation requirement
/// Wdot >= eta * gate(h) [* speed_gate(|v|)].
struct AuxiliarySpec {
  AuxKind kind = AuxKind::PositionAngle;
  double w_bound = 0.0;  // the bound M on |W|
  double eta = 0.8;
  GateSpec gate;
  GateSpec speed_gate = GateSpec::velocity(0.05);  // VelocityHeading only
  double k_psi = 2.0;                               // RelativeHeading only

  /// W = atan2 of the obstacle-relative position; M = pi.
  static AuxiliarySpec position_angle(double eta, double h_gate);
  /// W = atan2 of the velocity; M = pi.
  static AuxiliarySpec velocity_heading(double eta0, double h_gate, double v_min);
  /// W = arctan(k_psi psi) of the heading relative to the bearing; M = pi/2.
  static AuxiliarySpec relative_heading(double eta0, double k_psi, double d_gate,
                                        int p_gate);

  /// Gate value on h, dispatching on gate.kind.
  double h_gate_value(double h) const;
};

/// Unicycle pose (x, y, theta).
struct Pose {
  Vec2 p = Vec2::Zero();
  double theta = 0.0;
};

/// Wdot >= eta sigma(h) for xdot = u; row in u.
AffineConstraintRow aux_row_position_angle(const AuxiliarySpec& spec, const BarrierSpec& barrier,
                                           double t, const Vec2& x);

/// Wdot >= eta0 sigma(h) sigma_v(|v|) for vdot = u; row in u. Throws
/// DegenerateGeometryError for |v| < 1e-12.
AffineConstraintRow aux_row_velocity_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier, double t,
                                             const Vec2& x, const Vec2& v);

/// Velocity-heading row for the mechanical system, where qdd = M^-1 (u - C qd - G).
AffineConstraintRow aux_row_velocity_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier,
                                             const MechanicalModel& model, double t,
                                             const Vec2& q, const Vec2& qd);

/// c(psi) (omega - v sin(psi) / r) >= eta0 sigma_h(h); row in (v, omega).
AffineConstraintRow aux_row_relative_heading(const AuxiliarySpec& spec,
                                             const BarrierSpec& barrier, double t,
                                             const Pose& pose);

/// Relative heading psi = wrap(theta - bearing from the obstacle center).
double relative_heading(const Vec2& c, const Pose& pose);

/// W for `spec.kind`. `state` is x (PositionAngle), (x, v)
/// (VelocityHeading), or (x, y, theta) (RelativeHeading).
double eval_w(const AuxiliarySpec& spec, const BarrierSpec& barrier, double t,
              const StateVec& state);

/// Exact Wdot along the flow for a given input, including drift from a
/// moving obstacle. `input` is u, or (v, omega) for RelativeHeading.
double w_rate(const AuxiliarySpec& spec, const BarrierSpec& barrier, double t,
              const StateVec& state, const Vec2& input);

struct EffectiveEta {
  double value = 0.0;
  /// The floor further scales with sigma_v(|v|) and only holds when |v| stays
  /// away from zero inside the layer.
  bool conditional = false;
};

/// eta * gate(rho), the excitation floor enforced throughout Sigma_rho.
/// Throws std::domain_error when the gate vanishes inside the layer.
EffectiveEta effective_eta(const AuxiliarySpec& spec, const BoundaryLayer& layer);

}  // namespace cbfaux
