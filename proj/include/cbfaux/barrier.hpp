#pragma once

#include <functional>
#include <stdexcept>

#include "cbfaux/geometry.hpp"
#include "cbfaux/qp.hpp"

namespace cbfaux {

/// Linear extended class-K-infinity map s -> gain * s.
struct LinearClassK {
  double gain = 1.0;
  double operator()(double s) const { return gain * s; }
};

/// h(t, x) = |x - c(t)|^2 - R^2 for a disk obstacle.
struct BarrierSpec {
  MovingDisk obstacle;
  LinearClassK alpha_h;
};

/// Second-order barrier h1 = hdot + alpha1 h with hdot1 >= -alpha2 h1.
struct HocbfSpec {
  BarrierSpec base;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

/// Sigma_rho = {x : 0 <= h <= rho}.
struct BoundaryLayer {
  double rho = 0.06;
};

/// M(q) qdd + C(q, qd) qd + G(q) = u on the plane.
struct MechanicalModel {
  std::function<Eigen::Matrix2d(const Vec2&)> mass_matrix;
  std::function<Eigen::Matrix2d(const Vec2&, const Vec2&)> coriolis;
  std::function<Vec2(const Vec2&)> gravity;

  /// Constant mass matrix, no Coriolis terms, constant gravity vector.
  static MechanicalModel constant(const Eigen::Matrix2d& mass,
                                  const Vec2& gravity = Vec2::Zero());

  /// M(q)^-1 rhs. Throws SingularMassMatrixError.
  Vec2 inverse_mass_times(const Vec2& q, const Vec2& rhs) const;

  /// qdd = M^-1 (u - C qd - G). Throws SingularMassMatrixError.
  Vec2 acceleration(const Vec2& q, const Vec2& qd, const Vec2& u) const;
};

class SingularMassMatrixError : public std::domain_error {
 public:
  SingularMassMatrixError() : std::domain_error("mass matrix is singular") {}
};

double eval_h(const BarrierSpec& spec, double t, const Vec2& x);

struct BarrierPartials {
  Vec2 grad_x;
  double dt_part = 0.0;
};

BarrierPartials h_partials(const BarrierSpec& spec, double t, const Vec2& x);

/// hdot >= -alpha_h(h) for xdot = u, as a row in u.
AffineConstraintRow cbf_row_single_integrator(const BarrierSpec& spec, double t,
                                              const Vec2& x);

struct HocbfRow {
  double h1 = 0.0;
  AffineConstraintRow row;
};

/// hdot1 >= -alpha2 h1 for the double integrator xdot = v, vdot = u.
HocbfRow hocbf_rows(const HocbfSpec& spec, double t, const Vec2& x, const Vec2& v);

struct MechanicalBarrierRow {
  Vec2 a_h;
  double beta_h = 0.0;
  double gamma_h = 0.0;  // drift part of hddot
  double h1 = 0.0;
};

/// Same second-order condition as hocbf_rows, for the mechanical system
/// M(q) qdd + C qd + G = u: a_h = 2 M^-1 (q - c) and a_h^T u >= beta_h.
MechanicalBarrierRow mechanical_rows(const MechanicalModel& model, const HocbfSpec& spec,
                                     double t, const Vec2& q, const Vec2& qd);

bool in_boundary_layer(const BarrierSpec& spec, const BoundaryLayer& layer, double t,
                       const Vec2& x);

inline bool in_boundary_layer(double h, const BoundaryLayer& layer) {
  return h >= 0.0 && h <= layer.rho;
}

}  // namespace cbfaux
