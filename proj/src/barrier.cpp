#include "cbfaux/barrier.hpp"

#include <cmath>

namespace cbfaux {

namespace {

Vec2 solve_mass(const Eigen::Matrix2d& mass, const Vec2& rhs) {
  const double scale = mass.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !(std::abs(mass.determinant()) > 1e-14 * scale * scale)) {
    throw SingularMassMatrixError();
  }
  return mass.partialPivLu().solve(rhs);
}

// Row a^T u >= -alpha2 h1 - drift - alpha1 hdot, shared by the double
// integrator and the mechanical construction so both reduce identically.
double second_order_rhs(double alpha1, double alpha2, double h1, double hdot,
                        double drift) {
  return -alpha2 * h1 - drift - alpha1 * hdot;
}

}  // namespace

MechanicalModel MechanicalModel::constant(const Eigen::Matrix2d& mass, const Vec2& gravity) {
  MechanicalModel model;
  model.mass_matrix = [mass](const Vec2&) { return mass; };
  model.coriolis = [](const Vec2&, const Vec2&) { return Eigen::Matrix2d::Zero().eval(); };
  model.gravity = [gravity](const Vec2&) { return gravity; };
  return model;
}

Vec2 MechanicalModel::inverse_mass_times(const Vec2& q, const Vec2& rhs) const {
  return solve_mass(mass_matrix(q), rhs);
}

Vec2 MechanicalModel::acceleration(const Vec2& q, const Vec2& qd, const Vec2& u) const {
  const Vec2 bias = coriolis(q, qd) * qd + gravity(q);
  return solve_mass(mass_matrix(q), u - bias);
}

double eval_h(const BarrierSpec& spec, double t, const Vec2& x) {
  const Vec2 d = x - spec.obstacle.center(t);
  return d.squaredNorm() - spec.obstacle.radius * spec.obstacle.radius;
}

BarrierPartials h_partials(const BarrierSpec& spec, double t, const Vec2& x) {
  const Vec2 d = x - spec.obstacle.center(t);
  BarrierPartials out;
  out.grad_x = 2.0 * d;
  out.dt_part = -2.0 * d.dot(spec.obstacle.velocity);
  return out;
}

AffineConstraintRow cbf_row_single_integrator(const BarrierSpec& spec, double t,
                                              const Vec2& x) {
  const double h = eval_h(spec, t, x);
  const BarrierPartials partials = h_partials(spec, t, x);
  AffineConstraintRow row;
  row.a = partials.grad_x;
  row.b = -spec.alpha_h(h) - partials.dt_part;
  row.label = RowLabel::Cbf;
  return row;
}

HocbfRow hocbf_rows(const HocbfSpec& spec, double t, const Vec2& x, const Vec2& v) {
  const MovingDisk& obs = spec.base.obstacle;
  const Vec2 d = x - obs.center(t);
  const Vec2 w = v - obs.velocity;
  const double h = eval_h(spec.base, t, x);
  const double hdot = 2.0 * d.dot(w);
  const double drift = 2.0 * w.squaredNorm();

  HocbfRow out;
  out.h1 = hdot + spec.alpha1 * h;
  out.row.a = 2.0 * d;
  out.row.b = second_order_rhs(spec.alpha1, spec.alpha2, out.h1, hdot, drift);
  out.row.label = RowLabel::Cbf;
  return out;
}

MechanicalBarrierRow mechanical_rows(const MechanicalModel& model, const HocbfSpec& spec,
                                     double t, const Vec2& q, const Vec2& qd) {
  const MovingDisk& obs = spec.base.obstacle;
  const Eigen::Matrix2d mass = model.mass_matrix(q);
  const Vec2 d = q - obs.center(t);
  const Vec2 w = qd - obs.velocity;
  const double h = eval_h(spec.base, t, q);
  const double hdot = 2.0 * d.dot(w);
  const Vec2 bias = model.coriolis(q, qd) * qd + model.gravity(q);

  MechanicalBarrierRow out;
  out.a_h = 2.0 * solve_mass(mass, d);
  out.gamma_h = 2.0 * w.squaredNorm() - 2.0 * d.dot(solve_mass(mass, bias));
  out.h1 = hdot + spec.alpha1 * h;
  out.beta_h = second_order_rhs(spec.alpha1, spec.alpha2, out.h1, hdot, out.gamma_h);
  return out;
}

bool in_boundary_layer(const BarrierSpec& spec, const BoundaryLayer& layer, double t,
                       const Vec2& x) {
  return in_boundary_layer(eval_h(spec, t, x), layer);
}

}  // namespace cbfaux
