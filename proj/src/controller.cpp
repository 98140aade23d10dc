#include "cbfaux/controller.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cbfaux/geometry.hpp"

namespace cbfaux {

void ClfSpec::validate() const {
  if (!(gamma >= 1.0)) throw std::invalid_argument("CLF gamma must be >= 1");
  if (!(m >= 1.0)) throw std::invalid_argument("CLF relaxation weight m must be >= 1");
  if (!(c_v > 0.0)) throw std::invalid_argument("CLF decay margin c_v must be > 0");
}

NominalGains NominalGains::pd(double k_p, double k_d) {
  NominalGains g;
  g.kind = NominalKind::PD;
  g.k_p = k_p;
  g.k_d = k_d;
  return g;
}

NominalGains NominalGains::aicardi(double k_rho, double k_alpha, double k_beta) {
  NominalGains g;
  g.kind = NominalKind::AicardiPolar;
  g.k_rho = k_rho;
  g.k_alpha = k_alpha;
  g.k_beta = k_beta;
  return g;
}

void NominalGains::validate() const {
  if (kind == NominalKind::PD) {
    if (!(k_p > 0.0) || !(k_d > 0.0)) throw std::invalid_argument("PD gains must be positive");
  } else {
    if (!(k_rho > 0.0)) throw std::invalid_argument("k_rho must be positive");
    if (!(k_alpha > k_rho)) throw std::invalid_argument("k_alpha must exceed k_rho");
  }
}

double gamma_f(double gamma, double s) { return s >= 0.0 ? gamma * s : s; }

namespace {

// Builds the QP incrementally. Rows with a zero normal are resolved on the
// spot: dropped when vacuous (0 >= b with b <= 0), otherwise the whole program
// is marked infeasible.
class ProgramBuilder {
 public:
  ProgramBuilder(Eigen::MatrixXd Q, Eigen::VectorXd q) {
    problem_.Q = std::move(Q);
    problem_.q = std::move(q);
  }

  void add(AffineConstraintRow row) {
    if (row.a.isZero(0.0) && row.label != RowLabel::Clf) {
      if (row.b > 0.0) contradiction_ = true;
      return;
    }
    problem_.rows.push_back(std::move(row));
  }

  void drop_label(RowLabel label) {
    std::erase_if(problem_.rows, [label](const AffineConstraintRow& r) { return r.label == label; });
  }

  bool has_label(RowLabel label) const {
    for (const auto& r : problem_.rows) {
      if (r.label == label) return true;
    }
    return false;
  }

  const QpProblem& problem() const { return problem_; }

  QpSolution solve() const {
    if (contradiction_) {
      QpSolution s;
      s.status = QpStatus::Infeasible;
      s.z = Eigen::VectorXd::Zero(problem_.dim());
      s.multipliers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem_.rows.size()));
      return s;
    }
    return solve_qp(problem_);
  }

 private:
  QpProblem problem_;
  bool contradiction_ = false;
};

ControlResult to_result(const ProgramBuilder& builder, const QpSolution& sol) {
  ControlResult out;
  out.status = sol.status;
  if (sol.status == QpStatus::Optimal) {
    out.u = sol.z.head<2>();
    for (int i : sol.active_set) {
      out.active_labels.push_back(builder.problem().rows[static_cast<std::size_t>(i)].label);
    }
  }
  return out;
}

// Extends a row in u to the decision vector (u, delta).
AffineConstraintRow with_delta(const AffineConstraintRow& row, double delta_coeff = 0.0) {
  AffineConstraintRow out = row;
  out.a = Eigen::Vector3d(row.a(0), row.a(1), delta_coeff);
  return out;
}

ControlResult solve_clf_program(const ClfSpec& clf, const BarrierSpec& barrier,
                                const AuxiliarySpec* aux, double t, const Vec2& x) {
  clf.validate();
  // The auxiliary row needs a bearing; reject x = c(t) up front.
  polar_frame(x, barrier.obstacle.center(t));

  const Vec2 e = x - clf.goal;
  const Eigen::Vector3d cost_diag(1.0, 1.0, clf.m);
  ProgramBuilder builder(cost_diag.asDiagonal().toDenseMatrix(), Eigen::Vector3d::Zero());

  // gamma_f(LfV + alpha) + LgV u - delta <= 0, with LfV = 0 for xdot = u.
  AffineConstraintRow clf_row;
  clf_row.a = Eigen::Vector3d(-e(0), -e(1), 1.0);
  clf_row.b = gamma_f(clf.gamma, clf.c_v * e.squaredNorm());
  clf_row.label = RowLabel::Clf;
  builder.add(clf_row);
  builder.add(with_delta(cbf_row_single_integrator(barrier, t, x)));
  if (aux != nullptr) builder.add(with_delta(aux_row_position_angle(*aux, barrier, t, x)));

  const QpSolution sol = builder.solve();
  ControlResult out = to_result(builder, sol);
  if (sol.status == QpStatus::Optimal) out.delta = sol.z(2);
  return out;
}

ControlResult solve_min_deviation(const Vec2& nominal, ProgramBuilder builder,
                                  bool drop_aux_on_conflict) {
  QpSolution sol = builder.solve();
  bool dropped = false;
  if (sol.status == QpStatus::Infeasible && drop_aux_on_conflict &&
      builder.has_label(RowLabel::Aux)) {
    builder.drop_label(RowLabel::Aux);
    sol = builder.solve();
    dropped = true;
  }
  ControlResult out = to_result(builder, sol);
  out.aux_dropped = dropped;
  if (sol.status == QpStatus::Infeasible) out.u = nominal;
  return out;
}

ProgramBuilder min_deviation_builder(const Vec2& nominal) {
  return ProgramBuilder(Eigen::Matrix2d::Identity(), -nominal);
}

}  // namespace

ControlResult clf_cbf_aux_qp(const ClfSpec& clf, const BarrierSpec& barrier,
                             const AuxiliarySpec& aux, double t, const Vec2& x) {
  return solve_clf_program(clf, barrier, &aux, t, x);
}

ControlResult clf_cbf_qp_baseline(const ClfSpec& clf, const BarrierSpec& barrier, double t,
                                  const Vec2& x) {
  return solve_clf_program(clf, barrier, nullptr, t, x);
}

Vec2 nominal_pd(const NominalGains& gains, const Vec2& x, const Vec2& v, const Vec2& goal) {
  return -gains.k_p * (x - goal) - gains.k_d * v;
}

ControlResult double_integrator_safety_filter(const Vec2& u_nom, const HocbfSpec& hocbf,
                                              const AuxiliarySpec* aux, double t,
                                              const Vec2& x, const Vec2& v) {
  ProgramBuilder builder = min_deviation_builder(u_nom);
  builder.add(hocbf_rows(hocbf, t, x, v).row);
  if (aux != nullptr && v.norm() >= kDegenerateRadius) {
    builder.add(aux_row_velocity_heading(*aux, hocbf.base, t, x, v));
  }
  return solve_min_deviation(u_nom, std::move(builder), true);
}

ControlResult double_integrator_filter(const NominalGains& nominal, const HocbfSpec& hocbf,
                                       const AuxiliarySpec* aux, double t, const Vec2& x,
                                       const Vec2& v, const Vec2& goal) {
  return double_integrator_safety_filter(nominal_pd(nominal, x, v, goal), hocbf, aux, t, x, v);
}

Vec2 nominal_computed_torque(const NominalGains& gains, const MechanicalModel& model,
                             const Vec2& q, const Vec2& qd, const Vec2& goal) {
  const Vec2 accel = nominal_pd(gains, q, qd, goal);
  return model.mass_matrix(q) * accel + model.coriolis(q, qd) * qd + model.gravity(q);
}

ControlResult mechanical_safety_filter(const Vec2& u_nom, const MechanicalModel& model,
                                       const HocbfSpec& hocbf, const AuxiliarySpec* aux,
                                       double t, const Vec2& q, const Vec2& qd) {
  ProgramBuilder builder = min_deviation_builder(u_nom);
  const MechanicalBarrierRow mech = mechanical_rows(model, hocbf, t, q, qd);
  AffineConstraintRow cbf;
  cbf.a = mech.a_h;
  cbf.b = mech.beta_h;
  cbf.label = RowLabel::Cbf;
  builder.add(cbf);
  if (aux != nullptr && qd.norm() >= kDegenerateRadius) {
    builder.add(aux_row_velocity_heading(*aux, hocbf.base, model, t, q, qd));
  }
  return solve_min_deviation(u_nom, std::move(builder), true);
}

Vec2 nominal_aicardi(const NominalGains& gains, const Pose& pose, const Vec2& goal) {
  const Vec2 to_goal = goal - pose.p;
  const double rho = to_goal.norm();
  if (rho < 1e-9) return Vec2::Zero();
  const double phi = std::atan2(to_goal.y(), to_goal.x());
  const double alpha = wrap_angle(phi - pose.theta);
  const double beta = wrap_angle(-phi);
  // sin(a) cos(a) / a, analytic limit 1 at a = 0
  const double sinc2 =
      std::abs(alpha) < 1e-8 ? 1.0 : std::sin(alpha) * std::cos(alpha) / alpha;
  const double v = gains.k_rho * rho * std::cos(alpha);
  const double omega = gains.k_alpha * alpha + gains.k_rho * sinc2 * (alpha + gains.k_beta * beta);
  return Vec2(v, omega);
}

ControlResult unicycle_safety_filter(const Vec2& nominal, const BarrierSpec& barrier,
                                     const AuxiliarySpec* aux, double t, const Pose& pose) {
  const Vec2 c = barrier.obstacle.center(t);
  const Vec2 d = pose.p - c;
  const double h = eval_h(barrier, t, pose.p);
  const double b = d.x() * std::cos(pose.theta) + d.y() * std::sin(pose.theta);

  ProgramBuilder builder = min_deviation_builder(nominal);
  // hdot = 2 b v - 2 d^T c_dot >= -alpha_h(h)
  AffineConstraintRow cbf;
  cbf.a = Vec2(2.0 * b, 0.0);
  cbf.b = -barrier.alpha_h(h) + 2.0 * d.dot(barrier.obstacle.velocity);
  cbf.label = RowLabel::Cbf;
  builder.add(cbf);
  // A zero gate switches the auxiliary constraint off entirely, recovering
  // the baseline filter exactly.
  if (aux != nullptr && aux->h_gate_value(h) > 0.0) {
    builder.add(aux_row_relative_heading(*aux, barrier, t, pose));
  }
  return solve_min_deviation(nominal, std::move(builder), false);
}

ControlResult unicycle_filter_baseline(const NominalGains& nominal, const BarrierSpec& barrier,
                                       double t, const Pose& pose, const Vec2& goal) {
  return unicycle_safety_filter(nominal_aicardi(nominal, pose, goal), barrier, nullptr, t, pose);
}

ControlResult unicycle_filter_proposed(const NominalGains& nominal, const BarrierSpec& barrier,
                                       const AuxiliarySpec& aux, double t, const Pose& pose,
                                       const Vec2& goal) {
  polar_frame(pose.p, barrier.obstacle.center(t));
  return unicycle_safety_filter(nominal_aicardi(nominal, pose, goal), barrier, &aux, t, pose);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double w_or_nan(const AuxiliarySpec& aux, const BarrierSpec& barrier, double t,
                const StateVec& state) {
  try {
    return eval_w(aux, barrier, t, state);
  } catch (const DegenerateGeometryError&) {
    return kNaN;
  }
}

double rate_or_zero(const AuxiliarySpec& aux, const BarrierSpec& barrier, double t,
                    const StateVec& state, const Vec2& input) {
  try {
    return w_rate(aux, barrier, t, state, input);
  } catch (const DegenerateGeometryError&) {
    return 0.0;
  }
}

}  // namespace

ControlResult SingleIntegratorLaw::control(double t, const StateVec& state) const {
  const Vec2 x = state.head<2>();
  return enforce_aux_ ? clf_cbf_aux_qp(clf_, barrier_, aux_, t, x)
                      : clf_cbf_qp_baseline(clf_, barrier_, t, x);
}

Observation SingleIntegratorLaw::observe(double t, const StateVec& state,
                                         const Vec2& input) const {
  Observation o;
  o.h = eval_h(barrier_, t, state.head<2>());
  o.w = w_or_nan(aux_, barrier_, t, state);
  o.w_rate = rate_or_zero(aux_, barrier_, t, state, input);
  o.gate = aux_.h_gate_value(o.h);
  return o;
}

ControlResult SecondOrderLaw::control(double t, const StateVec& state) const {
  const Vec2 x = state.head<2>();
  const Vec2 v = state.segment<2>(2);
  const AuxiliarySpec* aux = auxiliary();
  if (mechanical_) {
    const Vec2 u_nom = nominal_computed_torque(nominal_, *mechanical_, x, v, goal_);
    return mechanical_safety_filter(u_nom, *mechanical_, hocbf_, aux, t, x, v);
  }
  return double_integrator_filter(nominal_, hocbf_, aux, t, x, v, goal_);
}

Observation SecondOrderLaw::observe(double t, const StateVec& state, const Vec2& input) const {
  const Vec2 x = state.head<2>();
  const Vec2 v = state.segment<2>(2);
  const Vec2 accel = mechanical_ ? mechanical_->acceleration(x, v, input) : input;
  Observation o;
  o.h = eval_h(hocbf_.base, t, x);
  o.h1 = hocbf_rows(hocbf_, t, x, v).h1;
  o.w = w_or_nan(aux_, hocbf_.base, t, state);
  o.w_rate = rate_or_zero(aux_, hocbf_.base, t, state, accel);
  o.speed_gate = aux_.speed_gate(v.norm());
  o.gate = aux_.h_gate_value(o.h) * o.speed_gate;
  return o;
}

ControlResult UnicycleLaw::control(double t, const StateVec& state) const {
  const Pose pose{state.head<2>(), state(2)};
  return unicycle_safety_filter(nominal_aicardi(nominal_, pose, goal_), barrier_, auxiliary(), t,
                                pose);
}

Observation UnicycleLaw::observe(double t, const StateVec& state, const Vec2& input) const {
  Observation o;
  o.h = eval_h(barrier_, t, state.head<2>());
  o.w = w_or_nan(aux_, barrier_, t, state);
  o.w_rate = rate_or_zero(aux_, barrier_, t, state, input);
  o.gate = aux_.h_gate_value(o.h);
  return o;
}

}  // namespace cbfaux
