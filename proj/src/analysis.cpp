#include "cbfaux/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cbfaux {

std::vector<ResidenceInterval> residence_intervals(const Trajectory& traj,
                                                   const BoundaryLayer& layer) {
  std::vector<ResidenceInterval> out;
  bool inside = false;
  for (const auto& s : traj.samples) {
    const bool in = in_boundary_layer(s.h, layer);
    if (in && !inside) out.push_back({s.t, s.t});
    if (in) out.back().t_exit = s.t + traj.dt;
    inside = in;
  }
  return out;
}

ResidenceReport check_residence_bound(const Trajectory& traj, const AuxiliarySpec* aux,
                                      const BoundaryLayer& layer) {
  ResidenceReport rep;
  rep.rho = layer.rho;
  rep.intervals = residence_intervals(traj, layer);
  for (const auto& iv : rep.intervals) {
    rep.max_residence = std::max(rep.max_residence, iv.length());
    rep.total_occupancy += iv.length();
  }
  rep.final_interval_open = !traj.samples.empty() && in_boundary_layer(traj.samples.back().h, layer);
  if (aux == nullptr) return rep;

  const EffectiveEta eta = effective_eta(*aux, layer);
  rep.applicable = true;
  rep.eta_rho = eta.value;
  rep.bound = 2.0 * aux->w_bound / eta.value;
  rep.bound_satisfied = rep.max_residence <= *rep.bound;
  rep.conditional = eta.conditional;

  for (const auto& s : traj.samples) {
    if (!in_boundary_layer(s.h, layer) || !s.aux_enforced) continue;
    const double margin = s.w_rate - aux->eta * s.gate;
    rep.realized_min_w_rate_in_layer =
        std::min(rep.realized_min_w_rate_in_layer.value_or(s.w_rate), s.w_rate);
    rep.min_floor_margin_in_layer = std::min(rep.min_floor_margin_in_layer.value_or(margin), margin);
    if (aux->kind == AuxKind::VelocityHeading) {
      rep.realized_min_speed_gate_in_layer =
          std::min(rep.realized_min_speed_gate_in_layer.value_or(s.speed_gate), s.speed_gate);
    }
  }
  return rep;
}

StateBoundBox StateBoundBox::uniform(int dim, double lo, double hi) {
  return {StateVec::Constant(dim, lo), StateVec::Constant(dim, hi)};
}

void StateBoundBox::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("bound box corners must have equal, nonzero size");
  }
  if (!(lower.array() < upper.array()).all()) {
    throw std::invalid_argument("bound box requires lower < upper componentwise");
  }
}

ContainmentResult check_compact_containment(const Trajectory& traj, const StateBoundBox& box) {
  if (traj.samples.empty()) throw std::invalid_argument("empty trajectory");
  box.validate();
  ContainmentResult res;
  for (const auto& s : traj.samples) {
    if (s.state.size() != box.lower.size()) {
      throw std::invalid_argument("bound box dimension does not match the state");
    }
    const bool in = (s.state.array() >= box.lower.array()).all() &&
                    (s.state.array() <= box.upper.array()).all();
    if (!in) {
      res.contained = false;
      res.first_exit_time = s.t;
      break;
    }
  }
  return res;
}

RowBuilders RowBuilders::with_fault(std::string_view fault) {
  RowBuilders rb;
  if (fault == "cbf_sign") {
    rb.cbf_single = [](const BarrierSpec& b, double t, const Vec2& x) {
      auto row = cbf_row_single_integrator(b, t, x);
      row.a = -row.a;
      return row;
    };
  } else if (fault == "aux_sign") {
    rb.aux_position_angle = [](const AuxiliarySpec& s, const BarrierSpec& b, double t,
                               const Vec2& x) {
      auto row = aux_row_position_angle(s, b, t, x);
      row.a = -row.a;
      return row;
    };
  } else if (fault == "hocbf_drift") {
    rb.hocbf = [](const HocbfSpec& s, double t, const Vec2& x, const Vec2& v) {
      auto r = hocbf_rows(s, t, x, v);
      const Vec2 w = v - s.base.obstacle.velocity;
      r.row.b += 4.0 * w.squaredNorm();
      return r;
    };
  } else if (fault == "heading_sign") {
    rb.aux_velocity_heading = [](const AuxiliarySpec& s, const BarrierSpec& b, double t,
                                 const Vec2& x, const Vec2& v) {
      auto row = aux_row_velocity_heading(s, b, t, x, v);
      row.a = -row.a;
      return row;
    };
  } else {
    throw std::invalid_argument("unknown fault '" + std::string(fault) + "'");
  }
  return rb;
}

bool FeasibilityReport::passed() const {
  return infeasible_points.size() == degenerate_points.size();
}

namespace {

QpProblem feasibility_problem(int dim) {
  QpProblem p;
  p.Q = Eigen::MatrixXd::Identity(dim, dim);
  p.q = Eigen::VectorXd::Zero(dim);
  return p;
}

}  // namespace

FeasibilityReport feasibility_grid_single(const BarrierSpec& barrier, const AuxiliarySpec& aux,
                                          const PlanarGrid& grid, const RowBuilders& rows) {
  if (grid.n < 2 || !(grid.hi > grid.lo)) throw std::invalid_argument("bad grid");
  FeasibilityReport rep;
  const Vec2 c = barrier.obstacle.center(0.0);
  const double step = (grid.hi - grid.lo) / (grid.n - 1);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      const Vec2 x(grid.lo + i * step, grid.lo + j * step);
      ++rep.grid_size;
      if ((x - c).norm() < grid.exclusion_radius) {
        rep.excluded_points.push_back(x);
        continue;
      }
      QpProblem p = feasibility_problem(2);
      p.rows.push_back(rows.cbf_single(barrier, 0.0, x));
      p.rows.push_back(rows.aux_position_angle(aux, barrier, 0.0, x));
      const QpSolution sol = solve_qp(p);
      if (sol.status == QpStatus::Infeasible) {
        rep.infeasible_points.push_back(x);
      } else {
        rep.max_kkt_residual = std::max(rep.max_kkt_residual, check_kkt(p, sol));
      }
    }
  }
  return rep;
}

std::vector<PhaseSample> sample_phase_points(std::size_t n, std::uint64_t seed, double lo,
                                             double hi, double v_max, double v_floor) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(lo, hi);
  std::uniform_real_distribution<double> vel(-v_max, v_max);
  std::vector<PhaseSample> out;
  out.reserve(n);
  while (out.size() < n) {
    PhaseSample s;
    s.x = Vec2(pos(rng), pos(rng));
    s.v = Vec2(vel(rng), vel(rng));
    if (s.v.norm() >= v_floor) out.push_back(s);
  }
  return out;
}

double collinearity_measure(const Vec2& d, const Vec2& v) {
  return std::abs(cross(d, rotate90(v))) / (d.norm() * v.norm());
}

FeasibilityReport feasibility_grid_double(const HocbfSpec& hocbf, const AuxiliarySpec& aux,
                                          const std::vector<PhaseSample>& samples,
                                          const RowBuilders& rows) {
  FeasibilityReport rep;
  const Vec2 c = hocbf.base.obstacle.center(0.0);
  for (const auto& s : samples) {
    if (s.v.norm() < 0.01) throw std::invalid_argument("sample speed below 0.01");
    ++rep.grid_size;
    StateVec point(4);
    point << s.x, s.v;
    if ((s.x - c).norm() < kDegenerateRadius) {
      rep.excluded_points.push_back(point);
      continue;
    }
    QpProblem p = feasibility_problem(2);
    p.rows.push_back(rows.hocbf(hocbf, 0.0, s.x, s.v).row);
    p.rows.push_back(rows.aux_velocity_heading(aux, hocbf.base, 0.0, s.x, s.v));
    const QpSolution sol = solve_qp(p);
    if (sol.status == QpStatus::Infeasible) {
      rep.infeasible_points.push_back(point);
      if (collinearity_measure(s.x - c, s.v) < kCollinearityTol) {
        rep.degenerate_points.push_back(point);
      }
    } else {
      rep.max_kkt_residual = std::max(rep.max_kkt_residual, check_kkt(p, sol));
    }
  }
  return rep;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RingGeometry {
  const SystemModel& model;
  Vec2 c;
  double radius_sq;
};

StateVec ring_state(const RingGeometry& g, double h, double phi, double theta) {
  const Vec2 p = g.c + std::sqrt(g.radius_sq + h) * Vec2(std::cos(phi), std::sin(phi));
  StateVec s = StateVec::Zero(g.model.state_dim());
  s.head<2>() = p;
  if (g.model.kind == SystemKind::Unicycle) s(2) = theta;
  return s;
}

double field_norm(const FeedbackLaw& law, const SystemModel& model, double t,
                  const StateVec& s) {
  try {
    const ControlResult cr = law.control(t, s);
    if (cr.status != QpStatus::Optimal) return kInf;
    return dynamics(model, t, s, cr.u).norm();
  } catch (const std::exception&) {
    return kInf;
  }
}

template <class F>
double golden_section(F&& f, double lo, double hi, double& best_val, int iters = 80) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters && b - a > 1e-13; ++k) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  const double x = f1 <= f2 ? x1 : x2;
  best_val = std::min(f1, f2);
  return x;
}

bool is_duplicate(const std::vector<StateVec>& found, const StateVec& s) {
  for (const auto& f : found) {
    StateVec diff = f - s;
    if (diff.size() == 3) diff(2) = wrap_angle(diff(2));
    if (diff.norm() < 1e-3) return true;
  }
  return false;
}

}  // namespace

std::vector<StateVec> detect_boundary_equilibria(const FeedbackLaw& law,
                                                 const SystemModel& model,
                                                 const BarrierSpec& barrier,
                                                 const RingSampler& ring, double tol, double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  const RingGeometry geo{model, barrier.obstacle.center(t),
                         barrier.obstacle.radius * barrier.obstacle.radius};
  const bool uni = model.kind == SystemKind::Unicycle;
  const int na = ring.n_angles;
  const int nt = uni ? ring.n_headings : 1;
  if (na < 3 || nt < 1) throw std::invalid_argument("ring sampler too coarse");
  const double da = two_pi / na;
  const double dth = uni ? two_pi / nt : 0.0;

  std::vector<StateVec> found;
  for (double h : ring.h_values) {
    if (h < 0.0) throw std::invalid_argument("ring sampler h values must be nonnegative");
    auto value = [&](double phi, double theta) {
      return field_norm(law, model, t, ring_state(geo, h, phi, theta));
    };
    std::vector<double> grid(static_cast<std::size_t>(na) * nt);
    for (int i = 0; i < na; ++i) {
      for (int j = 0; j < nt; ++j) grid[i * nt + j] = value(i * da, -std::numbers::pi + (j + 0.5) * dth);
    }
    auto at = [&](int i, int j) { return grid[((i + na) % na) * nt + ((j + nt) % nt)]; };

    for (int i = 0; i < na; ++i) {
      for (int j = 0; j < nt; ++j) {
        const double v0 = at(i, j);
        if (!std::isfinite(v0)) continue;
        bool local_min = v0 <= at(i - 1, j) && v0 < at(i + 1, j);
        if (uni) {
          for (int di = -1; di <= 1 && local_min; ++di) {
            for (int dj = -1; dj <= 1; ++dj) {
              if (di == 0 && dj == 0) continue;
              const double vn = at(i + di, j + dj);
              const bool later = di > 0 || (di == 0 && dj > 0);
              if (later ? !(v0 < vn) : !(v0 <= vn)) {
                local_min = false;
                break;
              }
            }
          }
        }
        if (!local_min) continue;

        double phi = i * da;
        double theta = -std::numbers::pi + (j + 0.5) * dth;
        double best = v0;
        double wa = da, wt = dth;
        // Alternating line searches; one pass suffices off the unicycle.
        for (int round = 0; round < (uni ? 40 : 1); ++round) {
          double val = best;
          phi = golden_section([&](double p) { return value(p, theta); }, phi - wa, phi + wa, val);
          best = std::min(best, val);
          if (uni) {
            theta = golden_section([&](double th) { return value(phi, th); }, theta - wt,
                                   theta + wt, val);
            best = std::min(best, val);
            wa *= 0.7;
            wt *= 0.7;
          }
          if (best <= tol * 1e-3) break;
        }
        best = value(phi, theta);
        if (best <= tol) {
          StateVec s = ring_state(geo, h, phi, wrap_angle(theta));
          if (!is_duplicate(found, s)) found.push_back(std::move(s));
        }
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const StateVec& a, const StateVec& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  });
  return found;
}

FdSpecs FdSpecs::defaults() {
  FdSpecs s;
  s.barrier.obstacle.center0 = Vec2(0.0, 3.0);
  s.barrier.obstacle.velocity = Vec2(0.0, 0.05);
  s.barrier.obstacle.radius = 1.5;
  s.barrier.alpha_h.gain = 1.0;
  s.hocbf = HocbfSpec{s.barrier, 1.0, 1.0};
  s.position_angle = AuxiliarySpec::position_angle(0.8, 0.12);
  s.velocity_heading = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
  s.relative_heading = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
  return s;
}

double fd_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / scale;
}

namespace {

// Configuration-dependent inertia with Coriolis terms derived from it, so the
// mechanical rows are checked away from the constant-mass reduction.
MechanicalModel fd_mechanical_model() {
  MechanicalModel m;
  m.mass_matrix = [](const Vec2& q) {
    Eigen::Matrix2d M;
    M << 2.0 + 0.5 * std::cos(q.y()), 0.3 + 0.2 * std::sin(q.x()),
        0.3 + 0.2 * std::sin(q.x()), 1.5;
    return M;
  };
  m.coriolis = [](const Vec2& q, const Vec2& qd) {
    Eigen::Matrix2d C;
    C << -0.25 * std::sin(q.y()) * qd.y(), 0.1 * std::cos(q.x()) * qd.x(),
        0.1 * std::cos(q.x()) * qd.x(), 0.05 * qd.x();
    return C;
  };
  m.gravity = [](const Vec2& q) { return Vec2(0.4 * std::cos(q.x()), -9.81 + 0.1 * q.y()); };
  return m;
}

struct Tracker {
  FdCheck check;
  explicit Tracker(std::string name) { check.name = std::move(name); }
  void add(double analytic, double numeric) {
    check.max_rel_error = std::max(check.max_rel_error, fd_relative_error(analytic, numeric));
  }
};

// Independent h1 along the double integrator, for the HOCBF check.
double h1_value(const BarrierSpec& b, double alpha1, double t, const Vec2& x, const Vec2& v) {
  const Vec2 d = x - b.obstacle.center(t);
  return 2.0 * d.dot(v - b.obstacle.velocity) + alpha1 * eval_h(b, t, x);
}

}  // namespace

FdReport gradient_fd_suite(const FdSpecs& specs, int n_samples, double step, std::uint64_t seed,
                           const RowBuilders& rows) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> vel(-2.0, 2.0);
  std::uniform_real_distribution<double> time(0.0, 10.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  const BarrierSpec& bar = specs.barrier;
  const MechanicalModel mech = fd_mechanical_model();
  const double s = step;

  Tracker grad("grad_h"), dt_part("dh_dt"), cbf("cbf_row"), hocbf("hocbf_row"),
      mech_row("mechanical_row"), pa("aux_position_angle"), vh("aux_velocity_heading"),
      vh_mech("aux_velocity_heading_mechanical"), rh("aux_relative_heading"), rates("w_rate");

  for (int k = 0; k < n_samples; ++k) {
    const double t = time(rng);
    const Vec2 c = bar.obstacle.center(t);
    Vec2 x;
    do {
      x = Vec2(pos(rng), pos(rng));
    } while ((x - c).norm() < 0.3);
    Vec2 v;
    do {
      v = Vec2(vel(rng), vel(rng));
    } while (v.norm() < 0.1);
    const Vec2 u(vel(rng), vel(rng));
    const double theta = ang(rng);

    // Barrier partials.
    const BarrierPartials bp = h_partials(bar, t, x);
    for (int i = 0; i < 2; ++i) {
      Vec2 e = Vec2::Zero();
      e(i) = s;
      grad.add(bp.grad_x(i), (eval_h(bar, t, x + e) - eval_h(bar, t, x - e)) / (2 * s));
    }
    dt_part.add(bp.dt_part, (eval_h(bar, t + s, x) - eval_h(bar, t - s, x)) / (2 * s));

    // Row slacks: a^T u - b equals (derivative) - (required rate).
    {
      const AffineConstraintRow row = rows.cbf_single(bar, t, x);
      const double hd = (eval_h(bar, t + s, x + s * u) - eval_h(bar, t - s, x - s * u)) / (2 * s);
      cbf.add(row.a.dot(u) - row.b, hd + bar.alpha_h(eval_h(bar, t, x)));
    }
    {
      const HocbfSpec& hs = specs.hocbf;
      const HocbfRow r = rows.hocbf(hs, t, x, v);
      const double h1 = h1_value(hs.base, hs.alpha1, t, x, v);
      const double h1d = (h1_value(hs.base, hs.alpha1, t + s, x + s * v, v + s * u) -
                          h1_value(hs.base, hs.alpha1, t - s, x - s * v, v - s * u)) /
                         (2 * s);
      hocbf.add(r.row.a.dot(u) - r.row.b, h1d + hs.alpha2 * h1);

      const MechanicalBarrierRow mr = mechanical_rows(mech, hs, t, x, v);
      const Vec2 acc = mech.acceleration(x, v, u);
      const double mh1d = (h1_value(hs.base, hs.alpha1, t + s, x + s * v, v + s * acc) -
                           h1_value(hs.base, hs.alpha1, t - s, x - s * v, v - s * acc)) /
                          (2 * s);
      mech_row.add(mr.a_h.dot(u) - mr.beta_h, mh1d + hs.alpha2 * h1);
    }
    {
      const AuxiliarySpec& aux = specs.position_angle;
      const AffineConstraintRow row = rows.aux_position_angle(aux, bar, t, x);
      const double wp = eval_w(aux, bar, t + s, x + s * u);
      const double wm = eval_w(aux, bar, t - s, x - s * u);
      const double wd = wrap_angle(wp - wm) / (2 * s);
      const double need = aux.eta * gate_rational(aux.gate, eval_h(bar, t, x));
      pa.add(row.a.dot(u) - row.b, wd - need);
      rates.add(w_rate(aux, bar, t, x, u), wd);
    }
    {
      const AuxiliarySpec& aux = specs.velocity_heading;
      StateVec st(4), f(4);
      st << x, v;
      f << v, u;
      const double wd =
          wrap_angle(eval_w(aux, bar, t + s, st + s * f) - eval_w(aux, bar, t - s, st - s * f)) /
          (2 * s);
      const double need = aux.eta * gate_rational(aux.gate, eval_h(bar, t, x)) *
                          gate_velocity(aux.speed_gate, v.norm());
      const AffineConstraintRow row = rows.aux_velocity_heading(aux, bar, t, x, v);
      vh.add(row.a.dot(u) - row.b, wd - need);
      rates.add(w_rate(aux, bar, t, st, u), wd);

      const Vec2 acc = mech.acceleration(x, v, u);
      StateVec fm(4);
      fm << v, acc;
      const double wdm =
          wrap_angle(eval_w(aux, bar, t + s, st + s * fm) - eval_w(aux, bar, t - s, st - s * fm)) /
          (2 * s);
      const AffineConstraintRow mrow = aux_row_velocity_heading(aux, bar, mech, t, x, v);
      vh_mech.add(mrow.a.dot(u) - mrow.b, wdm - need);
    }
    {
      const AuxiliarySpec& aux = specs.relative_heading;
      StateVec st(3), f(3);
      st << x, theta;
      const Vec2 in(v.x(), u.y());  // (speed, turn rate)
      f << in(0) * std::cos(theta), in(0) * std::sin(theta), in(1);
      const double wd = (eval_w(aux, bar, t + s, st + s * f) - eval_w(aux, bar, t - s, st - s * f)) /
                        (2 * s);
      const double h = eval_h(bar, t, x);
      const double need = aux.eta * (h < 0.0 ? 1.0 : gate_polynomial(aux.gate, h));
      const AffineConstraintRow row = rows.aux_relative_heading(aux, bar, t, Pose{x, theta});
      // W = arctan(k psi) is only continuous away from psi = pi.
      if (std::abs(relative_heading(c, Pose{x, theta})) < std::numbers::pi - 1e-3) {
        rh.add(row.a.dot(in) - row.b, wd - need);
        rates.add(w_rate(aux, bar, t, st, in), wd);
      }
    }
  }

  FdReport rep;
  for (Tracker* tr : {&grad, &dt_part, &cbf, &hocbf, &mech_row, &pa, &vh, &vh_mech, &rh, &rates}) {
    rep.checks.push_back(tr->check);
    rep.max_rel_error = std::max(rep.max_rel_error, tr->check.max_rel_error);
  }
  return rep;
}

}  // namespace cbfaux
