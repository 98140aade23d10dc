#include <doctest.h>

#include <numbers>
#include <random>

#include "cbfaux/controller.hpp"
#include "oracles.hpp"

using namespace cbfaux;
using std::numbers::pi;

namespace {

BarrierSpec reference_disk(Vec2 velocity = Vec2::Zero()) {
  return BarrierSpec{MovingDisk{Vec2(0.0, 3.0), velocity, 1.5}, LinearClassK{1.0}};
}

const AuxiliarySpec kPosAngle = AuxiliarySpec::position_angle(0.8, 0.12);

AffineConstraintRow make_row(Eigen::VectorXd a, double b) {
  AffineConstraintRow r;
  r.a = std::move(a);
  r.b = b;
  return r;
}

// CLF program for xdot = u written out from its definition, in (u1, u2, delta).
QpProblem single_integrator_program(const ClfSpec& clf, const Vec2& x, bool with_aux) {
  const Vec2 c(0.0, 3.0);
  const Vec2 d = x - c;
  const double h = d.squaredNorm() - 2.25;
  QpProblem p;
  p.Q = Eigen::Vector3d(1.0, 1.0, clf.m).asDiagonal();
  p.q = Eigen::Vector3d::Zero();
  // -x^T u + delta >= gamma_f(c_v |x|^2)
  const double s = clf.c_v * x.squaredNorm();
  p.rows.push_back(make_row(Eigen::Vector3d(-x.x(), -x.y(), 1.0), s >= 0 ? clf.gamma * s : s));
  // 2 d^T u >= -h
  p.rows.push_back(make_row(Eigen::Vector3d(2 * d.x(), 2 * d.y(), 0.0), -h));
  if (with_aux) {
    // (e_theta / r)^T u >= eta sigma(h)
    const Vec2 g = Vec2(-d.y(), d.x()) / d.squaredNorm();
    const double sigma = 1.0 / (1.0 + std::pow(std::max(h, 0.0) / 0.12, 2));
    p.rows.push_back(make_row(Eigen::Vector3d(g.x(), g.y(), 0.0), 0.8 * sigma));
  }
  return p;
}

Vec2 aicardi_reference(const NominalGains& g, const Pose& pose, const Vec2& goal) {
  const Vec2 e = goal - pose.p;
  const double rho = e.norm();
  if (rho < 1e-9) return Vec2::Zero();
  const double phi = std::atan2(e.y(), e.x());
  const double alpha = std::remainder(phi - pose.theta, 2 * pi);
  const double beta = std::remainder(-phi, 2 * pi);
  const double sinc2 = std::abs(alpha) < 1e-12 ? 1.0 : std::sin(alpha) * std::cos(alpha) / alpha;
  return Vec2(g.k_rho * rho * std::cos(alpha),
              g.k_alpha * alpha + g.k_rho * sinc2 * (alpha + g.k_beta * beta));
}

}  // namespace

TEST_SUITE("controller") {
  TEST_CASE("gamma_f") {
    CHECK(gamma_f(2.0, 3.0) == 6.0);
    CHECK(gamma_f(2.0, -3.0) == -3.0);
    for (double s : {-2.0, 0.0, 0.7}) CHECK(gamma_f(1.0, s) == s);
  }

  TEST_CASE("parameter validation") {
    ClfSpec clf;
    clf.gamma = 0.5;
    CHECK_THROWS_AS(clf.validate(), std::invalid_argument);
    clf = ClfSpec{};
    clf.m = 0.5;
    CHECK_THROWS_AS(clf.validate(), std::invalid_argument);
    CHECK_THROWS_AS(NominalGains::aicardi(0.8, 0.5, -0.6).validate(), std::invalid_argument);
    CHECK_THROWS_AS(NominalGains::pd(-1.0, 1.0).validate(), std::invalid_argument);
    CHECK_NOTHROW(NominalGains::aicardi(0.8, 2.5, -0.6).validate());
  }

  TEST_CASE("proposed single-integrator controller far from the obstacle") {
    const ClfSpec clf;
    const Vec2 x(0.0, 6.0);
    const ControlResult r = clf_cbf_aux_qp(clf, reference_disk(), kPosAngle, 0.0, x);
    REQUIRE(r.status == QpStatus::Optimal);
    const oracle::DualResult o =
        oracle::dual_projected_gradient(single_integrator_program(clf, x, true));
    REQUIRE(o.feasible);
    CHECK((r.u - o.z.head<2>()).norm() <= 1e-6);
    REQUIRE(r.delta.has_value());
    CHECK(std::abs(*r.delta - o.z(2)) <= 1e-6);
    const double angle = std::acos(r.u.dot(-x) / (r.u.norm() * x.norm()));
    CHECK(angle < 0.1);
  }

  TEST_CASE("proposed controller on the boundary satisfies the polar inequalities") {
    const Vec2 x(1.5, 3.0);
    const ControlResult r = clf_cbf_aux_qp(ClfSpec{}, reference_disk(), kPosAngle, 0.0, x);
    REQUIRE(r.status == QpStatus::Optimal);
    const PolarFrame f = polar_frame(x, Vec2(0.0, 3.0));
    CHECK(r.u.dot(f.e_theta) >= 1.2 - 1e-9);
    CHECK(r.u.dot(f.e_r) >= -1e-9);
  }

  TEST_CASE("top of the obstacle: baseline equilibrium, proposed tangential motion") {
    const Vec2 x(0.0, 4.5);
    const ControlResult base = clf_cbf_qp_baseline(ClfSpec{}, reference_disk(), 0.0, x);
    REQUIRE(base.status == QpStatus::Optimal);
    CHECK(base.u.norm() <= 1e-12);
    REQUIRE(base.delta.has_value());
    CHECK(*base.delta > 0.0);
    const oracle::DualResult o =
        oracle::dual_projected_gradient(single_integrator_program(ClfSpec{}, x, false));
    CHECK(o.z.head<2>().norm() <= 1e-6);

    const ControlResult prop = clf_cbf_aux_qp(ClfSpec{}, reference_disk(), kPosAngle, 0.0, x);
    REQUIRE(prop.status == QpStatus::Optimal);
    const PolarFrame f = polar_frame(x, Vec2(0.0, 3.0));
    const double u_theta = prop.u.dot(f.e_theta);
    CHECK(u_theta >= 1.2 - 1e-9);
    CHECK(std::abs(u_theta) >= 1.2 / (2.0 * 1.5));
  }

  TEST_CASE("baseline moves away from the collinear set") {
    for (const Vec2& x : {Vec2(3.0, 3.0), Vec2(1.5, 3.0), Vec2(-1.5, 3.0)}) {
      const ControlResult r = clf_cbf_qp_baseline(ClfSpec{}, reference_disk(), 0.0, x);
      REQUIRE(r.status == QpStatus::Optimal);
      CHECK(r.u.norm() > 0.1);
    }
  }

  TEST_CASE("controllers agree where the gated row is inactive") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    const BarrierSpec b = reference_disk();
    int inactive = 0;
    for (int i = 0; i < 2000 && inactive < 100; ++i) {
      const Vec2 x(u(rng), u(rng));
      if (eval_h(b, 0.0, x) <= 3.0) continue;
      const ControlResult base = clf_cbf_qp_baseline(ClfSpec{}, b, 0.0, x);
      const AffineConstraintRow aux = aux_row_position_angle(kPosAngle, b, 0.0, x);
      if (aux.slack(base.u) < 0.0) continue;  // row would bind
      ++inactive;
      const ControlResult prop = clf_cbf_aux_qp(ClfSpec{}, b, kPosAngle, 0.0, x);
      CHECK((prop.u - base.u).norm() <= 1e-6);
    }
    CHECK(inactive == 100);
  }

  TEST_CASE("single-integrator controllers match the oracle at random states") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    const BarrierSpec b = reference_disk();
    for (int i = 0; i < 100; ++i) {
      const Vec2 x(u(rng), u(rng));
      if (eval_h(b, 0.0, x) < 0.0) continue;
      for (bool aux : {false, true}) {
        const ControlResult r = aux ? clf_cbf_aux_qp(ClfSpec{}, b, kPosAngle, 0.0, x)
                                    : clf_cbf_qp_baseline(ClfSpec{}, b, 0.0, x);
        const oracle::DualResult o =
            oracle::dual_projected_gradient(single_integrator_program(ClfSpec{}, x, aux));
        REQUIRE(r.status == QpStatus::Optimal);
        REQUIRE(o.feasible);
        CHECK((r.u - o.z.head<2>()).norm() <= 1e-5);
        CHECK(cbf_row_single_integrator(b, 0.0, x).slack(r.u) >= -1e-9);
      }
    }
  }

  TEST_CASE("double-integrator filter at rest far from the obstacle") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const AuxiliarySpec aux = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const Vec2 x(0.0, 0.0), v(1.0, 0.0);
    const ControlResult r = double_integrator_safety_filter(Vec2::Zero(), s, &aux, 0.0, x, v);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.u.norm() <= 1e-2);

    // Oracle program written out by hand: -6 u2 >= -8.75 and u2 >= rhs.
    const double rhs = 0.1 / (1.0 + std::pow(6.75 / 0.25, 2)) * (1.0 / (1.0 + 0.0025));
    QpProblem p;
    p.Q = Eigen::Matrix2d::Identity();
    p.q = Eigen::Vector2d::Zero();
    p.rows = {make_row(Eigen::Vector2d(0.0, -6.0), -8.75), make_row(Eigen::Vector2d(0.0, 1.0), rhs)};
    const oracle::DualResult o = oracle::dual_projected_gradient(p);
    CHECK((r.u - o.z).norm() <= 1e-9);
  }

  TEST_CASE("double-integrator filter near the boundary enforces the heading rate") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const AuxiliarySpec aux = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const Vec2 x(0.0, 1.4), v(0.05, 0.0);
    const ControlResult r =
        double_integrator_filter(NominalGains::pd(1.0, 2.0), s, &aux, 0.0, x, v);
    REQUIRE(r.status == QpStatus::Optimal);
    const double h = eval_h(s.base, 0.0, x);
    const double rhs = 0.1 / (1.0 + std::pow(h / 0.25, 2)) * 0.5;
    // (v1 u2 - v2 u1) / |v|^2 = 20 u2.
    CHECK(20.0 * r.u.y() - rhs >= -1e-9);
    CHECK(r.u.y() >= rhs / 20.0 - 1e-9);
    CHECK(hocbf_rows(s, 0.0, x, v).row.slack(r.u) >= -1e-9);
  }

  TEST_CASE("moving obstacle rows use the current center") {
    const HocbfSpec s{reference_disk(Vec2(0.0, 0.05)), 1.0, 1.0};
    const Vec2 x(0.5, 5.5), v(0.2, -0.3);
    const ControlResult r = double_integrator_filter(NominalGains::pd(1.0, 2.0), s, nullptr,
                                                     10.0, x, v);
    REQUIRE(r.status == QpStatus::Optimal);
    const Vec2 d = x - Vec2(0.0, 3.5), w = v - Vec2(0.0, 0.05);
    const double h = d.squaredNorm() - 2.25, hdot = 2 * d.dot(w), h1 = hdot + h;
    const double b = -h1 - 2 * w.squaredNorm() - hdot;
    CHECK(hocbf_rows(s, 10.0, x, v).h1 == doctest::Approx(h1).epsilon(1e-14));
    CHECK(2 * d.dot(r.u) - b >= -1e-9);
  }

  TEST_CASE("degenerate heading row is dropped and flagged") {
    // Tangential velocity on the boundary makes the two normals collinear and
    // the offsets contradictory at |v| = v_min.
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const AuxiliarySpec aux = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const Vec2 d(1.5, 0.0);
    const Vec2 x = Vec2(0.0, 3.0) + d;
    const Vec2 v = 0.05 * rotate90(d.normalized());
    const ControlResult r = double_integrator_safety_filter(Vec2::Zero(), s, &aux, 0.0, x, v);
    CHECK(r.status == QpStatus::Optimal);
    CHECK(r.aux_dropped);
    CHECK(hocbf_rows(s, 0.0, x, v).row.slack(r.u) >= -1e-9);
  }

  TEST_CASE("unicycle baseline filter") {
    const BarrierSpec b = reference_disk();
    const Vec2 nominal(0.7, -0.4);
    // b = 0: heading tangent to the circle at (1.5, 3).
    const ControlResult t = unicycle_safety_filter(nominal, b, nullptr, 0.0,
                                                   Pose{Vec2(1.5, 3.0), pi / 2});
    CHECK(t.u == nominal);
    // h = 0, b > 0: facing outwards, v >= 0.
    const ControlResult out = unicycle_safety_filter(Vec2(-1.0, 0.3), b, nullptr, 0.0,
                                                     Pose{Vec2(1.5, 3.0), 0.0});
    CHECK(out.u.x() >= -1e-12);
    CHECK(out.u.x() == doctest::Approx(0.0).scale(1.0));
    CHECK(out.u.y() == 0.3);
    // h = 0, b < 0: facing inwards, v <= 0.
    const ControlResult in = unicycle_safety_filter(Vec2(1.0, 0.3), b, nullptr, 0.0,
                                                    Pose{Vec2(1.5, 3.0), pi});
    CHECK(in.u.x() <= 1e-12);
    CHECK(in.u.y() == 0.3);
  }

  TEST_CASE("unicycle proposed filter at the bottom of the obstacle") {
    const BarrierSpec b = reference_disk();
    const AuxiliarySpec aux = AuxiliarySpec::relative_heading(0.5, 1.0, 0.5, 2);
    const Pose pose{Vec2(0.0, 1.5), 0.0};
    const ControlResult r = unicycle_safety_filter(Vec2::Zero(), b, &aux, 0.0, pose);
    REQUIRE(r.status == QpStatus::Optimal);
    const double cpsi = 1.0 / (1.0 + pi * pi / 4.0);
    CHECK(-cpsi / 1.5 * r.u.x() + cpsi * r.u.y() >= 0.5 - 1e-9);
    // b = (x - c1) cos(theta) + (y - c2) sin(theta) = 0 here.
    CHECK(0.0 * r.u.x() >= -1e-12);

    QpProblem p;
    p.Q = Eigen::Matrix2d::Identity();
    p.q = Eigen::Vector2d::Zero();
    p.rows = {make_row(Eigen::Vector2d(-cpsi / 1.5, cpsi), 0.5)};
    const QpSolution ref = solve_qp(p);
    const oracle::DualResult o = oracle::dual_projected_gradient(p);
    CHECK((r.u - o.z).norm() <= 1e-9);
    QpSolution mine = ref;
    mine.z = r.u;
    CHECK(check_kkt(p, mine) <= 1e-8);
  }

  TEST_CASE("unicycle aux row off beyond the gate support") {
    const BarrierSpec b = reference_disk();
    const AuxiliarySpec aux = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    const NominalGains g = NominalGains::aicardi(0.8, 2.5, -0.6);
    // h = 2 d_gate = 1: r^2 = 3.25.
    const double r = std::sqrt(3.25);
    for (int k = 0; k < 36; ++k) {
      const double a = 2 * pi * k / 36.0;
      const Pose pose{Vec2(0.0, 3.0) + r * Vec2(std::cos(a), std::sin(a)), 0.3 * k};
      const ControlResult p = unicycle_filter_proposed(g, b, aux, 0.0, pose);
      const ControlResult q = unicycle_filter_baseline(g, b, 0.0, pose);
      CHECK((p.u - q.u).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }

  TEST_CASE("unicycle heading floor when aligned with the bearing") {
    const BarrierSpec b = reference_disk();
    const AuxiliarySpec aux = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    const ControlResult r = unicycle_filter_proposed(NominalGains::aicardi(0.8, 2.5, -0.6), b,
                                                     aux, 0.0, Pose{Vec2(1.5, 3.0), 0.0});
    CHECK(r.u.y() >= 0.5 / 2.0 - 1e-9);
  }

  TEST_CASE("unicycle proposed filter is always feasible") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-5.0, 5.0), th(-pi, pi);
    const BarrierSpec b = reference_disk();
    const AuxiliarySpec aux = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    for (int i = 0; i < 2000; ++i) {
      const Pose pose{Vec2(u(rng), u(rng)), th(rng)};
      if (eval_h(b, 0.0, pose.p) < 0.0) continue;
      const ControlResult r =
          unicycle_filter_proposed(NominalGains::aicardi(0.8, 2.5, -0.6), b, aux, 0.0, pose);
      CHECK(r.status == QpStatus::Optimal);
    }
  }

  TEST_CASE("Aicardi nominal law") {
    const NominalGains g = NominalGains::aicardi(0.8, 2.5, -0.6);
    CHECK(nominal_aicardi(g, Pose{Vec2::Zero(), 0.4}, Vec2::Zero()) == Vec2::Zero());
    const Pose p{Vec2(0.0, -1.0), pi / 2};
    const Vec2 ref = aicardi_reference(g, p, Vec2::Zero());
    const Vec2 got = nominal_aicardi(g, p, Vec2::Zero());
    CHECK(got.x() == doctest::Approx(0.8));
    CHECK(got.x() == doctest::Approx(ref.x()).epsilon(1e-14));
    CHECK(got.y() == doctest::Approx(ref.y()).epsilon(1e-14));
    // alpha = pi/2: goal to the left of the heading.
    const Vec2 side = nominal_aicardi(g, Pose{Vec2(1.0, 0.0), -pi / 2}, Vec2::Zero());
    CHECK(std::abs(side.x()) <= 1e-15);

    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-5.0, 5.0), th(-pi, pi);
    for (int i = 0; i < 200; ++i) {
      const Pose q{Vec2(u(rng), u(rng)), th(rng)};
      const Vec2 a = nominal_aicardi(g, q, Vec2(0.3, -0.2));
      const Vec2 e = aicardi_reference(g, q, Vec2(0.3, -0.2));
      CHECK((a - e).norm() <= 1e-12 * std::max(1.0, e.norm()));
    }
  }

  TEST_CASE("feedback laws are deterministic") {
    const SingleIntegratorLaw law(ClfSpec{}, reference_disk(), kPosAngle, true);
    StateVec x(2);
    x << 0.3, 4.4;
    const ControlResult a = law.control(0.0, x), b = law.control(0.0, x);
    CHECK(a.u == b.u);
    CHECK(a.delta == b.delta);
  }
}
