#include <doctest.h>

#include <numbers>
#include <random>

#include "cbfaux/auxiliary.hpp"
#include "oracles.hpp"

using namespace cbfaux;
using std::numbers::pi;

namespace {

BarrierSpec reference_disk(Vec2 velocity = Vec2::Zero()) {
  return BarrierSpec{MovingDisk{Vec2(0.0, 3.0), velocity, 1.5}, LinearClassK{1.0}};
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_SUITE("auxiliary") {
  TEST_CASE("rational gate") {
    const GateSpec g = GateSpec::rational(0.12);
    CHECK(gate_rational(g, 0.0) == 1.0);
    CHECK(gate_rational(g, 0.12) == 0.5);
    CHECK(gate_rational(g, -1.0) == 1.0);
    // 1 / (1 + (100 / 0.12)^2)
    CHECK(gate_rational(g, 100.0) == doctest::Approx(1.0 / (1.0 + 694444.444444444)));
  }

  TEST_CASE("velocity gate") {
    const GateSpec g = GateSpec::velocity(0.05);
    CHECK(gate_velocity(g, 0.0) == 0.0);
    CHECK(gate_velocity(g, 0.05) == 0.5);
    CHECK(gate_velocity(g, 1e6) < 1.0);
  }

  TEST_CASE("polynomial gate") {
    const GateSpec g = GateSpec::polynomial(0.5, 2);
    CHECK(gate_polynomial(g, 0.0) == 1.0);
    CHECK(gate_polynomial(g, 0.5) == 0.0);
    CHECK(gate_polynomial(g, 0.25) == 0.25);
    CHECK(gate_polynomial(g, 3.0) == 0.0);
    CHECK(gate_polynomial(g, 0.5 - 1e-9) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(gate_polynomial(g, -0.1), std::domain_error);
  }

  TEST_CASE("gates are nonincreasing") {
    const GateSpec r = GateSpec::rational(0.12), p = GateSpec::polynomial(0.5, 3);
    const GateSpec v = GateSpec::velocity(0.05);
    for (int i = 0; i < 1000; ++i) {
      const double a = i * 1e-3, b = (i + 1) * 1e-3;
      CHECK(r(b) <= r(a));
      CHECK(p(b) <= p(a));
      // The velocity gate grows with speed and is applied as a factor, not a floor.
      CHECK(v(b) >= v(a));
    }
  }

  TEST_CASE("position-angle row on the boundary") {
    const AuxiliarySpec s = AuxiliarySpec::position_angle(0.8, 0.12);
    const BarrierSpec b = reference_disk();
    const Vec2 x(1.5, 3.0);
    const AffineConstraintRow r = aux_row_position_angle(s, b, 0.0, x);
    CHECK(r.label == RowLabel::Aux);
    // grad W = e_theta / r, so scaling by r gives u_theta >= eta sigma r = 1.2.
    CHECK((r.a * 1.5).isApprox(Eigen::Vector2d(0.0, 1.0)));
    CHECK(r.b * 1.5 == doctest::Approx(1.2).epsilon(1e-14));

    // The polar witness (u_r, u_theta) = (0, 1.2) meets both rows with equality.
    const Eigen::Vector2d u(0.0, 1.2);
    CHECK(std::abs(r.slack(u)) <= 1e-15);
    CHECK(std::abs(cbf_row_single_integrator(b, 0.0, x).slack(u)) <= 1e-15);
  }

  TEST_CASE("position-angle row far away is nearly inactive") {
    const AuxiliarySpec s = AuxiliarySpec::position_angle(0.8, 0.12);
    const BarrierSpec b = reference_disk();
    // h = 100 on the ray through the top of the obstacle.
    const Vec2 x(0.0, 3.0 + std::sqrt(102.25));
    CHECK(eval_h(b, 0.0, x) == doctest::Approx(100.0));
    const double sigma = 1.0 / (1.0 + std::pow(100.0 / 0.12, 2));
    CHECK(s.h_gate_value(100.0) == doctest::Approx(sigma).epsilon(1e-14));
    CHECK(aux_row_position_angle(s, b, 0.0, x).b == doctest::Approx(0.8 * sigma));
    CHECK_THROWS_AS(aux_row_position_angle(s, b, 0.0, Vec2(0.0, 3.0)), DegenerateGeometryError);
  }

  TEST_CASE("velocity-heading row") {
    const AuxiliarySpec s = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const BarrierSpec b = reference_disk();
    const AffineConstraintRow r1 = aux_row_velocity_heading(s, b, 0.0, Vec2(5, 5), Vec2(1, 0));
    CHECK(r1.value(Eigen::Vector2d(0.0, 1.0)) == 1.0);
    const AffineConstraintRow r2 = aux_row_velocity_heading(s, b, 0.0, Vec2(5, 5), Vec2(0, 2));
    CHECK(r2.value(Eigen::Vector2d(1.0, 0.0)) == -0.5);

    const double eps = 1e-3;
    const Vec2 x(0.0, 1.5 - eps);
    const double h = eval_h(b, 0.0, x);
    const double sigma = 1.0 / (1.0 + std::pow(h / 0.25, 2));
    const AffineConstraintRow r3 = aux_row_velocity_heading(s, b, 0.0, x, Vec2(0.05, 0.0));
    CHECK(r3.b == doctest::Approx(0.1 * sigma * 0.5).epsilon(1e-14));

    CHECK_THROWS_AS(aux_row_velocity_heading(s, b, 0.0, x, Vec2(1e-13, 0.0)),
                    DegenerateGeometryError);
  }

  TEST_CASE("relative-heading row") {
    const AuxiliarySpec s = AuxiliarySpec::relative_heading(0.5, 1.0, 0.5, 2);
    const BarrierSpec b = reference_disk();
    const Pose pose{Vec2(0.0, 1.5), 0.0};
    CHECK(relative_heading(b.obstacle.center0, pose) == doctest::Approx(pi / 2));
    const AffineConstraintRow r = aux_row_relative_heading(s, b, 0.0, pose);
    const double cpsi = 1.0 / (1.0 + pi * pi / 4.0);
    CHECK(cpsi == doctest::Approx(0.28845).epsilon(1e-4));
    CHECK(r.a(1) == doctest::Approx(cpsi).epsilon(1e-14));
    CHECK(r.a(0) == doctest::Approx(-cpsi / 1.5).epsilon(1e-14));
    CHECK(r.a(0) == doctest::Approx(-0.19230).epsilon(1e-4));
    CHECK(r.b == doctest::Approx(0.5));

    // psi = 0: heading along the outward bearing.
    const AuxiliarySpec s2 = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    const AffineConstraintRow z = aux_row_relative_heading(s2, b, 0.0, Pose{Vec2(1.5, 3.0), 0.0});
    CHECK(z.a(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(z.a(1) == 2.0);
    CHECK(z.b == 0.5);

    // Outside the gate support the right side vanishes.
    const AffineConstraintRow far = aux_row_relative_heading(s2, b, 0.0, Pose{Vec2(3.0, 3.0), 1.0});
    CHECK(far.b == 0.0);
    CHECK_THROWS_AS(aux_row_relative_heading(s2, b, 0.0, Pose{Vec2(0.0, 3.0), 0.0}),
                    DegenerateGeometryError);
  }

  TEST_CASE("eval_w examples and bounds") {
    const BarrierSpec b = reference_disk();
    const AuxiliarySpec pa = AuxiliarySpec::position_angle(0.8, 0.12);
    const AuxiliarySpec vh = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const AuxiliarySpec rh = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    CHECK(eval_w(pa, b, 0.0, Vec2(1.5, 3.0)) == 0.0);
    StateVec xv(4);
    xv << 1.0, 1.0, 0.0, 1.0;
    CHECK(eval_w(vh, b, 0.0, xv) == doctest::Approx(pi / 2));
    StateVec pose(3);
    pose << 1.5, 3.0, 0.0;
    CHECK(eval_w(rh, b, 0.0, pose) == 0.0);
    CHECK(pa.w_bound == pi);
    CHECK(vh.w_bound == pi);
    CHECK(rh.w_bound == pi / 2);

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-10.0, 10.0), th(-20.0, 20.0);
    for (int i = 0; i < 10000; ++i) {
      const Vec2 x(u(rng), u(rng));
      CHECK(std::abs(eval_w(pa, b, 0.0, x)) <= pa.w_bound);
      xv << x.x(), x.y(), u(rng), u(rng);
      CHECK(std::abs(eval_w(vh, b, 0.0, xv)) <= vh.w_bound);
      pose << x.x(), x.y(), th(rng);
      CHECK(std::abs(eval_w(rh, b, 0.0, pose)) < rh.w_bound);
    }
  }

  TEST_CASE("row values match the derivative of W along the flow") {
    const BarrierSpec b = reference_disk(Vec2(0.02, 0.05));
    const AuxiliarySpec pa = AuxiliarySpec::position_angle(0.8, 0.12);
    const AuxiliarySpec vh = AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05);
    const AuxiliarySpec rh = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-5.0, 5.0), uv(-2.0, 2.0), th(-3.0, 3.0);
    const double t = 1.5;
    int checked = 0;
    while (checked < 100) {
      const Vec2 x(u(rng), u(rng)), v(uv(rng), uv(rng)), in(uv(rng), uv(rng));
      if ((x - b.obstacle.center(t)).norm() < 0.2 || v.norm() < 0.2) continue;
      ++checked;

      // Position angle, xdot = u. The row slack is Wdot - eta sigma.
      auto w_pa = [&](double tau) {
        return eval_w(pa, b, t + tau, StateVec(x + in * tau));
      };
      const double fd_pa = oracle::central_diff_angle(w_pa, 0.0, 1e-6);
      const AffineConstraintRow r_pa = aux_row_position_angle(pa, b, t, x);
      const double floor_pa = pa.eta * pa.h_gate_value(eval_h(b, t, x));
      CHECK(rel(r_pa.slack(in) + floor_pa, fd_pa) <= 1e-5);
      CHECK(rel(w_rate(pa, b, t, StateVec(x), in), fd_pa) <= 1e-5);

      // Velocity heading, vdot = u.
      auto w_vh = [&](double tau) {
        StateVec s(4);
        s << x + v * tau + 0.5 * in * tau * tau, v + in * tau;
        return eval_w(vh, b, t + tau, s);
      };
      const double fd_vh = oracle::central_diff_angle(w_vh, 0.0, 1e-6);
      const AffineConstraintRow r_vh = aux_row_velocity_heading(vh, b, t, x, v);
      CHECK(rel(r_vh.value(in), fd_vh) <= 1e-5);
      StateVec xv(4);
      xv << x, v;
      CHECK(rel(w_rate(vh, b, t, xv, in), fd_vh) <= 1e-5);

      // Relative heading under constant (v, omega), integrated with a fine RK4.
      const double theta = th(rng);
      const double speed = in.x(), omega = in.y();
      auto pose_at = [&](double tau) {
        // Exact unicycle arc for constant inputs.
        StateVec s(3);
        if (std::abs(omega) < 1e-12) {
          s << x.x() + speed * tau * std::cos(theta), x.y() + speed * tau * std::sin(theta), theta;
        } else {
          const double th1 = theta + omega * tau;
          s << x.x() + speed / omega * (std::sin(th1) - std::sin(theta)),
              x.y() - speed / omega * (std::cos(th1) - std::cos(theta)), th1;
        }
        return s;
      };
      const Vec2 c = b.obstacle.center(t);
      const double psi = relative_heading(c, Pose{x, theta});
      if (std::abs(std::abs(psi) - pi) < 1e-3) continue;
      auto w_rh = [&](double tau) { return eval_w(rh, b, t + tau, pose_at(tau)); };
      const double fd_rh = oracle::central_diff(w_rh, 0.0, 1e-6);
      CHECK(rel(w_rate(rh, b, t, pose_at(0.0), in), fd_rh) <= 1e-5);
    }
  }

  TEST_CASE("effective eta") {
    const BoundaryLayer layer{0.06};
    const EffectiveEta pa = effective_eta(AuxiliarySpec::position_angle(0.8, 0.12), layer);
    CHECK(pa.value == doctest::Approx(0.8 * (1.0 / 1.25)).epsilon(1e-15));
    CHECK(pa.value == doctest::Approx(0.64));
    CHECK_FALSE(pa.conditional);

    const auto rh = AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2);
    CHECK(effective_eta(rh, BoundaryLayer{0.25}).value == doctest::Approx(0.125).epsilon(1e-15));
    CHECK_THROWS_AS(effective_eta(rh, BoundaryLayer{0.5}), std::domain_error);

    const EffectiveEta vh =
        effective_eta(AuxiliarySpec::velocity_heading(0.1, 0.25, 0.05), layer);
    CHECK(vh.conditional);
    CHECK(vh.value == doctest::Approx(0.1 / (1.0 + std::pow(0.06 / 0.25, 2))));
  }

  TEST_CASE("gate value at rho is the minimum over the layer") {
    for (const AuxiliarySpec& s : {AuxiliarySpec::position_angle(0.8, 0.12),
                                   AuxiliarySpec::relative_heading(0.5, 2.0, 0.5, 2)}) {
      const double rho = 0.2;
      double lo = 1.0;
      for (int i = 0; i <= 1000; ++i) lo = std::min(lo, s.h_gate_value(rho * i / 1000.0));
      CHECK(effective_eta(s, BoundaryLayer{rho}).value == doctest::Approx(s.eta * lo));
    }
  }
}
