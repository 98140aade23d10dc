#include <doctest.h>

#include <random>

#include "cbfaux/barrier.hpp"
#include "oracles.hpp"

using namespace cbfaux;

namespace {

BarrierSpec reference_disk(Vec2 velocity = Vec2::Zero()) {
  return BarrierSpec{MovingDisk{Vec2(0.0, 3.0), velocity, 1.5}, LinearClassK{1.0}};
}

}  // namespace

TEST_SUITE("barrier") {
  TEST_CASE("eval_h examples") {
    CHECK(eval_h(reference_disk(), 0.0, Vec2(0.0, 0.0)) == 6.75);
    CHECK(eval_h(reference_disk(), 0.0, Vec2(1.5, 3.0)) == 0.0);
    CHECK(eval_h(reference_disk(Vec2(0.0, 0.05)), 10.0, Vec2(0.0, 5.0)) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  }

  TEST_CASE("h_partials examples") {
    const BarrierPartials s = h_partials(reference_disk(), 0.0, Vec2(0.0, 4.5));
    CHECK(s.grad_x.isApprox(Vec2(0.0, 3.0)));
    CHECK(s.dt_part == 0.0);
    const BarrierPartials m = h_partials(reference_disk(Vec2(0.0, 0.05)), 0.0, Vec2(0.0, 4.5));
    CHECK(m.dt_part == doctest::Approx(-0.15).epsilon(1e-14));
    CHECK(h_partials(reference_disk(), 0.0, Vec2(0.0, 3.0)).grad_x.norm() == 0.0);
  }

  TEST_CASE("partials match central differences") {
    const BarrierSpec b = reference_disk(Vec2(0.03, 0.05));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0), ut(0.0, 20.0);
    for (int i = 0; i < 100; ++i) {
      const Vec2 x(u(rng), u(rng));
      const double t = ut(rng);
      const BarrierPartials p = h_partials(b, t, x);
      const double gx = oracle::central_diff(
          [&](double s) { return eval_h(b, t, Vec2(s, x.y())); }, x.x(), 1e-6);
      const double gy = oracle::central_diff(
          [&](double s) { return eval_h(b, t, Vec2(x.x(), s)); }, x.y(), 1e-6);
      const double gt = oracle::central_diff([&](double s) { return eval_h(b, s, x); }, t, 1e-6);
      auto rel = [](double a, double n) {
        return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
      };
      CHECK(rel(p.grad_x.x(), gx) <= 1e-6);
      CHECK(rel(p.grad_x.y(), gy) <= 1e-6);
      CHECK(rel(p.dt_part, gt) <= 1e-6);
    }
  }

  TEST_CASE("gradient is regular on the boundary") {
    const BarrierSpec b = reference_disk();
    for (int k = 0; k < 360; ++k) {
      const double a = k * M_PI / 180.0;
      const Vec2 x = Vec2(0.0, 3.0) + 1.5 * Vec2(std::cos(a), std::sin(a));
      CHECK(h_partials(b, 0.0, x).grad_x.norm() == doctest::Approx(3.0).epsilon(1e-12));
    }
  }

  TEST_CASE("single-integrator cbf row") {
    const AffineConstraintRow r = cbf_row_single_integrator(reference_disk(), 0.0, Vec2(1.5, 3.0));
    CHECK(r.a.isApprox(Eigen::Vector2d(3.0, 0.0)));
    CHECK(r.b == 0.0);
    CHECK(r.label == RowLabel::Cbf);
    const AffineConstraintRow o = cbf_row_single_integrator(reference_disk(), 0.0, Vec2(0.0, 0.0));
    CHECK(o.a.isApprox(Eigen::Vector2d(0.0, -6.0)));
    CHECK(o.b == -6.75);
  }

  TEST_CASE("cbf row in radial form") {
    // Dividing by |a| = 2r gives u_r >= -alpha(h) / (2 r).
    const BarrierSpec b = reference_disk();
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 100; ++i) {
      const Vec2 x(u(rng), u(rng));
      const AffineConstraintRow r = cbf_row_single_integrator(b, 0.0, x);
      const PolarFrame f = polar_frame(x, b.obstacle.center0);
      const Vec2 a = r.a;
      CHECK((a / a.norm() - f.e_r).norm() <= 1e-12);
      CHECK(r.b / a.norm() == doctest::Approx(-eval_h(b, 0.0, x) / (2.0 * f.r)).epsilon(1e-12));
    }
  }

  TEST_CASE("hocbf rows") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const HocbfRow r = hocbf_rows(s, 0.0, Vec2(0.0, 0.0), Vec2(1.0, 0.0));
    CHECK(r.h1 == 6.75);
    CHECK(r.row.a.isApprox(Eigen::Vector2d(0.0, -6.0)));
    CHECK(r.row.b == doctest::Approx(-8.75).epsilon(1e-15));

    const HocbfRow z = hocbf_rows(s, 0.0, Vec2(1.5, 3.0), Vec2::Zero());
    CHECK(z.h1 == 0.0);
    CHECK(z.row.b == 0.0);
  }

  TEST_CASE("hocbf row matches the derivative of h1 along the flow") {
    const HocbfSpec s{reference_disk(Vec2(0.0, 0.05)), 1.3, 0.7};
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-5.0, 5.0), uv(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
      const Vec2 x(u(rng), u(rng)), v(uv(rng), uv(rng)), in(uv(rng), uv(rng));
      const double t = 3.0;
      // Exact flow of xdot = v, vdot = in over a short time.
      auto h1_at = [&](double tau) {
        const Vec2 xt = x + v * tau + 0.5 * in * tau * tau, vt = v + in * tau;
        return hocbf_rows(s, t + tau, xt, vt).h1;
      };
      const double numeric = oracle::central_diff(h1_at, 0.0, 1e-6);
      const HocbfRow r = hocbf_rows(s, t, x, v);
      // slack = a.u - b = hdot1 + alpha2 h1.
      const double analytic = r.row.slack(in) - s.alpha2 * r.h1;
      CHECK(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0}) <=
            1e-5);
    }
  }

  TEST_CASE("mechanical rows with identity model coincide with hocbf rows") {
    const HocbfSpec s{reference_disk(Vec2(0.01, 0.05)), 1.0, 1.0};
    const MechanicalModel m = MechanicalModel::constant(Eigen::Matrix2d::Identity());
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 50; ++i) {
      const Vec2 q(u(rng), u(rng)), qd(u(rng), u(rng));
      const MechanicalBarrierRow mr = mechanical_rows(m, s, 2.0, q, qd);
      const HocbfRow hr = hocbf_rows(s, 2.0, q, qd);
      CHECK(mr.a_h == Vec2(hr.row.a));
      CHECK(mr.beta_h == hr.row.b);
      CHECK(mr.h1 == hr.h1);
    }
  }

  TEST_CASE("mechanical row scaling by the mass matrix") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const MechanicalModel m = MechanicalModel::constant(2.0 * Eigen::Matrix2d::Identity());
    const MechanicalBarrierRow r = mechanical_rows(m, s, 0.0, Vec2(0.0, 4.5), Vec2::Zero());
    CHECK(r.a_h.isApprox(Vec2(0.0, 1.5)));
  }

  TEST_CASE("gravity shifts beta by 2 (q - c)^T G") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const Vec2 g(0.0, -9.81);
    const MechanicalModel free = MechanicalModel::constant(Eigen::Matrix2d::Identity());
    const MechanicalModel heavy = MechanicalModel::constant(Eigen::Matrix2d::Identity(), g);
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 10; ++i) {
      const Vec2 q(u(rng), u(rng)), qd(u(rng), u(rng));
      const double shift = mechanical_rows(heavy, s, 0.0, q, qd).beta_h -
                           mechanical_rows(free, s, 0.0, q, qd).beta_h;
      const double expected = 2.0 * (q - Vec2(0.0, 3.0)).dot(g);
      CHECK(shift == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("singular mass matrix") {
    const HocbfSpec s{reference_disk(), 1.0, 1.0};
    const MechanicalModel m = MechanicalModel::constant(Eigen::Matrix2d::Zero());
    CHECK_THROWS_AS(mechanical_rows(m, s, 0.0, Vec2(1.0, 1.0), Vec2::Zero()),
                    SingularMassMatrixError);
  }

  TEST_CASE("boundary layer membership") {
    const BoundaryLayer layer{0.06};
    CHECK(in_boundary_layer(0.0, layer));
    CHECK_FALSE(in_boundary_layer(-0.01, layer));
    CHECK(in_boundary_layer(0.06, layer));
    CHECK_FALSE(in_boundary_layer(0.06 + 1e-9, layer));
    CHECK(in_boundary_layer(reference_disk(), layer, 0.0, Vec2(1.5, 3.0)));
    CHECK_FALSE(in_boundary_layer(reference_disk(), layer, 0.0, Vec2(0.0, 0.0)));
  }
}
