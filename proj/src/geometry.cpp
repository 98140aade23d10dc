#include "cbfaux/geometry.hpp"

#include <cmath>
#include <numbers>

namespace cbfaux {

PolarFrame polar_frame(const Vec2& x, const Vec2& c) {
  const Vec2 d = x - c;
  const double r = d.norm();
  if (!(r >= kDegenerateRadius)) {
    throw DegenerateGeometryError("polar frame undefined at the obstacle center");
  }
  PolarFrame frame;
  frame.r = r;
  frame.e_r = d / r;
  frame.e_theta = rotate90(frame.e_r);
  return frame;
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

}  // namespace cbfaux
