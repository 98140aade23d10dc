#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cbfaux {

using Vec2 = Eigen::Vector2d;
using StateVec = Eigen::VectorXd;

/// Raised when a construction is evaluated at the obstacle center (or at zero
/// velocity for heading-based constructions), where its polar frame is undefined.
class DegenerateGeometryError : public std::domain_error {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : std::domain_error(what) {}
};

inline constexpr double kDegenerateRadius = 1e-12;

/// Counter-clockwise rotation by 90 degrees.
inline Vec2 rotate90(const Vec2& v) { return Vec2(-v.y(), v.x()); }

/// Planar cross product a x b (z component).
inline double cross(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Range-bearing frame centered at an obstacle.
struct PolarFrame {
  double r = 0.0;
  Vec2 e_r = Vec2::UnitX();
  Vec2 e_theta = Vec2::UnitY();
};

/// Throws DegenerateGeometryError when |x - c| < 1e-12.
PolarFrame polar_frame(const Vec2& x, const Vec2& c);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Disk obstacle translating with constant velocity.
struct MovingDisk {
  Vec2 center0 = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 1.0;

  Vec2 center(double t) const { return center0 + velocity * t; }
  bool is_static() const { return velocity.isZero(0.0); }
};

}  // namespace cbfaux
