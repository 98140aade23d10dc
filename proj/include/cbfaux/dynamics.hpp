#pragma once

#include <optional>
#include <string_view>

#include "cbfaux/barrier.hpp"

namespace cbfaux {

enum class SystemKind { SingleIntegrator, DoubleIntegrator, Unicycle, Mechanical };

std::string_view to_string(SystemKind kind);

/// State layouts (positions first):
///   SingleIntegrator  (x1, x2)          input (u1, u2)
///   DoubleIntegrator  (x1, x2, v1, v2)  input (u1, u2)
///   Unicycle          (x, y, theta)     input (v, omega)
///   Mechanical        (q1, q2, qd1, qd2) input torque (u1, u2)
struct SystemModel {
  SystemKind kind = SystemKind::SingleIntegrator;
  std::optional<MechanicalModel> mechanical;

  static SystemModel single_integrator() { return {SystemKind::SingleIntegrator, {}}; }
  static SystemModel double_integrator() { return {SystemKind::DoubleIntegrator, {}}; }
  static SystemModel unicycle() { return {SystemKind::Unicycle, {}}; }
  static SystemModel mechanical_system(MechanicalModel model) {
    return {SystemKind::Mechanical, std::move(model)};
  }

  int state_dim() const;
  int input_dim() const { return 2; }
  Vec2 position(const StateVec& state) const { return state.head<2>(); }
};

/// Continuous-time right-hand side. Throws std::invalid_argument on a
/// dimension mismatch and SingularMassMatrixError for a singular M(q).
StateVec dynamics(const SystemModel& model, double t, const StateVec& state,
                  const Vec2& input);

}  // namespace cbfaux
