#include "cbfaux/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace cbfaux {

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::SingleIntegrator:
      return "single_integrator";
    case SystemKind::DoubleIntegrator:
      return "double_integrator";
    case SystemKind::Unicycle:
      return "unicycle";
    case SystemKind::Mechanical:
      return "mechanical";
  }
  return "?";
}

int SystemModel::state_dim() const {
  switch (kind) {
    case SystemKind::SingleIntegrator:
      return 2;
    case SystemKind::Unicycle:
      return 3;
    case SystemKind::DoubleIntegrator:
    case SystemKind::Mechanical:
      return 4;
  }
  return 0;
}

StateVec dynamics(const SystemModel& model, double /*t*/, const StateVec& state,
                  const Vec2& input) {
  if (state.size() != model.state_dim()) {
    throw std::invalid_argument("state dimension does not match the system");
  }
  StateVec dx(state.size());
  switch (model.kind) {
    case SystemKind::SingleIntegrator:
      dx = input;
      break;
    case SystemKind::DoubleIntegrator:
      dx.head<2>() = state.segment<2>(2);
      dx.tail<2>() = input;
      break;
    case SystemKind::Unicycle:
      dx << input(0) * std::cos(state(2)), input(0) * std::sin(state(2)), input(1);
      break;
    case SystemKind::Mechanical: {
      if (!model.mechanical) throw std::invalid_argument("mechanical system has no model");
      const Vec2 q = state.head<2>();
      const Vec2 qd = state.segment<2>(2);
      dx.head<2>() = qd;
      dx.tail<2>() = model.mechanical->acceleration(q, qd, input);
      break;
    }
  }
  return dx;
}

}  // namespace cbfaux
