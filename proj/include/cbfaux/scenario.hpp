#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbfaux/analysis.hpp"

namespace cbfaux {

using Json = nlohmann::ordered_json;

/// Scenario file rejected: parse error, wrong type, out-of-range value, or
/// unknown key. The message names the line or the dotted field path.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ControllerKind { Proposed, Baseline };

enum class SweepKind { Ring, Grid, List };

struct SweepSpec {
  SweepKind kind = SweepKind::Ring;
  // Ring: positions on a circle, optionally facing the goal (unicycle).
  Vec2 ring_center = Vec2(0.0, 3.0);
  double ring_radius = 3.0;
  int count = 8;
  double center_angle = 1.5707963267948966;
  double spacing = 0.3;
  std::optional<double> heading;  // unset: face the goal
  // Grid: Cartesian product over the full state.
  StateVec lower, upper;
  std::vector<int> counts;
  // List.
  std::vector<StateVec> states;
};

struct Scenario {
  std::string name;
  SystemKind system = SystemKind::SingleIntegrator;
  Eigen::Matrix2d mass_matrix = 2.0 * Eigen::Matrix2d::Identity();
  Vec2 gravity = Vec2::Zero();
  HocbfSpec hocbf;  // hocbf.base is the barrier for every system
  ControllerKind controller = ControllerKind::Proposed;
  ClfSpec clf;
  NominalGains nominal;
  AuxiliarySpec aux;
  SimConfig sim;  // initial_state unset; one per entry of initial_states
  std::vector<double> rhos;
  StateBoundBox bound_box;
  std::vector<StateVec> initial_states;
  std::optional<SweepSpec> sweep;

  const BarrierSpec& barrier() const { return hocbf.base; }
  SystemModel model() const;
  std::unique_ptr<FeedbackLaw> make_law() const;
  /// Initial states generated by the sweep section, or initial_states when absent.
  std::vector<StateVec> sweep_states() const;
};

/// Parses and validates, materializing every default.
Scenario parse_scenario(const Json& doc);

/// Reads a scenario file; parse errors report line and column.
Scenario load_scenario(const std::string& path);

/// Parses text; parse errors report line and column.
Scenario parse_scenario_text(const std::string& text);

/// The fully materialized configuration; parsing it yields the same scenario.
Json effective_config(const Scenario& s);

std::string to_string(ControllerKind kind);

}  // namespace cbfaux
