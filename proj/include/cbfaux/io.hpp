#pragma once

#include <string>
#include <vector>

#include "cbfaux/scenario.hpp"

namespace cbfaux {

/// Malformed trajectory CSV (wrong header, bad field, no rows).
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, the shortest format that round-trips every double.
std::string format_double(double x);

/// State and input column names for a system, in CSV order.
std::vector<std::string> state_columns(SystemKind kind);
std::vector<std::string> input_columns(SystemKind kind);

/// Full header: t, state..., input..., delta, h, h1, w, w_unwrapped, gate,
/// in_layer, qp_status.
std::vector<std::string> csv_header(SystemKind kind);

/// Absent values (delta, h1, undefined W) are written as empty fields.
std::string trajectory_csv(const Trajectory& traj, SystemKind kind);
void write_trajectory_csv(const std::string& path, const Trajectory& traj, SystemKind kind);

struct LoadedTrajectory {
  SystemKind kind = SystemKind::SingleIntegrator;
  Trajectory traj;  // samples only; events, w_rate and speed gate are not stored
};

/// The system is recognised from the header. Throws CsvError.
LoadedTrajectory read_trajectory_csv(const std::string& path);
LoadedTrajectory parse_trajectory_csv(const std::string& text);

/// Recomputes the quantities not stored in the CSV (W rate, speed gate,
/// enforcement flag) by replaying the logged inputs through the law.
void replay_observations(Trajectory& traj, const FeedbackLaw& law);

Json to_json(const ResidenceReport& r);
Json to_json(const FeasibilityReport& r);
Json to_json(const FdReport& r);
Json to_json(const ContainmentResult& r);
Json state_json(const StateVec& v);

/// Writes `j` with two-space indent and a trailing newline.
void write_json(const std::string& path, const Json& j);

}  // namespace cbfaux
