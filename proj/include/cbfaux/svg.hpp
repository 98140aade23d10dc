#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbfaux/io.hpp"

namespace cbfaux {

struct PlotRun {
  std::string label;
  LoadedTrajectory data;
};

struct PlotScene {
  std::optional<MovingDisk> obstacle;  // dashed copy drawn at the final time when moving
  Vec2 goal = Vec2::Zero();
};

/// One panel per run: obstacle disk, path, start and goal markers.
std::string trajectory_svg(const std::vector<PlotRun>& runs, const PlotScene& scene);

enum class SeriesField { H, WUnwrapped };

/// Overlaid time series of h (with the zero line) or unwrapped W.
std::string time_series_svg(const std::vector<PlotRun>& runs, SeriesField field);

}  // namespace cbfaux
