#include "cbfaux/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cbfaux {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void pad(double frac) {
    if (!std::isfinite(x0)) *this = Box{0.0, 1.0, 0.0, 1.0};
    const double dx = std::max(x1 - x0, 1e-9) * frac, dy = std::max(y1 - y0, 1e-9) * frac;
    x0 -= dx;
    x1 += dx;
    y0 -= dy;
    y1 += dy;
  }
};

// Maps data coordinates into a pixel rectangle; y grows upwards in data.
struct Frame {
  Box data;
  double left, top, width, height;

  double px(double x) const { return left + (x - data.x0) / (data.x1 - data.x0) * width; }
  double py(double y) const { return top + (data.y1 - y) / (data.y1 - data.y0) * height; }
};

std::string polyline(const Frame& f, const std::vector<std::pair<double, double>>& pts,
                     const std::string& color, const std::string& extra = "") {
  std::string out = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" " +
                    extra + " points=\"";
  for (const auto& [x, y] : pts) {
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    out += num(f.px(x)) + "," + num(f.py(y)) + " ";
  }
  return out + "\"/>\n";
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::string out = "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" +
                    num(f.width) + "\" height=\"" + num(f.height) +
                    "\" fill=\"none\" stroke=\"#444\"/>\n";
  auto tick_text = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return std::string(buf);
  };
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.data.x0 + (f.data.x1 - f.data.x0) * i / 4.0;
    const double yv = f.data.y0 + (f.data.y1 - f.data.y0) * i / 4.0;
    out += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(f.top + f.height + 14) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + tick_text(xv) + "</text>\n";
    out += "<text x=\"" + num(f.left - 4) + "\" y=\"" + num(f.py(yv) + 3) +
           "\" font-size=\"10\" text-anchor=\"end\">" + tick_text(yv) + "</text>\n";
  }
  out += "<text x=\"" + num(f.left + f.width / 2) + "\" y=\"" + num(f.top + f.height + 30) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  out += "<text x=\"" + num(f.left - 36) + "\" y=\"" + num(f.top + f.height / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " +
         num(f.left - 36) + " " + num(f.top + f.height / 2) + ")\">" + ylabel + "</text>\n";
  return out;
}

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
         "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string trajectory_svg(const std::vector<PlotRun>& runs, const PlotScene& scene) {
  const double panel = 360.0, margin = 50.0;
  const double width = runs.size() * (panel + margin) + margin;
  const double height = panel + 2 * margin + 20;
  std::string out = header(width, height);

  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& samples = runs[k].data.traj.samples;
    const double t_end = samples.empty() ? 0.0 : samples.back().t;
    Box b;
    for (const auto& s : samples) b.add(s.state(0), s.state(1));
    b.add(scene.goal.x(), scene.goal.y());
    if (scene.obstacle) {
      for (double t : {samples.empty() ? 0.0 : samples.front().t, t_end}) {
        const Vec2 c = scene.obstacle->center(t);
        const double r = scene.obstacle->radius;
        b.add(c.x() - r, c.y() - r);
        b.add(c.x() + r, c.y() + r);
      }
    }
    b.pad(0.08);
    // Equal aspect ratio.
    const double span = std::max(b.x1 - b.x0, b.y1 - b.y0);
    const double cx = 0.5 * (b.x0 + b.x1), cy = 0.5 * (b.y0 + b.y1);
    b = Box{cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2};
    const Frame f{b, margin + k * (panel + margin), margin, panel, panel};
    const double scale = panel / span;

    out += "<text x=\"" + num(f.left + panel / 2) + "\" y=\"" + num(margin - 12) +
           "\" font-size=\"13\" text-anchor=\"middle\">" + escape(runs[k].label) + "</text>\n";
    if (scene.obstacle) {
      const auto& ob = *scene.obstacle;
      const Vec2 c0 = ob.center(samples.empty() ? 0.0 : samples.front().t);
      out += "<circle cx=\"" + num(f.px(c0.x())) + "\" cy=\"" + num(f.py(c0.y())) + "\" r=\"" +
             num(ob.radius * scale) + "\" fill=\"#bbbbbb\" stroke=\"#555\"/>\n";
      if (!ob.is_static()) {
        const Vec2 c1 = ob.center(t_end);
        out += "<circle cx=\"" + num(f.px(c1.x())) + "\" cy=\"" + num(f.py(c1.y())) +
               "\" r=\"" + num(ob.radius * scale) +
               "\" fill=\"none\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
      }
    }
    std::vector<std::pair<double, double>> pts;
    const std::size_t stride = std::max<std::size_t>(1, samples.size() / 2000);
    for (std::size_t i = 0; i < samples.size(); i += stride) {
      pts.emplace_back(samples[i].state(0), samples[i].state(1));
    }
    if (!samples.empty()) pts.emplace_back(samples.back().state(0), samples.back().state(1));
    out += polyline(f, pts, kPalette[k % 8]);
    if (!samples.empty()) {
      out += "<circle cx=\"" + num(f.px(samples.front().state(0))) + "\" cy=\"" +
             num(f.py(samples.front().state(1))) + "\" r=\"4\" fill=\"" + kPalette[k % 8] +
             "\"/>\n";
    }
    out += "<path d=\"M" + num(f.px(scene.goal.x()) - 6) + "," + num(f.py(scene.goal.y()) - 6) +
           " l12,12 M" + num(f.px(scene.goal.x()) - 6) + "," + num(f.py(scene.goal.y()) + 6) +
           " l12,-12\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out += axes(f, "x", "y");
  }
  return out + "</svg>\n";
}

std::string time_series_svg(const std::vector<PlotRun>& runs, SeriesField field) {
  const double width = 640, height = 360, margin = 60;
  std::string out = header(width, height + 40);
  auto value = [field](const TrajectorySample& s) {
    return field == SeriesField::H ? s.h : s.w_unwrapped;
  };
  Box b;
  for (const auto& r : runs) {
    for (const auto& s : r.data.traj.samples) b.add(s.t, value(s));
  }
  if (field == SeriesField::H) b.add(std::isfinite(b.x0) ? b.x0 : 0.0, 0.0);
  b.pad(0.05);
  const Frame f{b, margin, 30, width - margin - 20, height - 50};

  if (field == SeriesField::H) {
    out += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.py(0.0)) + "\" x2=\"" +
           num(f.left + f.width) + "\" y2=\"" + num(f.py(0.0)) +
           "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  }
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& samples = runs[k].data.traj.samples;
    std::vector<std::pair<double, double>> pts;
    const std::size_t stride = std::max<std::size_t>(1, samples.size() / 2000);
    for (std::size_t i = 0; i < samples.size(); i += stride) {
      pts.emplace_back(samples[i].t, value(samples[i]));
    }
    if (!samples.empty()) pts.emplace_back(samples.back().t, value(samples.back()));
    out += polyline(f, pts, kPalette[k % 8]);
    out += "<text x=\"" + num(f.left + f.width - 6) + "\" y=\"" + num(f.top + 14 + 14 * k) +
           "\" font-size=\"11\" text-anchor=\"end\" fill=\"" + kPalette[k % 8] + "\">" +
           escape(runs[k].label) + "</text>\n";
  }
  out += axes(f, "t [s]", field == SeriesField::H ? "h" : "W (unwrapped)");
  return out + "</svg>\n";
}

}  // namespace cbfaux
