#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cbfaux/sim.hpp"

namespace cbfaux {

/// Half-open residence interval [t_enter, t_exit) in the boundary layer.
struct ResidenceInterval {
  double t_enter = 0.0;
  double t_exit = 0.0;
  double length() const { return t_exit - t_enter; }
};

/// Maximal runs of samples with 0 <= h <= rho. A run of n samples has length n dt.
std::vector<ResidenceInterval> residence_intervals(const Trajectory& traj,
                                                   const BoundaryLayer& layer);

struct ResidenceReport {
  double rho = 0.0;
  std::vector<ResidenceInterval> intervals;
  double max_residence = 0.0;
  double total_occupancy = 0.0;
  bool final_interval_open = false;  // last interval runs to the end of the log
  /// False for laws without an enforced auxiliary function; bound fields are then unset.
  bool applicable = false;
  std::optional<double> eta_rho;
  std::optional<double> bound;
  std::optional<bool> bound_satisfied;
  bool conditional = false;
  /// min Wdot over in-layer samples where the auxiliary row was enforced.
  std::optional<double> realized_min_w_rate_in_layer;
  /// min of Wdot - eta * gate over the same samples; >= -1e-9 when the floor holds.
  std::optional<double> min_floor_margin_in_layer;
  std::optional<double> realized_min_speed_gate_in_layer;
};

/// Residence intervals against T <= 2 M / eta_rho. Pass aux = nullptr for a
/// baseline run. Throws std::domain_error when the gate vanishes inside the layer.
ResidenceReport check_residence_bound(const Trajectory& traj, const AuxiliarySpec* aux,
                                      const BoundaryLayer& layer);

struct StateBoundBox {
  StateVec lower;
  StateVec upper;

  static StateBoundBox uniform(int dim, double lo, double hi);
  void validate() const;
};

struct ContainmentResult {
  bool contained = true;
  std::optional<double> first_exit_time;
};

/// Throws std::invalid_argument for an empty trajectory or a box of the wrong size.
ContainmentResult check_compact_containment(const Trajectory& traj, const StateBoundBox& box);

/// Row builders used by the verification routines. Defaults are the library
/// builders; fault-injected variants exist to prove the checks can fail.
struct RowBuilders {
  std::function<AffineConstraintRow(const BarrierSpec&, double, const Vec2&)> cbf_single =
      cbf_row_single_integrator;
  std::function<AffineConstraintRow(const AuxiliarySpec&, const BarrierSpec&, double,
                                    const Vec2&)>
      aux_position_angle = aux_row_position_angle;
  std::function<HocbfRow(const HocbfSpec&, double, const Vec2&, const Vec2&)> hocbf =
      hocbf_rows;
  std::function<AffineConstraintRow(const AuxiliarySpec&, const BarrierSpec&, double,
                                    const Vec2&, const Vec2&)>
      aux_velocity_heading = [](const AuxiliarySpec& s, const BarrierSpec& b, double t,
                                const Vec2& x, const Vec2& v) {
        return aux_row_velocity_heading(s, b, t, x, v);
      };
  std::function<AffineConstraintRow(const AuxiliarySpec&, const BarrierSpec&, double,
                                    const Pose&)>
      aux_relative_heading = aux_row_relative_heading;

  /// Known faults: "cbf_sign", "aux_sign", "hocbf_drift", "heading_sign".
  /// Throws std::invalid_argument for an unknown name.
  static RowBuilders with_fault(std::string_view fault);
};

struct PlanarGrid {
  double lo = -5.0;
  double hi = 5.0;
  int n = 100;
  double exclusion_radius = 1e-3;
};

struct FeasibilityReport {
  std::size_t grid_size = 0;
  std::vector<StateVec> infeasible_points;
  std::vector<StateVec> degenerate_points;  // infeasible with collinear normals
  std::vector<StateVec> excluded_points;    // too close to the obstacle center
  double max_kkt_residual = 0.0;

  /// Every infeasible point is a degenerate one.
  bool passed() const;
};

/// CBF row plus position-angle row at each grid point, solved with Q = I, q = 0.
FeasibilityReport feasibility_grid_single(const BarrierSpec& barrier, const AuxiliarySpec& aux,
                                          const PlanarGrid& grid,
                                          const RowBuilders& rows = {});

struct PhaseSample {
  Vec2 x;
  Vec2 v;
};

/// Uniform samples of x in [lo, hi]^2 and v in [-v_max, v_max]^2 with
/// |v| >= v_floor, by rejection, from a seeded mt19937_64.
std::vector<PhaseSample> sample_phase_points(std::size_t n, std::uint64_t seed, double lo,
                                             double hi, double v_max, double v_floor = 0.01);

/// |det[(x - c), v_perp]| / (|x - c| |v|).
double collinearity_measure(const Vec2& d, const Vec2& v);

inline constexpr double kCollinearityTol = 1e-6;

/// HOCBF row plus velocity-heading row per sample. Throws
/// std::invalid_argument for a sample with |v| < 0.01.
FeasibilityReport feasibility_grid_double(const HocbfSpec& hocbf, const AuxiliarySpec& aux,
                                          const std::vector<PhaseSample>& samples,
                                          const RowBuilders& rows = {});

struct RingSampler {
  std::vector<double> h_values{0.0, 0.025, 0.05};
  int n_angles = 720;
  int n_headings = 72;  // unicycle only
};

/// States near the boundary where the closed-loop vector field has norm <= tol.
/// Ring samples are refined by golden-section search along the ring (and in
/// heading, for the unicycle). Second-order systems are sampled at rest.
std::vector<StateVec> detect_boundary_equilibria(const FeedbackLaw& law,
                                                 const SystemModel& model,
                                                 const BarrierSpec& barrier,
                                                 const RingSampler& ring, double tol = 1e-4,
                                                 double t = 0.0);

struct FdCheck {
  std::string name;
  double max_rel_error = 0.0;
};

struct FdReport {
  std::vector<FdCheck> checks;
  double max_rel_error = 0.0;
};

/// Derivative objects to cross-check by central differences.
struct FdSpecs {
  BarrierSpec barrier;
  HocbfSpec hocbf;
  AuxiliarySpec position_angle;
  AuxiliarySpec velocity_heading;
  AuxiliarySpec relative_heading;

  /// Shipped parameters on a moving obstacle, so time partials are exercised.
  static FdSpecs defaults();
};

/// |a - b| / max(|a|, |b|, 1).
double fd_relative_error(double analytic, double numeric);

/// Compares grad h, dh/dt, and the slack of every CBF, HOCBF and auxiliary
/// row against central differences along the flow at random states.
FdReport gradient_fd_suite(const FdSpecs& specs, int n_samples, double step = 1e-6,
                           std::uint64_t seed = 7, const RowBuilders& rows = {});

}  // namespace cbfaux
