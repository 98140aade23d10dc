#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cbfaux/auxiliary.hpp"
#include "cbfaux/barrier.hpp"
#include "cbfaux/qp.hpp"

namespace cbfaux {

/// Relaxed CLF on V = 1/2 |x - goal|^2 with decay margin c_v |x - goal|^2.
struct ClfSpec {
  double gamma = 1.0;  // >= 1
  double m = 1.0;      // relaxation weight, >= 1
  double c_v = 0.5;
  Vec2 goal = Vec2::Zero();

  void validate() const;
};

enum class NominalKind { PD, AicardiPolar };

struct NominalGains {
  NominalKind kind = NominalKind::PD;
  double k_p = 1.0;
  double k_d = 2.0;
  double k_rho = 0.8;
  double k_alpha = 2.5;
  double k_beta = -0.6;

  static NominalGains pd(double k_p, double k_d);
  static NominalGains aicardi(double k_rho, double k_alpha, double k_beta);

  /// PD: k_p, k_d > 0. AicardiPolar: k_rho > 0 and k_alpha > k_rho.
  void validate() const;
};

struct ControlResult {
  Vec2 u = Vec2::Zero();
  std::optional<double> delta;
  QpStatus status = QpStatus::Optimal;
  std::vector<RowLabel> active_labels;
  bool aux_dropped = false;
};

/// gamma * s for s >= 0, s otherwise.
double gamma_f(double gamma, double s);

/// min 1/2 (|u|^2 + m delta^2) subject to the relaxed CLF row, the CBF row,
/// and the position-angle auxiliary row, for xdot = u.
ControlResult clf_cbf_aux_qp(const ClfSpec& clf, const BarrierSpec& barrier,
                             const AuxiliarySpec& aux, double t, const Vec2& x);

/// Same program without the auxiliary row.
ControlResult clf_cbf_qp_baseline(const ClfSpec& clf, const BarrierSpec& barrier, double t,
                                  const Vec2& x);

/// u_nom = -k_p (x - goal) - k_d v.
Vec2 nominal_pd(const NominalGains& gains, const Vec2& x, const Vec2& v,
                const Vec2& goal = Vec2::Zero());

/// Minimum-deviation filter around `u_nom` with the HOCBF row and, when
/// `aux` is set and |v| >= 1e-12, the velocity-heading row. If the two rows
/// conflict (collinear normals) the auxiliary row is dropped and flagged.
ControlResult double_integrator_safety_filter(const Vec2& u_nom, const HocbfSpec& hocbf,
                                              const AuxiliarySpec* aux, double t,
                                              const Vec2& x, const Vec2& v);

ControlResult double_integrator_filter(const NominalGains& nominal, const HocbfSpec& hocbf,
                                       const AuxiliarySpec* aux, double t, const Vec2& x,
                                       const Vec2& v, const Vec2& goal = Vec2::Zero());

/// Computed-torque nominal u = M (-k_p (q - goal) - k_d qd) + C qd + G.
Vec2 nominal_computed_torque(const NominalGains& gains, const MechanicalModel& model,
                             const Vec2& q, const Vec2& qd, const Vec2& goal = Vec2::Zero());

/// Mechanical counterpart of double_integrator_safety_filter, in torques.
ControlResult mechanical_safety_filter(const Vec2& u_nom, const MechanicalModel& model,
                                       const HocbfSpec& hocbf, const AuxiliarySpec* aux,
                                       double t, const Vec2& q, const Vec2& qd);

/// Polar-coordinate stabilizer returning (v_nom, omega_nom).
Vec2 nominal_aicardi(const NominalGains& gains, const Pose& pose, const Vec2& goal);

/// min 1/2 |(v, w) - nominal|^2 with the unicycle CBF row 2 b v >= -alpha_h h
/// and, when `aux` is set and its gate is nonzero, the relative-heading row.
ControlResult unicycle_safety_filter(const Vec2& nominal, const BarrierSpec& barrier,
                                     const AuxiliarySpec* aux, double t, const Pose& pose);

ControlResult unicycle_filter_baseline(const NominalGains& nominal, const BarrierSpec& barrier,
                                       double t, const Pose& pose,
                                       const Vec2& goal = Vec2::Zero());

ControlResult unicycle_filter_proposed(const NominalGains& nominal, const BarrierSpec& barrier,
                                       const AuxiliarySpec& aux, double t, const Pose& pose,
                                       const Vec2& goal = Vec2::Zero());

/// Quantities logged along a closed-loop trajectory.
struct Observation {
  double h = 0.0;
  std::optional<double> h1;
  double w = 0.0;       // NaN where W is undefined (zero velocity)
  double w_rate = 0.0;  // exact Wdot under the applied input
  double gate = 0.0;    // full excitation factor, h gate times speed gate
  double speed_gate = 1.0;
};

/// A closed-loop state-feedback law for one of the example systems. The
/// monitor auxiliary function is logged even when the law does not enforce it.
class FeedbackLaw {
 public:
  virtual ~FeedbackLaw() = default;
  virtual ControlResult control(double t, const StateVec& state) const = 0;
  virtual Observation observe(double t, const StateVec& state, const Vec2& input) const = 0;
  /// The enforced auxiliary spec, or nullptr for a baseline law.
  virtual const AuxiliarySpec* auxiliary() const = 0;
  virtual const AuxiliarySpec& monitor() const = 0;
  virtual const BarrierSpec& barrier() const = 0;
};

class SingleIntegratorLaw final : public FeedbackLaw {
 public:
  SingleIntegratorLaw(ClfSpec clf, BarrierSpec barrier, AuxiliarySpec aux, bool enforce_aux)
      : clf_(std::move(clf)), barrier_(std::move(barrier)), aux_(std::move(aux)),
        enforce_aux_(enforce_aux) {}

  ControlResult control(double t, const StateVec& state) const override;
  Observation observe(double t, const StateVec& state, const Vec2& input) const override;
  const AuxiliarySpec* auxiliary() const override { return enforce_aux_ ? &aux_ : nullptr; }
  const AuxiliarySpec& monitor() const override { return aux_; }
  const BarrierSpec& barrier() const override { return barrier_; }

 private:
  ClfSpec clf_;
  BarrierSpec barrier_;
  AuxiliarySpec aux_;
  bool enforce_aux_;
};

/// Double integrator, or the mechanical system when `mechanical` is set.
class SecondOrderLaw final : public FeedbackLaw {
 public:
  SecondOrderLaw(NominalGains nominal, HocbfSpec hocbf, AuxiliarySpec aux, bool enforce_aux,
                 Vec2 goal, std::optional<MechanicalModel> mechanical = std::nullopt)
      : nominal_(nominal), hocbf_(std::move(hocbf)), aux_(std::move(aux)),
        enforce_aux_(enforce_aux), goal_(std::move(goal)), mechanical_(std::move(mechanical)) {}

  ControlResult control(double t, const StateVec& state) const override;
  Observation observe(double t, const StateVec& state, const Vec2& input) const override;
  const AuxiliarySpec* auxiliary() const override { return enforce_aux_ ? &aux_ : nullptr; }
  const AuxiliarySpec& monitor() const override { return aux_; }
  const BarrierSpec& barrier() const override { return hocbf_.base; }

 private:
  NominalGains nominal_;
  HocbfSpec hocbf_;
  AuxiliarySpec aux_;
  bool enforce_aux_;
  Vec2 goal_;
  std::optional<MechanicalModel> mechanical_;
};

class UnicycleLaw final : public FeedbackLaw {
 public:
  UnicycleLaw(NominalGains nominal, BarrierSpec barrier, AuxiliarySpec aux, bool enforce_aux,
              Vec2 goal)
      : nominal_(nominal), barrier_(std::move(barrier)), aux_(std::move(aux)),
        enforce_aux_(enforce_aux), goal_(std::move(goal)) {}

  ControlResult control(double t, const StateVec& state) const override;
  Observation observe(double t, const StateVec& state, const Vec2& input) const override;
  const AuxiliarySpec* auxiliary() const override { return enforce_aux_ ? &aux_ : nullptr; }
  const AuxiliarySpec& monitor() const override { return aux_; }
  const BarrierSpec& barrier() const override { return barrier_; }

 private:
  NominalGains nominal_;
  BarrierSpec barrier_;
  AuxiliarySpec aux_;
  bool enforce_aux_;
  Vec2 goal_;
};

}  // namespace cbfaux
