#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cbfaux {

enum class RowLabel { Clf, Cbf, Aux };

std::string_view to_string(RowLabel label);

/// One half-space a^T z >= b in the decision variables of a QP.
struct AffineConstraintRow {
  Eigen::VectorXd a;
  double b = 0.0;
  RowLabel label = RowLabel::Cbf;

  double value(const Eigen::VectorXd& z) const { return a.dot(z); }
  double slack(const Eigen::VectorXd& z) const { return a.dot(z) - b; }
};

inline constexpr int kMaxQpDim = 4;
inline constexpr int kMaxQpRows = 8;

/// min 1/2 z^T Q z + q^T z  s.t.  rows[i].a^T z >= rows[i].b.
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  std::vector<AffineConstraintRow> rows;

  int dim() const { return static_cast<int>(q.size()); }

  /// Throws std::invalid_argument when the problem is malformed (dimension
  /// limits, asymmetric or indefinite Q, row size mismatch).
  void validate() const;

  double objective(const Eigen::VectorXd& z) const {
    return 0.5 * z.dot(Q * z) + q.dot(z);
  }
};

enum class QpStatus { Optimal, Infeasible };

std::string_view to_string(QpStatus status);

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;  // one per row, zero for inactive rows
  std::vector<int> active_set;  // sorted row indices
  double objective = 0.0;
};

/// Exact solver for tiny strictly convex QPs: every subset of rows is tried as
/// an active set, the KKT system is solved for each, and the primal/dual
/// feasible candidate of least objective wins. Ties go to the smaller active
/// set, then to lexicographic row order. Subsets whose KKT matrix has a
/// condition number above 1e12 are skipped.
QpSolution solve_qp(const QpProblem& problem);

/// Largest of the stationarity, primal feasibility, dual feasibility, and
/// complementarity residuals of `solution` for `problem`.
double check_kkt(const QpProblem& problem, const QpSolution& solution);

}  // namespace cbfaux
