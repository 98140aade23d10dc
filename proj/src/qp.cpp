#include "cbfaux/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cbfaux {

std::string_view to_string(RowLabel label) {
  switch (label) {
    case RowLabel::Clf:
      return "CLF";
    case RowLabel::Cbf:
      return "CBF";
    case RowLabel::Aux:
      return "AUX";
  }
  return "?";
}

std::string_view to_string(QpStatus status) {
  return status == QpStatus::Optimal ? "Optimal" : "Infeasible";
}

void QpProblem::validate() const {
  const int n = dim();
  if (n < 1 || n > kMaxQpDim) {
    throw std::invalid_argument("QP dimension must be in [1, 4]");
  }
  if (Q.rows() != n || Q.cols() != n) {
    throw std::invalid_argument("QP cost matrix does not match the dimension");
  }
  if (static_cast<int>(rows.size()) > kMaxQpRows) {
    throw std::invalid_argument("QP supports at most 8 constraint rows");
  }
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("QP cost matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument("QP cost matrix is not positive definite");
  }
  for (const auto& row : rows) {
    if (row.a.size() != n) {
      throw std::invalid_argument("constraint row size does not match the QP dimension");
    }
    if (!row.a.allFinite() || !std::isfinite(row.b)) {
      throw std::invalid_argument("constraint row has non-finite entries");
    }
  }
}

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kFeasTol = 1e-10;
constexpr double kDualTol = 1e-10;

struct Candidate {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;  // active multipliers in subset order
};

// Solves the equality-constrained KKT system for one active set; returns false
// when the system is too ill-conditioned to trust.
bool solve_active_set(const QpProblem& p, const std::vector<int>& active,
                      Candidate& out) {
  const int n = p.dim();
  const int k = static_cast<int>(active.size());
  if (k == 0) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(p.Q);
    out.z = ldlt.solve(-p.q);
    out.lambda.resize(0);
    return out.z.allFinite();
  }
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
  Eigen::VectorXd rhs(n + k);
  kkt.topLeftCorner(n, n) = p.Q;
  rhs.head(n) = -p.q;
  for (int j = 0; j < k; ++j) {
    const auto& row = p.rows[static_cast<std::size_t>(active[j])];
    kkt.block(0, n + j, n, 1) = -row.a;
    kkt.block(n + j, 0, 1, n) = row.a.transpose();
    rhs(n + j) = row.b;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(kkt, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > kMaxCondition) return false;
  Eigen::VectorXd sol = svd.solve(rhs);
  // Iterative refinement: far-out vertices make a single solve lose digits.
  for (int it = 0; it < 3 && sol.allFinite(); ++it) {
    const Eigen::VectorXd r = rhs - kkt * sol;
    if (r.cwiseAbs().maxCoeff() == 0.0) break;
    sol += svd.solve(r);
  }
  if (!sol.allFinite()) return false;
  out.z = sol.head(n);
  out.lambda = sol.tail(k);
  return true;
}

// Visits subsets ordered by cardinality, then lexicographically.
template <typename Visit>
void for_each_subset(int n, Visit&& visit) {
  std::vector<int> idx;
  for (int k = 0; k <= n; ++k) {
    idx.resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) idx[j] = j;
    while (true) {
      visit(idx);
      int j = k - 1;
      while (j >= 0 && idx[j] == n - k + j) --j;
      if (j < 0) break;
      ++idx[j];
      for (int l = j + 1; l < k; ++l) idx[l] = idx[l - 1] + 1;
    }
  }
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem) {
  problem.validate();
  const int m = static_cast<int>(problem.rows.size());

  QpSolution best;
  best.status = QpStatus::Infeasible;
  best.objective = std::numeric_limits<double>::infinity();

  Candidate cand;
  for_each_subset(m, [&](const std::vector<int>& active) {
    if (!solve_active_set(problem, active, cand)) return;
    for (int j = 0; j < static_cast<int>(active.size()); ++j) {
      const double scale = 1.0 + std::abs(cand.lambda(j));
      if (cand.lambda(j) < -kDualTol * scale) return;
    }
    for (const auto& row : problem.rows) {
      const double scale = 1.0 + std::abs(row.b) + row.a.norm() * cand.z.norm();
      if (row.slack(cand.z) < -kFeasTol * scale) return;
    }
    const double obj = problem.objective(cand.z);
    if (best.status == QpStatus::Optimal &&
        !(obj < best.objective - 1e-12 * (1.0 + std::abs(best.objective)))) {
      return;
    }
    best.status = QpStatus::Optimal;
    best.objective = obj;
    best.z = cand.z;
    best.active_set = active;
    best.multipliers = Eigen::VectorXd::Zero(m);
    for (int j = 0; j < static_cast<int>(active.size()); ++j) {
      best.multipliers(active[j]) = std::max(0.0, cand.lambda(j));
    }
  });

  if (best.status == QpStatus::Infeasible) {
    best.z = Eigen::VectorXd::Zero(problem.dim());
    best.multipliers = Eigen::VectorXd::Zero(m);
    best.objective = std::numeric_limits<double>::quiet_NaN();
  }
  return best;
}

double check_kkt(const QpProblem& problem, const QpSolution& solution) {
  const auto& z = solution.z;
  const auto& lambda = solution.multipliers;
  Eigen::VectorXd stationarity = problem.Q * z + problem.q;
  double worst = 0.0;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    const auto& row = problem.rows[i];
    const double li = lambda(static_cast<Eigen::Index>(i));
    stationarity -= li * row.a;
    const double slack = row.slack(z);
    worst = std::max({worst, -slack, -li, std::abs(li * slack)});
  }
  if (stationarity.size() > 0) {
    worst = std::max(worst, stationarity.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace cbfaux
