#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ddcbf/certify.hpp"

namespace ddcbf {

/// minimize 1/2 x'Px + q'x  subject to  lower <= Ax <= upper.
/// P must be symmetric positive semidefinite. Infinite bounds are allowed.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(q.size()); }
  int num_constraints() const { return static_cast<int>(lower.size()); }
};

enum class QpStatus { Optimal, MaxIters, InfeasibleDetected };

struct QpSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual;
  QpStatus status = QpStatus::MaxIters;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

struct QpSettings {
  double tol = 1e-6;
  int max_iters = 20000;
  double sigma = 1e-6;
  double rho0 = 0.1;
  double relax = 1.6;
  int check_interval = 25;
  bool adaptive_rho = true;
  bool polish = true;
  bool scaling = true;
};

/// Operator-splitting (ADMM) solver with over-relaxation, Ruiz
/// equilibration, adaptive penalty and an active-set polish step.
/// Deterministic: identical problems produce bitwise-identical solutions.
QpSolution solve(const QpProblem& p, const QpSettings& settings = {});

/// Per-component input interval for one leader.
struct InputBox {
  double lo = -50.0;
  double hi = 50.0;
};

/// Slack-penalized projection of the nominal input onto a leader's safe
/// input set. Decision variables are (u, epigraph t per constraint
/// component, one slack per constraint); objective
/// 1/2 |u - u_nom|^2 + rho * sum(s). An empty constraint list reduces to
/// projection onto the box.
QpProblem build_safety_filter(const Eigen::VectorXd& u_nom,
                              const std::vector<LocalConstraint>& constraints,
                              double rho, const InputBox& box);

}  // namespace ddcbf
