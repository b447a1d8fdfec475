#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "ddcbf/bounds.hpp"
#include "ddcbf/data.hpp"

namespace ddcbf {

/// Anchor sample chosen for the mean-value lower bound at the current state.
struct IndexSelection {
  int index = -1;     ///< position in the candidate's dataset
  double score = 0.0; ///< maximized state-only lower bound
};

/// One leader's share of an edge constraint:
///   const_term + sum_c min(slope_lo_c dc, slope_hi_c dc) >= rhs,
/// with dc = u_c - input_anchor_c over the leader's own input block.
/// The piecewise-linear part is concave, so the safety filter encodes it
/// exactly with per-component epigraph variables.
struct LocalConstraint {
  int leader = -1;
  double const_term = 0.0;
  Eigen::VectorXd input_anchor;
  Eigen::VectorXd slope_lo;
  Eigen::VectorXd slope_hi;
  double rhs = 0.0;

  /// Exact left-hand side at an input (no epigraph relaxation).
  double lhs(const Eigen::VectorXd& u_leader) const;
};

/// Convex weights dividing a shared edge constraint between two leaders.
struct BetaSplit {
  double beta_k = 0.5;
  double beta_j = 0.5;
};

/// argmax over samples of hdot_i + Jlo_x . Dx+ - Jhi_x . Dx-, with
/// Dx = x_{I_hdot} - x_i. Ties break to the lowest sample id. Throws on an
/// empty dataset (certification is infeasible without data).
IndexSelection select_index_pair(const DerivativeDataset& ds,
                                 const JacobianBounds& b,
                                 const Eigen::VectorXd& x, int n);

/// Same argmax restricted to samples whose leader-pair segment keeps
/// norm >= eps for every interpolation between the sample and the current
/// leader states; checked at the endpoints and the interior critical point
/// of the squared norm. Returns nullopt when no sample is admissible.
std::optional<IndexSelection> select_index_ff(const DerivativeDataset& ds,
                                              const JacobianBounds& b,
                                              const Eigen::VectorXd& x, int n,
                                              const FfLeaderAssignment& lead,
                                              double eps);

/// Leader-follower edge: the single leader carries the whole condition.
LocalConstraint assemble_lf(const CommGraph& graph, const DerivativeDataset& ds,
                            const JacobianBounds& b, const IndexSelection& sel,
                            const KInfFunction& alpha, const Eigen::VectorXd& x,
                            int n);

/// Leader-leader edge: shared-neighborhood terms and the anchor derivative
/// are split by beta; own-state, own-input and exclusive-neighborhood terms
/// go unweighted to the owning leader. Returns (constraint for k,
/// constraint for j); the two sides sum to the coupled condition.
std::pair<LocalConstraint, LocalConstraint> assemble_ll(
    const CommGraph& graph, const DerivativeDataset& ds,
    const JacobianBounds& b, const IndexSelection& sel,
    const KInfFunction& alpha, const BetaSplit& split,
    const Eigen::VectorXd& x, int n);

/// Follower-follower edge: as assemble_ll but over the augmented neighbor
/// sets that include the designated leaders' neighborhoods. Returns the
/// constraints for (leader_k, leader_j).
std::pair<LocalConstraint, LocalConstraint> assemble_ff(
    const CommGraph& graph, const DerivativeDataset& ds,
    const JacobianBounds& b, const IndexSelection& sel,
    const KInfFunction& alpha, const BetaSplit& split,
    const Eigen::VectorXd& x, int n, double eps);

}  // namespace ddcbf
