#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ddcbf/dynamics.hpp"
#include "ddcbf/graph.hpp"

namespace ddcbf {

/// Linear class-K-infinity function alpha(h) = gain * h, extended to
/// negative arguments.
struct KInfFunction {
  double gain = 1.0;
  double operator()(double h) const { return gain * h; }
};

enum class BarrierVariant { Pair, Parallel, Orthogonal };

std::string to_string(BarrierVariant v);
BarrierVariant variant_from_string(const std::string& s);

/// One barrier candidate attached to an edge.
///
/// Pair candidates (leader-follower and leader-leader edges) measure the
/// squared separation of the endpoints. Follower-follower edges carry two
/// candidates built on the decomposition of the follower displacement into
/// components parallel and orthogonal to the designated leader-leader
/// direction.
struct BarrierCandidate {
  Edge edge;
  BarrierVariant variant = BarrierVariant::Pair;
  double d_max = 0.0;
  std::optional<FfLeaderAssignment> ff_leaders;
  std::vector<int> members;       ///< I_h: agents whose states enter h
  std::vector<int> hdot_members;  ///< agents whose states enter dh/dt

  /// Stable identifier used in artifact file names, e.g. "e0-1_pair".
  std::string label() const;

  int state_block_size(int n) const {
    return n * static_cast<int>(hdot_members.size());
  }
  int input_block_size(int m) const {
    return m * static_cast<int>(members.size());
  }
  /// Position of an agent inside the I_h ordering, -1 if absent.
  int member_index(int agent) const;
  /// Position of an agent inside the I_hdot ordering, -1 if absent.
  int hdot_member_index(int agent) const;
};

/// Build every candidate for the graph: one pair candidate per lf/ll edge,
/// parallel + orthogonal candidates per ff edge. Ordered by canonical edge,
/// parallel before orthogonal. Throws when an ff edge has no eligible
/// distinct leader pair.
std::vector<BarrierCandidate> make_candidates(const CommGraph& graph,
                                              double d_max);

/// d_max^2 - |x_k - x_j|^2.
double eval_pair(const BarrierCandidate& c, const Eigen::VectorXd& x_k,
                 const Eigen::VectorXd& x_j);

/// Split x_k - x_j into components parallel and orthogonal to the
/// leader-leader direction x_lk - x_lj. Throws when the leader separation
/// is at or below eps.
std::pair<Eigen::VectorXd, Eigen::VectorXd> decompose(
    const Eigen::VectorXd& x_k, const Eigen::VectorXd& x_j,
    const Eigen::VectorXd& x_lk, const Eigen::VectorXd& x_lj, double eps);

/// d_max^2/2 - |parallel part|^2 (Parallel) or - |orthogonal part|^2
/// (Orthogonal).
double eval_ff(const BarrierCandidate& c, const Eigen::VectorXd& x_k,
               const Eigen::VectorXd& x_j, const Eigen::VectorXd& x_lk,
               const Eigen::VectorXd& x_lj, double eps);

/// Evaluate any candidate against the full stacked state.
double eval_candidate(const BarrierCandidate& c, const Eigen::VectorXd& x,
                      int n, double eps);

/// Gradient of h with respect to the full stacked state (length n*M;
/// nonzero only on I_h blocks).
Eigen::VectorXd candidate_gradient(const BarrierCandidate& c,
                                   const Eigen::VectorXd& x, int n,
                                   int num_agents, double eps);

/// Exact chain-rule dh/dt under the (test-only) known model.
double analytic_hdot(const BarrierCandidate& c, const SystemModel& model,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                     double eps);

}  // namespace ddcbf
