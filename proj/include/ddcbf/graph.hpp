#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace ddcbf {

/// Undirected edge stored in canonical (min, max) order.
using Edge = std::pair<int, int>;

/// Canonicalize an unordered vertex pair. Rejects self-loops.
Edge make_edge(int a, int b);

/// Communication graph with leader/follower roles.
///
/// Vertices are 0..num_agents-1. Edges are canonical, sorted and unique.
/// Immutable after construction; the constructor validates all invariants.
class CommGraph {
public:
  CommGraph() = default;
  CommGraph(int num_agents, std::vector<int> leaders, std::vector<Edge> edges);

  int num_agents() const { return num_agents_; }
  const std::vector<int>& leaders() const { return leaders_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<int> followers() const;

  bool is_leader(int v) const;
  bool has_edge(int a, int b) const;

private:
  int num_agents_ = 0;
  std::vector<int> leaders_;
  std::vector<Edge> edges_;
};

/// Edge classes by endpoint roles: leader-leader, leader-follower,
/// follower-follower. The three sets partition the edge set.
struct EdgePartition {
  std::vector<Edge> ll;
  std::vector<Edge> lf;
  std::vector<Edge> ff;
};

/// Designated leaders for a follower-follower edge (k, j):
/// leader_k is adjacent to k but not to j, and vice versa.
struct FfLeaderAssignment {
  Edge edge;
  int leader_k = -1;
  int leader_j = -1;
};

/// Neighbor split for a pair (k, j): shared neighbors, neighbors
/// exclusive to k (j removed), neighbors exclusive to j (k removed).
struct SharedExclusive {
  std::vector<int> shared;
  std::vector<int> only_k;
  std::vector<int> only_j;
};

EdgePartition classify_edges(const CommGraph& graph);

/// N_i, sorted ascending.
std::vector<int> neighbors(const CommGraph& graph, int i);

SharedExclusive shared_and_exclusive(const CommGraph& graph, int k, int j);

/// Two-hop information set of a leader: {j} ∪ N_j ∪ neighbors of N_j.
std::vector<int> two_hop_info(const CommGraph& graph, int j);

/// Pick the lowest-indexed eligible distinct leader for each follower of a
/// follower-follower edge. Throws if no eligible pair exists (the scenario
/// is rejected).
FfLeaderAssignment assign_ff_leaders(const CommGraph& graph, const Edge& edge);

}  // namespace ddcbf
