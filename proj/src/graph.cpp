#include "ddcbf/graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace ddcbf {

Edge make_edge(int a, int b) {
  if (a == b) {
    throw std::invalid_argument("self-loop edge (" + std::to_string(a) + "," +
                                std::to_string(b) + ")");
  }
  return {std::min(a, b), std::max(a, b)};
}

CommGraph::CommGraph(int num_agents, std::vector<int> leaders,
                     std::vector<Edge> edges)
    : num_agents_(num_agents),
      leaders_(std::move(leaders)),
      edges_(std::move(edges)) {
  if (num_agents_ <= 0) {
    throw std::invalid_argument("graph needs at least one agent");
  }
  std::sort(leaders_.begin(), leaders_.end());
  if (std::adjacent_find(leaders_.begin(), leaders_.end()) != leaders_.end()) {
    throw std::invalid_argument("duplicate leader id");
  }
  for (int v : leaders_) {
    if (v < 0 || v >= num_agents_) {
      throw std::invalid_argument("leader id out of range: " +
                                  std::to_string(v));
    }
  }
  for (auto& e : edges_) {
    e = make_edge(e.first, e.second);
    if (e.first < 0 || e.second >= num_agents_) {
      throw std::invalid_argument("edge endpoint out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw std::invalid_argument("duplicate edge");
  }
}

std::vector<int> CommGraph::followers() const {
  std::vector<int> out;
  for (int v = 0; v < num_agents_; ++v) {
    if (!is_leader(v)) out.push_back(v);
  }
  return out;
}

bool CommGraph::is_leader(int v) const {
  return std::binary_search(leaders_.begin(), leaders_.end(), v);
}

bool CommGraph::has_edge(int a, int b) const {
  if (a == b) return false;
  return std::binary_search(edges_.begin(), edges_.end(), make_edge(a, b));
}

EdgePartition classify_edges(const CommGraph& graph) {
  EdgePartition part;
  for (const Edge& e : graph.edges()) {
    const bool first_leads = graph.is_leader(e.first);
    const bool second_leads = graph.is_leader(e.second);
    if (first_leads && second_leads) {
      part.ll.push_back(e);
    } else if (!first_leads && !second_leads) {
      part.ff.push_back(e);
    } else {
      part.lf.push_back(e);
    }
  }
  return part;
}

std::vector<int> neighbors(const CommGraph& graph, int i) {
  if (i < 0 || i >= graph.num_agents()) {
    throw std::invalid_argument("vertex id out of range: " + std::to_string(i));
  }
  std::vector<int> out;
  for (const Edge& e : graph.edges()) {
    if (e.first == i) out.push_back(e.second);
    if (e.second == i) out.push_back(e.first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SharedExclusive shared_and_exclusive(const CommGraph& graph, int k, int j) {
  if (k == j) {
    throw std::invalid_argument("shared_and_exclusive requires k != j");
  }
  const std::vector<int> nk = neighbors(graph, k);
  const std::vector<int> nj = neighbors(graph, j);

  SharedExclusive out;
  std::set_intersection(nk.begin(), nk.end(), nj.begin(), nj.end(),
                        std::back_inserter(out.shared));
  for (int v : nk) {
    if (v != j && !std::binary_search(nj.begin(), nj.end(), v)) {
      out.only_k.push_back(v);
    }
  }
  for (int v : nj) {
    if (v != k && !std::binary_search(nk.begin(), nk.end(), v)) {
      out.only_j.push_back(v);
    }
  }
  return out;
}

std::vector<int> two_hop_info(const CommGraph& graph, int j) {
  if (!graph.is_leader(j)) {
    throw std::invalid_argument("two_hop_info: vertex " + std::to_string(j) +
                                " is not a leader");
  }
  std::set<int> info{j};
  for (int k : neighbors(graph, j)) {
    info.insert(k);
    for (int v : neighbors(graph, k)) info.insert(v);
  }
  return {info.begin(), info.end()};
}

FfLeaderAssignment assign_ff_leaders(const CommGraph& graph,
                                     const Edge& edge) {
  const int k = edge.first;
  const int j = edge.second;
  if (graph.is_leader(k) || graph.is_leader(j)) {
    throw std::invalid_argument("assign_ff_leaders: edge is not in E_ff");
  }
  const std::vector<int> nk = neighbors(graph, k);
  const std::vector<int> nj = neighbors(graph, j);

  // Eligible: leaders adjacent to one follower but not the other; the
  // lowest index wins so repeated calls agree.
  auto eligible = [&](const std::vector<int>& own,
                      const std::vector<int>& other) {
    std::vector<int> out;
    for (int v : own) {
      if (graph.is_leader(v) &&
          !std::binary_search(other.begin(), other.end(), v)) {
        out.push_back(v);
      }
    }
    return out;  // sorted since `own` is sorted
  };
  const std::vector<int> cand_k = eligible(nk, nj);
  const std::vector<int> cand_j = eligible(nj, nk);
  if (cand_k.empty() || cand_j.empty()) {
    throw std::runtime_error(
        "no distinct leader pair for follower-follower edge (" +
        std::to_string(k) + "," + std::to_string(j) + ")");
  }
  FfLeaderAssignment out;
  out.edge = edge;
  out.leader_k = cand_k.front();
  out.leader_j = cand_j.front();
  if (out.leader_k == out.leader_j) {
    // Exclusive sets are disjoint by construction, so this cannot happen;
    // keep the check as a guard for future edits.
    throw std::logic_error("ff leader assignment produced equal leaders");
  }
  return out;
}

}  // namespace ddcbf
