#include "ddcbf/barriers.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace ddcbf {

std::string to_string(BarrierVariant v) {
  switch (v) {
    case BarrierVariant::Pair: return "pair";
    case BarrierVariant::Parallel: return "parallel";
    case BarrierVariant::Orthogonal: return "orthogonal";
  }
  return "?";
}

BarrierVariant variant_from_string(const std::string& s) {
  if (s == "pair") return BarrierVariant::Pair;
  if (s == "parallel") return BarrierVariant::Parallel;
  if (s == "orthogonal") return BarrierVariant::Orthogonal;
  throw std::invalid_argument("unknown barrier variant: " + s);
}

std::string BarrierCandidate::label() const {
  return "e" + std::to_string(edge.first) + "-" + std::to_string(edge.second) +
         "_" + to_string(variant);
}

int BarrierCandidate::member_index(int agent) const {
  auto it = std::find(members.begin(), members.end(), agent);
  return it == members.end() ? -1
                             : static_cast<int>(it - members.begin());
}

int BarrierCandidate::hdot_member_index(int agent) const {
  auto it = std::find(hdot_members.begin(), hdot_members.end(), agent);
  return it == hdot_members.end() ? -1
                                  : static_cast<int>(it - hdot_members.begin());
}

namespace {

std::vector<int> sorted_union(std::initializer_list<std::vector<int>> sets) {
  std::set<int> acc;
  for (const auto& s : sets) acc.insert(s.begin(), s.end());
  return {acc.begin(), acc.end()};
}

BarrierCandidate make_pair_candidate(const CommGraph& graph, const Edge& e,
                                     double d_max) {
  BarrierCandidate c;
  c.edge = e;
  c.variant = BarrierVariant::Pair;
  c.d_max = d_max;
  c.members = {e.first, e.second};
  c.hdot_members = sorted_union(
      {{e.first, e.second}, neighbors(graph, e.first), neighbors(graph, e.second)});
  return c;
}

BarrierCandidate make_ff_candidate(const CommGraph& graph, const Edge& e,
                                   double d_max, BarrierVariant variant,
                                   const FfLeaderAssignment& lead) {
  BarrierCandidate c;
  c.edge = e;
  c.variant = variant;
  c.d_max = d_max;
  c.ff_leaders = lead;
  c.members =
      sorted_union({{e.first, e.second, lead.leader_k, lead.leader_j}});
  c.hdot_members = sorted_union({c.members,
                                 neighbors(graph, e.first),
                                 neighbors(graph, e.second),
                                 neighbors(graph, lead.leader_k),
                                 neighbors(graph, lead.leader_j)});
  return c;
}

}  // namespace

std::vector<BarrierCandidate> make_candidates(const CommGraph& graph,
                                              double d_max) {
  if (d_max <= 0.0) throw std::invalid_argument("d_max must be positive");
  std::vector<BarrierCandidate> out;
  const EdgePartition part = classify_edges(graph);
  for (const Edge& e : graph.edges()) {
    const bool is_ff = std::binary_search(part.ff.begin(), part.ff.end(), e);
    if (is_ff) {
      const FfLeaderAssignment lead = assign_ff_leaders(graph, e);
      out.push_back(
          make_ff_candidate(graph, e, d_max, BarrierVariant::Parallel, lead));
      out.push_back(
          make_ff_candidate(graph, e, d_max, BarrierVariant::Orthogonal, lead));
    } else {
      out.push_back(make_pair_candidate(graph, e, d_max));
    }
  }
  return out;
}

double eval_pair(const BarrierCandidate& c, const Eigen::VectorXd& x_k,
                 const Eigen::VectorXd& x_j) {
  if (c.variant != BarrierVariant::Pair) {
    throw std::invalid_argument("eval_pair on non-pair candidate");
  }
  return c.d_max * c.d_max - (x_k - x_j).squaredNorm();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> decompose(
    const Eigen::VectorXd& x_k, const Eigen::VectorXd& x_j,
    const Eigen::VectorXd& x_lk, const Eigen::VectorXd& x_lj, double eps) {
  const Eigen::VectorXd w = x_lk - x_lj;
  const double wn = w.norm();
  if (wn <= eps) {
    throw std::runtime_error("degenerate leader direction: separation " +
                             std::to_string(wn) + " <= eps");
  }
  const Eigen::VectorXd unit = w / wn;
  const Eigen::VectorXd rel = x_k - x_j;
  const Eigen::VectorXd par = rel.dot(unit) * unit;
  return {par, rel - par};
}

double eval_ff(const BarrierCandidate& c, const Eigen::VectorXd& x_k,
               const Eigen::VectorXd& x_j, const Eigen::VectorXd& x_lk,
               const Eigen::VectorXd& x_lj, double eps) {
  if (c.variant == BarrierVariant::Pair) {
    throw std::invalid_argument("eval_ff on pair candidate");
  }
  const auto [par, orth] = decompose(x_k, x_j, x_lk, x_lj, eps);
  const double half = 0.5 * c.d_max * c.d_max;
  return c.variant == BarrierVariant::Parallel ? half - par.squaredNorm()
                                               : half - orth.squaredNorm();
}

double eval_candidate(const BarrierCandidate& c, const Eigen::VectorXd& x,
                      int n, double eps) {
  const auto block = [&](int agent) { return x.segment(n * agent, n); };
  if (c.variant == BarrierVariant::Pair) {
    return eval_pair(c, block(c.edge.first), block(c.edge.second));
  }
  const FfLeaderAssignment& lead = *c.ff_leaders;
  return eval_ff(c, block(c.edge.first), block(c.edge.second),
                 block(lead.leader_k), block(lead.leader_j), eps);
}

Eigen::VectorXd candidate_gradient(const BarrierCandidate& c,
                                   const Eigen::VectorXd& x, int n,
                                   int num_agents, double eps) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n * num_agents);
  const auto block = [&](int agent) { return x.segment(n * agent, n); };
  const int k = c.edge.first;
  const int j = c.edge.second;

  if (c.variant == BarrierVariant::Pair) {
    const Eigen::VectorXd rel = block(k) - block(j);
    grad.segment(n * k, n) = -2.0 * rel;
    grad.segment(n * j, n) = 2.0 * rel;
    return grad;
  }

  const FfLeaderAssignment& lead = *c.ff_leaders;
  const Eigen::VectorXd w = block(lead.leader_k) - block(lead.leader_j);
  const double wn = w.norm();
  if (wn <= eps) {
    throw std::runtime_error("degenerate leader direction in gradient");
  }
  const Eigen::VectorXd unit = w / wn;
  const Eigen::VectorXd rel = block(k) - block(j);
  const double s = rel.dot(unit);
  const Eigen::VectorXd orth = rel - s * unit;

  // h_par = d^2/2 - s^2 with s = rel . unit; the unit vector couples the
  // leader states through d s / d w = orth / |w|.
  if (c.variant == BarrierVariant::Parallel) {
    grad.segment(n * k, n) = -2.0 * s * unit;
    grad.segment(n * j, n) = 2.0 * s * unit;
    grad.segment(n * lead.leader_k, n) = -2.0 * s * orth / wn;
    grad.segment(n * lead.leader_j, n) = 2.0 * s * orth / wn;
  } else {
    grad.segment(n * k, n) = -2.0 * orth;
    grad.segment(n * j, n) = 2.0 * orth;
    grad.segment(n * lead.leader_k, n) = 2.0 * s * orth / wn;
    grad.segment(n * lead.leader_j, n) = -2.0 * s * orth / wn;
  }
  return grad;
}

double analytic_hdot(const BarrierCandidate& c, const SystemModel& model,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                     double eps) {
  const Eigen::VectorXd grad =
      candidate_gradient(c, x, model.state_dim(), model.num_agents(), eps);
  return grad.dot(model.state_derivative(x, u));
}

}  // namespace ddcbf
