#include "ddcbf/certify.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ddcbf {

namespace {

/// Interval lower bound of J . delta over one agent's state block:
/// sum_c min(lo_c d_c, hi_c d_c), equal to Jlo . d+ - Jhi . d-.
double state_term(const BarrierCandidate& cand, const JacobianBounds& b,
                  const DataSample& sample, const Eigen::VectorXd& x, int n,
                  int agent) {
  const int pos = cand.hdot_member_index(agent);
  if (pos < 0) throw std::logic_error("state_term: agent not in I_hdot");
  double acc = 0.0;
  for (int c = 0; c < n; ++c) {
    const int bi = pos * n + c;
    const double d = x[n * agent + c] - sample.x_block[bi];
    acc += std::min(b.lower_x[bi] * d, b.upper_x[bi] * d);
  }
  return acc;
}

double score_sample(const BarrierCandidate& cand, const JacobianBounds& b,
                    const DataSample& sample, const Eigen::VectorXd& x,
                    int n) {
  double s = sample.hdot;
  for (int agent : cand.hdot_members) {
    s += state_term(cand, b, sample, x, n, agent);
  }
  return s;
}

/// min over lambda in [0,1] of |a + lambda (b - a)|^2, from the endpoint
/// values and the interior critical point.
double min_segment_norm2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd d = b - a;
  double best = std::min(a.squaredNorm(), b.squaredNorm());
  const double dn2 = d.squaredNorm();
  if (dn2 > 0.0) {
    const double lambda = -a.dot(d) / dn2;
    if (lambda > 0.0 && lambda < 1.0) {
      best = std::min(best, (a + lambda * d).squaredNorm());
    }
  }
  return best;
}

LocalConstraint make_side(const BarrierCandidate& cand,
                          const JacobianBounds& b, const DataSample& sample,
                          const Eigen::VectorXd& x, int n, int m,
                          int input_leader, double beta, double hdot_anchor,
                          const std::vector<int>& shared,
                          const std::vector<int>& own, double alpha_h) {
  LocalConstraint out;
  out.leader = input_leader;
  double c0 = beta * hdot_anchor;
  for (int agent : shared) {
    c0 += beta * state_term(cand, b, sample, x, n, agent);
  }
  for (int agent : own) {
    c0 += state_term(cand, b, sample, x, n, agent);
  }
  out.const_term = c0;

  const int upos = cand.member_index(input_leader);
  if (upos < 0) throw std::logic_error("make_side: leader not in I_h");
  out.input_anchor = sample.u_block.segment(upos * m, m);
  out.slope_lo = b.lower_u.segment(upos * m, m);
  out.slope_hi = b.upper_u.segment(upos * m, m);
  out.rhs = -beta * alpha_h;
  return out;
}

void check_partition(const BarrierCandidate& cand,
                     std::initializer_list<const std::vector<int>*> groups) {
  std::set<int> seen;
  std::size_t total = 0;
  for (const auto* g : groups) {
    seen.insert(g->begin(), g->end());
    total += g->size();
  }
  if (total != seen.size() ||
      !std::equal(seen.begin(), seen.end(), cand.hdot_members.begin(),
                  cand.hdot_members.end())) {
    throw std::logic_error("constraint split does not partition I_hdot");
  }
}

}  // namespace

double LocalConstraint::lhs(const Eigen::VectorXd& u_leader) const {
  double acc = const_term;
  for (int c = 0; c < u_leader.size(); ++c) {
    const double d = u_leader[c] - input_anchor[c];
    acc += std::min(slope_lo[c] * d, slope_hi[c] * d);
  }
  return acc;
}

IndexSelection select_index_pair(const DerivativeDataset& ds,
                                 const JacobianBounds& b,
                                 const Eigen::VectorXd& x, int n) {
  if (ds.samples.empty()) {
    throw std::runtime_error("select_index_pair: empty dataset for " +
                             ds.candidate.label());
  }
  IndexSelection best{-1, 0.0};
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
    const double s = score_sample(ds.candidate, b, ds.samples[i], x, n);
    if (best.index < 0 || s > best.score) best = {i, s};
  }
  return best;
}

std::optional<IndexSelection> select_index_ff(const DerivativeDataset& ds,
                                              const JacobianBounds& b,
                                              const Eigen::VectorXd& x, int n,
                                              const FfLeaderAssignment& lead,
                                              double eps) {
  if (ds.samples.empty()) {
    throw std::runtime_error("select_index_ff: empty dataset for " +
                             ds.candidate.label());
  }
  const BarrierCandidate& cand = ds.candidate;
  const int plk = cand.hdot_member_index(lead.leader_k);
  const int plj = cand.hdot_member_index(lead.leader_j);
  const Eigen::VectorXd cur =
      x.segment(n * lead.leader_k, n) - x.segment(n * lead.leader_j, n);

  IndexSelection best{-1, 0.0};
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
    const DataSample& sm = ds.samples[i];
    const Eigen::VectorXd anchor =
        sm.x_block.segment(plk * n, n) - sm.x_block.segment(plj * n, n);
    if (min_segment_norm2(anchor, cur) < eps * eps) continue;
    const double s = score_sample(cand, b, sm, x, n);
    if (best.index < 0 || s > best.score) best = {i, s};
  }
  if (best.index < 0) return std::nullopt;
  return best;
}

LocalConstraint assemble_lf(const CommGraph& graph, const DerivativeDataset& ds,
                            const JacobianBounds& b, const IndexSelection& sel,
                            const KInfFunction& alpha, const Eigen::VectorXd& x,
                            int n) {
  const BarrierCandidate& cand = ds.candidate;
  if (cand.variant != BarrierVariant::Pair) {
    throw std::invalid_argument("assemble_lf: candidate is not a pair barrier");
  }
  if (sel.index < 0 || sel.index >= static_cast<int>(ds.samples.size())) {
    throw std::invalid_argument("assemble_lf: invalid selection");
  }
  const int k = cand.edge.first;
  const int j = cand.edge.second;
  const bool k_leads = graph.is_leader(k);
  const bool j_leads = graph.is_leader(j);
  if (k_leads == j_leads) {
    throw std::invalid_argument("assemble_lf: edge is not leader-follower");
  }
  const int leader = k_leads ? k : j;
  const DataSample& sample = ds.samples[sel.index];
  const int m = static_cast<int>(sample.u_block.size()) /
                static_cast<int>(cand.members.size());
  const double h = eval_candidate(cand, x, n, 0.0);

  // Single leader carries everything: beta = 1, all state terms shared.
  return make_side(cand, b, sample, x, n, m, leader, 1.0, sample.hdot,
                   cand.hdot_members, {}, alpha(h));
}

std::pair<LocalConstraint, LocalConstraint> assemble_ll(
    const CommGraph& graph, const DerivativeDataset& ds,
    const JacobianBounds& b, const IndexSelection& sel,
    const KInfFunction& alpha, const BetaSplit& split,
    const Eigen::VectorXd& x, int n) {
  const BarrierCandidate& cand = ds.candidate;
  if (cand.variant != BarrierVariant::Pair) {
    throw std::invalid_argument("assemble_ll: candidate is not a pair barrier");
  }
  if (std::abs(split.beta_k + split.beta_j - 1.0) > 1e-12 ||
      split.beta_k < 0.0 || split.beta_j < 0.0) {
    throw std::invalid_argument("assemble_ll: invalid beta split");
  }
  if (sel.index < 0 || sel.index >= static_cast<int>(ds.samples.size())) {
    throw std::invalid_argument("assemble_ll: invalid selection");
  }
  const int k = cand.edge.first;
  const int j = cand.edge.second;
  if (!graph.is_leader(k) || !graph.is_leader(j)) {
    throw std::invalid_argument("assemble_ll: edge is not leader-leader");
  }
  const DataSample& sample = ds.samples[sel.index];
  const int m = static_cast<int>(sample.u_block.size()) /
                static_cast<int>(cand.members.size());
  const double h = eval_candidate(cand, x, n, 0.0);
  const SharedExclusive se = shared_and_exclusive(graph, k, j);

  std::vector<int> own_k = se.only_k;
  own_k.push_back(k);
  std::vector<int> own_j = se.only_j;
  own_j.push_back(j);
  check_partition(cand, {&se.shared, &own_k, &own_j});

  LocalConstraint ck = make_side(cand, b, sample, x, n, m, k, split.beta_k,
                                 sample.hdot, se.shared, own_k, alpha(h));
  LocalConstraint cj = make_side(cand, b, sample, x, n, m, j, split.beta_j,
                                 sample.hdot, se.shared, own_j, alpha(h));
  return {ck, cj};
}

std::pair<LocalConstraint, LocalConstraint> assemble_ff(
    const CommGraph& graph, const DerivativeDataset& ds,
    const JacobianBounds& b, const IndexSelection& sel,
    const KInfFunction& alpha, const BetaSplit& split,
    const Eigen::VectorXd& x, int n, double eps) {
  const BarrierCandidate& cand = ds.candidate;
  if (cand.variant == BarrierVariant::Pair || !cand.ff_leaders) {
    throw std::invalid_argument(
        "assemble_ff: candidate is not a follower-follower barrier");
  }
  if (std::abs(split.beta_k + split.beta_j - 1.0) > 1e-12 ||
      split.beta_k < 0.0 || split.beta_j < 0.0) {
    throw std::invalid_argument("assemble_ff: invalid beta split");
  }
  if (sel.index < 0 || sel.index >= static_cast<int>(ds.samples.size())) {
    throw std::invalid_argument("assemble_ff: invalid selection");
  }
  const int k = cand.edge.first;
  const int j = cand.edge.second;
  const FfLeaderAssignment& lead = *cand.ff_leaders;
  const DataSample& sample = ds.samples[sel.index];
  const int m = static_cast<int>(sample.u_block.size()) /
                static_cast<int>(cand.members.size());
  const double h = eval_candidate(cand, x, n, eps);

  // Augmented neighbor sets over (follower, its leader) unions. The four
  // designated agents are removed so the side terms count each agent in
  // I_hdot exactly once.
  const auto nbrs = [&](int v) { return neighbors(graph, v); };
  std::set<int> left, right;
  for (int v : nbrs(k)) left.insert(v);
  for (int v : nbrs(lead.leader_k)) left.insert(v);
  for (int v : nbrs(j)) right.insert(v);
  for (int v : nbrs(lead.leader_j)) right.insert(v);
  const std::set<int> specials{k, j, lead.leader_k, lead.leader_j};

  std::vector<int> shared, only_k, only_j;
  for (int v : left) {
    if (specials.count(v)) continue;
    if (right.count(v)) {
      shared.push_back(v);
    } else {
      only_k.push_back(v);
    }
  }
  for (int v : right) {
    if (specials.count(v) || left.count(v)) continue;
    only_j.push_back(v);
  }

  std::vector<int> own_k = only_k;
  own_k.push_back(k);
  own_k.push_back(lead.leader_k);
  std::sort(own_k.begin(), own_k.end());
  std::vector<int> own_j = only_j;
  own_j.push_back(j);
  own_j.push_back(lead.leader_j);
  std::sort(own_j.begin(), own_j.end());
  check_partition(cand, {&shared, &own_k, &own_j});

  LocalConstraint ck =
      make_side(cand, b, sample, x, n, m, lead.leader_k, split.beta_k,
                sample.hdot, shared, own_k, alpha(h));
  LocalConstraint cj =
      make_side(cand, b, sample, x, n, m, lead.leader_j, split.beta_j,
                sample.hdot, shared, own_j, alpha(h));
  return {ck, cj};
}

}  // namespace ddcbf
