#include "ddcbf/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ddcbf/random.hpp"

namespace ddcbf {

double central_diff(double h_prev, double h_next, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("central_diff: dt must be positive");
  return (h_next - h_prev) / (2.0 * dt);
}

std::vector<GeneratedDataset> generate(
    const SystemModel& model, const std::vector<BarrierCandidate>& candidates,
    const DatasetConfig& cfg, double eps) {
  if (cfg.n_sims < 1) throw std::invalid_argument("generate: n_sims must be >= 1");
  if (cfg.horizon < 3.0 * cfg.dt - 1e-12) {
    throw std::invalid_argument(
        "generate: horizon too short for central differences (< 3 dt)");
  }

  const int n = model.state_dim();
  const int m = model.input_dim();
  const int M = model.num_agents();

  std::vector<GeneratedDataset> out(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out[c].dataset.candidate = candidates[c];
    out[c].dataset.seed = cfg.seed;
  }

  for (int r = 0; r < cfg.n_sims; ++r) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));

    Eigen::VectorXd x0(n * M);
    for (int i = 0; i < x0.size(); ++i) {
      x0[i] = rng.uniform(cfg.box_lo, cfg.box_hi);
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m * M);
    for (int leader : model.graph().leaders()) {
      for (int c = 0; c < m; ++c) {
        u[m * leader + c] = rng.uniform(cfg.box_lo, cfg.box_hi);
      }
    }

    const Trajectory traj = rollout(
        model, x0, [&u](double) { return u; }, cfg.horizon, cfg.dt);
    const int T = static_cast<int>(traj.times.size());

    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const BarrierCandidate& cand = candidates[c];
      // h along the whole rollout; NaN marks degenerate evaluations.
      std::vector<double> h(T);
      for (int t = 0; t < T; ++t) {
        try {
          h[t] = eval_candidate(cand, traj.states[t], n, eps);
        } catch (const std::runtime_error&) {
          h[t] = std::numeric_limits<double>::quiet_NaN();
        }
      }
      for (int t = 1; t + 1 < T; ++t) {
        if (std::isnan(h[t - 1]) || std::isnan(h[t]) || std::isnan(h[t + 1])) {
          continue;
        }
        DataSample s;
        s.hdot = central_diff(h[t - 1], h[t + 1], cfg.dt);
        s.x_block = gather(traj.states[t], cand.hdot_members, n);
        s.u_block = gather(traj.inputs[t], cand.members, m);
        out[c].dataset.samples.push_back(std::move(s));
        out[c].h_values.push_back(h[t]);
      }
    }
  }
  return out;
}

DerivativeDataset filter_feasible(const DerivativeDataset& ds,
                                  const KInfFunction& alpha,
                                  const std::vector<double>& h_values) {
  if (h_values.size() != ds.samples.size()) {
    throw std::invalid_argument("filter_feasible: misaligned h_values");
  }
  DerivativeDataset out;
  out.candidate = ds.candidate;
  out.seed = ds.seed;
  out.config_hash = ds.config_hash;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].hdot + alpha(h_values[i]) >= 0.0) {
      out.samples.push_back(ds.samples[i]);
    }
  }
  return out;
}

DerivativeDataset kmeans_reduce(const DerivativeDataset& ds, int k,
                                std::uint64_t seed) {
  const int N = static_cast<int>(ds.samples.size());
  if (k < 1) throw std::invalid_argument("kmeans_reduce: k must be >= 1");
  if (k > N) throw std::invalid_argument("kmeans_reduce: k exceeds sample count");

  const int dx = static_cast<int>(ds.samples.front().x_block.size());
  const int du = static_cast<int>(ds.samples.front().u_block.size());
  const int dim = dx + du;

  Eigen::MatrixXd feats(N, dim);
  for (int i = 0; i < N; ++i) {
    feats.row(i).head(dx) = ds.samples[i].x_block.transpose();
    feats.row(i).tail(du) = ds.samples[i].u_block.transpose();
  }

  // k-means++ seeding.
  Rng rng(mix_seed(seed, 0x6b6d65616e73ULL));
  std::vector<int> center_ids;
  center_ids.push_back(static_cast<int>(rng.next_below(N)));
  Eigen::VectorXd dist2 =
      (feats.rowwise() - feats.row(center_ids[0])).rowwise().squaredNorm();
  while (static_cast<int>(center_ids.size()) < k) {
    const double total = dist2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.next_below(N));
    } else {
      const double r = rng.next_unit() * total;
      double acc = 0.0;
      pick = N - 1;
      for (int i = 0; i < N; ++i) {
        acc += dist2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    center_ids.push_back(pick);
    dist2 = dist2.cwiseMin(
        (feats.rowwise() - feats.row(pick)).rowwise().squaredNorm());
  }

  Eigen::MatrixXd centers(k, dim);
  for (int c = 0; c < k; ++c) centers.row(c) = feats.row(center_ids[c]);

  // Lloyd iterations; ties go to the lowest center index.
  std::vector<int> assign(N, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best = 0;
      double best_d = (feats.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (feats.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    centers.setZero();
    std::vector<int> counts(k, 0);
    for (int i = 0; i < N; ++i) {
      centers.row(assign[i]) += feats.row(i);
      counts[assign[i]]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) /= counts[c];
      } else {
        centers.row(c) = feats.row(center_ids[c]);  // keep stale seed point
      }
    }
  }

  // Representative per non-empty cluster: the original sample nearest the
  // centroid, lowest index on ties.
  DerivativeDataset out;
  out.candidate = ds.candidate;
  out.seed = ds.seed;
  out.config_hash = ds.config_hash;
  for (int c = 0; c < k; ++c) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
      if (assign[i] != c) continue;
      const double d = (feats.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best >= 0) out.samples.push_back(ds.samples[best]);
  }
  return out;
}

}  // namespace ddcbf
