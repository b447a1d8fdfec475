#include <doctest.h>

#include <set>
#include <unsupported/Eigen/MatrixFunctions>

#include "ddcbf/data.hpp"
#include "ddcbf/random.hpp"

using namespace ddcbf;

namespace {

CommGraph case_a_graph() {
  return CommGraph(4, {0, 3}, {{0, 1}, {0, 2}, {2, 3}, {0, 3}});
}

ConsensusModel case_a_model() {
  const CommGraph g = case_a_graph();
  std::map<Edge, Eigen::VectorXd> disp;
  for (const Edge& e : g.edges()) {
    disp[e] = Eigen::VectorXd::Constant(1, 1.0);
  }
  return ConsensusModel(g, 1, std::move(disp));
}

ConsensusModel case_b_model() {
  CommGraph g(4, {0, 3}, {{0, 1}, {1, 2}, {2, 3}});
  std::map<Edge, Eigen::VectorXd> disp;
  disp[{0, 1}] = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
  disp[{1, 2}] = (Eigen::VectorXd(2) << 2.0, 1.0).finished();
  disp[{2, 3}] = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  return ConsensusModel(std::move(g), 2, std::move(disp));
}

bool same_sample(const DataSample& a, const DataSample& b) {
  return a.hdot == b.hdot && a.x_block == b.x_block && a.u_block == b.u_block;
}

DerivativeDataset scalar_dataset(const std::vector<double>& feats,
                                 const std::vector<double>& hdots) {
  DerivativeDataset ds;
  ds.candidate.variant = BarrierVariant::Pair;
  ds.candidate.members = {0};
  ds.candidate.hdot_members = {0};
  for (std::size_t i = 0; i < feats.size(); ++i) {
    DataSample s;
    s.hdot = hdots[i];
    s.x_block = Eigen::VectorXd::Constant(1, feats[i]);
    s.u_block = Eigen::VectorXd::Zero(1);
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("central_diff") {
  CHECK(central_diff(1.0, 3.0, 1.0) == 1.0);
  CHECK(central_diff(4.2, 4.2, 0.3) == 0.0);
  // exact on quadratics: h(t) = t^2 at t = 1
  const double dt = 0.01;
  const double h_prev = (1.0 - dt) * (1.0 - dt);
  const double h_next = (1.0 + dt) * (1.0 + dt);
  CHECK(central_diff(h_prev, h_next, dt) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS(central_diff(0.0, 1.0, 0.0));
}

TEST_CASE("generate: sample counts per rollout") {
  const ConsensusModel model = case_a_model();
  const auto cands = make_candidates(case_a_graph(), 3.0);

  DatasetConfig cfg;
  cfg.n_sims = 5;
  cfg.horizon = 1.0;
  cfg.dt = 0.01;
  cfg.seed = 3;
  auto out = generate(model, cands, cfg, 0.1);
  REQUIRE(out.size() == cands.size());
  for (const auto& g : out) {
    CHECK(g.dataset.size() <= 5 * 99);
    CHECK(g.dataset.size() > 0);
    CHECK(g.h_values.size() == g.dataset.size());
  }

  // 2-D case: 0.01 s at 0.001 s sampling -> at most 9 interior points
  const ConsensusModel mb = case_b_model();
  const auto cb = make_candidates(mb.graph(), 3.0);
  DatasetConfig cfg_b;
  cfg_b.n_sims = 4;
  cfg_b.horizon = 0.01;
  cfg_b.dt = 0.001;
  cfg_b.seed = 4;
  for (const auto& g : generate(mb, cb, cfg_b, 0.1)) {
    CHECK(g.dataset.size() <= 4 * 9);
  }

  // shortest admissible horizon
  DatasetConfig tiny = cfg;
  tiny.n_sims = 1;
  tiny.horizon = 3 * cfg.dt;
  for (const auto& g : generate(model, cands, tiny, 0.1)) {
    CHECK(g.dataset.size() == 2);  // interior points of a 4-point rollout
  }
  tiny.horizon = 2.9 * cfg.dt;
  CHECK_THROWS(generate(model, cands, tiny, 0.1));
  tiny.horizon = 1.0;
  tiny.n_sims = 0;
  CHECK_THROWS(generate(model, cands, tiny, 0.1));
}

TEST_CASE("generate is deterministic and blocks are laid out per candidate") {
  const ConsensusModel model = case_a_model();
  const auto cands = make_candidates(case_a_graph(), 3.0);
  DatasetConfig cfg;
  cfg.n_sims = 3;
  cfg.horizon = 0.2;
  cfg.dt = 0.01;
  cfg.seed = 42;

  const auto a = generate(model, cands, cfg, 0.1);
  const auto b = generate(model, cands, cfg, 0.1);
  REQUIRE(a.size() == b.size());
  for (std::size_t c = 0; c < a.size(); ++c) {
    REQUIRE(a[c].dataset.size() == b[c].dataset.size());
    for (std::size_t i = 0; i < a[c].dataset.size(); ++i) {
      CHECK(same_sample(a[c].dataset.samples[i], b[c].dataset.samples[i]));
    }
    const BarrierCandidate& cand = cands[c];
    CHECK(a[c].dataset.samples[0].x_block.size() ==
          static_cast<int>(cand.hdot_members.size()));
    CHECK(a[c].dataset.samples[0].u_block.size() ==
          static_cast<int>(cand.members.size()));
  }

  DatasetConfig other = cfg;
  other.seed = 43;
  const auto d = generate(model, cands, other, 0.1);
  bool any_diff = false;
  for (std::size_t i = 0; i < d[0].dataset.size(); ++i) {
    any_diff = any_diff || !same_sample(d[0].dataset.samples[i],
                                        a[0].dataset.samples[i]);
  }
  CHECK(any_diff);
}

TEST_CASE("central differences track the analytic derivative at O(dt^2)") {
  // Samples from the exact flow (matrix exponential), so the only error is
  // the central-difference truncation.
  const ConsensusModel model = case_a_model();
  const int N = 4;
  Eigen::VectorXd u(N);
  u << 1.3, 0.0, 0.0, -2.1;
  const Eigen::VectorXd b0 = model.state_derivative(Eigen::VectorXd::Zero(N), u);
  Eigen::MatrixXd A(N, N);
  for (int c = 0; c < N; ++c) {
    A.col(c) = model.state_derivative(Eigen::VectorXd::Unit(N, c), u) - b0;
  }
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(N + 1, N + 1);
  aug.topLeftCorner(N, N) = A;
  aug.topRightCorner(N, 1) = b0;

  const auto cands = make_candidates(case_a_graph(), 3.0);
  const BarrierCandidate& cand = cands[0];
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(N);
    for (int i = 0; i < N; ++i) x[i] = rng.uniform(-4, 4);

    const auto fitted_c = [&](double dt) {
      const Eigen::MatrixXd flow = (dt * aug).exp();
      Eigen::VectorXd z(N + 1);
      z << x, 1.0;
      const Eigen::VectorXd fwd = (flow * z).head(N);
      const Eigen::VectorXd bwd = (flow.inverse() * z).head(N);
      const double hp = eval_candidate(cand, fwd, 1, 0.1);
      const double hm = eval_candidate(cand, bwd, 1, 0.1);
      const double fd = central_diff(hm, hp, dt);
      const double exact = analytic_hdot(cand, model, x, u, 0.1);
      return std::abs(fd - exact) / (dt * dt);
    };
    const double c2 = fitted_c(1e-2);
    const double c3 = fitted_c(1e-3);
    const double scale = std::max({c2, c3, 1e-4});
    CHECK(std::abs(c2 - c3) / scale < 0.75);  // same constant, both dt
  }
}

TEST_CASE("filter_feasible") {
  const KInfFunction alpha{1.0};
  DerivativeDataset ds = scalar_dataset({0, 1, 2}, {-5.0, 0.0, 3.0});
  const std::vector<double> h{1.0, 0.0, 2.0};

  const DerivativeDataset kept = filter_feasible(ds, alpha, h);
  REQUIRE(kept.size() == 2);  // -5 + 1 < 0 dropped; 0 + 0 kept (boundary)
  CHECK(kept.samples[0].hdot == 0.0);
  CHECK(kept.samples[1].hdot == 3.0);

  // all-feasible dataset passes through unchanged
  const DerivativeDataset all = scalar_dataset({0, 1}, {1.0, 2.0});
  const DerivativeDataset same = filter_feasible(all, alpha, {0.0, 0.0});
  CHECK(same.size() == 2);

  // idempotence: filtering the kept set with its own h values
  const DerivativeDataset again = filter_feasible(kept, alpha, {0.0, 2.0});
  CHECK(again.size() == kept.size());

  CHECK_THROWS(filter_feasible(ds, alpha, {1.0}));
}

namespace {

/// Independent re-implementation of the documented reduction algorithm
/// (k-means++ seeding from the same stream, Lloyd with lowest-index
/// tie-breaks, nearest-to-centroid representatives).
std::vector<int> oracle_reduce_indices(const DerivativeDataset& ds, int k,
                                       std::uint64_t seed) {
  const int N = static_cast<int>(ds.samples.size());
  const int dx = static_cast<int>(ds.samples.front().x_block.size());
  const int du = static_cast<int>(ds.samples.front().u_block.size());
  std::vector<Eigen::VectorXd> f(N);
  for (int i = 0; i < N; ++i) {
    f[i].resize(dx + du);
    f[i] << ds.samples[i].x_block, ds.samples[i].u_block;
  }
  Rng rng(mix_seed(seed, 0x6b6d65616e73ULL));
  std::vector<int> seeds_idx{static_cast<int>(rng.next_below(N))};
  std::vector<double> d2(N);
  for (int i = 0; i < N; ++i) d2[i] = (f[i] - f[seeds_idx[0]]).squaredNorm();
  while (static_cast<int>(seeds_idx.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.next_below(N));
    } else {
      const double r = rng.next_unit() * total;
      double acc = 0.0;
      pick = N - 1;
      for (int i = 0; i < N; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    seeds_idx.push_back(pick);
    for (int i = 0; i < N; ++i) {
      d2[i] = std::min(d2[i], (f[i] - f[pick]).squaredNorm());
    }
  }
  std::vector<Eigen::VectorXd> centers(k);
  for (int c = 0; c < k; ++c) centers[c] = f[seeds_idx[c]];
  std::vector<int> assign(N, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best = 0;
      double bd = (f[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (f[i] - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(dx + du));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < N; ++i) {
      sums[assign[i]] += f[i];
      counts[assign[i]]++;
    }
    for (int c = 0; c < k; ++c) {
      centers[c] = counts[c] > 0 ? Eigen::VectorXd(sums[c] / counts[c])
                                 : f[seeds_idx[c]];
    }
  }
  std::vector<int> reps;
  for (int c = 0; c < k; ++c) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
      if (assign[i] != c) continue;
      const double d = (f[i] - centers[c]).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    if (best >= 0) reps.push_back(best);
  }
  return reps;
}

}  // namespace

TEST_CASE("kmeans_reduce") {
  // perfectly separated clusters
  DerivativeDataset ds = scalar_dataset({0, 0, 10, 10}, {1, 2, 3, 4});
  const DerivativeDataset red = kmeans_reduce(ds, 2, 5);
  REQUIRE(red.size() == 2);
  std::set<double> feats{red.samples[0].x_block[0], red.samples[1].x_block[0]};
  CHECK(feats == std::set<double>{0.0, 10.0});

  // k equal to the sample count returns everything (distinct features)
  DerivativeDataset distinct = scalar_dataset({0, 3, 7, 10}, {1, 2, 3, 4});
  const DerivativeDataset all = kmeans_reduce(distinct, 4, 5);
  CHECK(all.size() == 4);

  CHECK_THROWS(kmeans_reduce(ds, 5, 5));
  CHECK_THROWS(kmeans_reduce(ds, 0, 5));

  // reduced set is a subset of the original
  Rng rng(17);
  std::vector<double> feats200, hd200;
  for (int i = 0; i < 200; ++i) {
    feats200.push_back(rng.uniform(-5, 5));
    hd200.push_back(rng.uniform(-1, 1));
  }
  DerivativeDataset big = scalar_dataset(feats200, hd200);
  const DerivativeDataset r50 = kmeans_reduce(big, 50, 99);
  CHECK(r50.size() <= 50);
  for (const auto& s : r50.samples) {
    bool found = false;
    for (const auto& o : big.samples) found = found || same_sample(s, o);
    CHECK(found);
  }

  // cross-check against the independent implementation
  const std::vector<int> reps = oracle_reduce_indices(big, 50, 99);
  REQUIRE(r50.size() == reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    CHECK(same_sample(r50.samples[i], big.samples[reps[i]]));
  }

  // determinism
  const DerivativeDataset r50b = kmeans_reduce(big, 50, 99);
  REQUIRE(r50b.size() == r50.size());
  for (std::size_t i = 0; i < r50.size(); ++i) {
    CHECK(same_sample(r50.samples[i], r50b.samples[i]));
  }
}
