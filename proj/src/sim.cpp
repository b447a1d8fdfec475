#include "ddcbf/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ddcbf {

void Scenario::validate() const {
  if (dim <= 0) throw std::invalid_argument("scenario: dim must be positive");
  if (sim_dt <= 0.0) throw std::invalid_argument("scenario: sim dt must be positive");
  if (gamma <= 0.0) throw std::invalid_argument("scenario: gamma must be positive");
  if (eps <= 0.0) throw std::invalid_argument("scenario: eps must be positive");
  if (rho <= 0.0) throw std::invalid_argument("scenario: rho must be positive");
  if (d_max <= 0.0) throw std::invalid_argument("scenario: d_max must be positive");
  if (initial_state.size() != dim * graph.num_agents()) {
    throw std::invalid_argument("scenario: initial state has wrong length");
  }
  for (int leader : graph.leaders()) {
    auto it = leader_targets.find(leader);
    if (it == leader_targets.end() || it->second.size() != dim) {
      throw std::invalid_argument("scenario: missing target for leader " +
                                  std::to_string(leader));
    }
  }
  for (const auto& [edge, beta] : beta_overrides) {
    if (!graph.has_edge(edge.first, edge.second)) {
      throw std::invalid_argument("scenario: beta override for unknown edge");
    }
    if (beta < 0.0 || beta > 1.0) {
      throw std::invalid_argument("scenario: beta must lie in [0,1]");
    }
  }
  make_model();       // checks displacement map
  make_candidates();  // checks ff leader eligibility (Assumption 4)
}

ConsensusModel Scenario::make_model() const {
  return ConsensusModel(graph, dim, desired_disp, state_box,
                        Box{input_box.lo, input_box.hi});
}

std::vector<BarrierCandidate> Scenario::make_candidates() const {
  return ddcbf::make_candidates(graph, d_max);
}

BetaSplit Scenario::beta_for(const Edge& e) const {
  auto it = beta_overrides.find(e);
  const double bk = it != beta_overrides.end() ? it->second : beta_default;
  return {bk, 1.0 - bk};
}

Eigen::VectorXd nominal_input(const Scenario& scn, const Eigen::VectorXd& x,
                              int leader) {
  if (!scn.graph.is_leader(leader)) {
    throw std::invalid_argument("nominal_input: agent " +
                                std::to_string(leader) + " is not a leader");
  }
  const Eigen::VectorXd xl = x.segment(scn.dim * leader, scn.dim);
  return -scn.k_p * (xl - scn.leader_targets.at(leader));
}

namespace {

enum class EdgeClass { Lf, Ll, Ff };

EdgeClass classify_candidate(const CommGraph& g, const BarrierCandidate& c) {
  if (c.variant != BarrierVariant::Pair) return EdgeClass::Ff;
  const bool a = g.is_leader(c.edge.first);
  const bool b = g.is_leader(c.edge.second);
  if (a && b) return EdgeClass::Ll;
  if (a != b) return EdgeClass::Lf;
  throw std::invalid_argument("pair candidate on follower-follower edge");
}

Eigen::VectorXd clip(const Eigen::VectorXd& v, const InputBox& box) {
  return v.cwiseMax(box.lo).cwiseMin(box.hi);
}

}  // namespace

RunResult run_closed_loop(const Scenario& scn,
                          const std::vector<DerivativeDataset>& datasets,
                          const std::vector<JacobianBounds>& bounds,
                          bool filter_enabled) {
  scn.validate();
  if (filter_enabled && (datasets.size() != bounds.size())) {
    throw std::invalid_argument("run_closed_loop: datasets/bounds mismatch");
  }
  const ConsensusModel model = scn.make_model();
  const int n = scn.dim;
  const int m = scn.dim;
  const int M = scn.graph.num_agents();
  const std::vector<int>& leaders = scn.graph.leaders();
  const KInfFunction alpha = scn.alpha();
  const double warmup = 0.1;

  std::vector<const DerivativeDataset*> ds;
  std::vector<EdgeClass> classes;
  std::vector<BarrierCandidate> candidates;
  if (filter_enabled) {
    for (const auto& d : datasets) {
      ds.push_back(&d);
      classes.push_back(classify_candidate(scn.graph, d.candidate));
      candidates.push_back(d.candidate);
    }
  } else {
    for (const BarrierCandidate& c : scn.make_candidates()) {
      candidates.push_back(c);
      classes.push_back(classify_candidate(scn.graph, c));
    }
  }
  const int nc = static_cast<int>(candidates.size());

  const int steps = static_cast<int>(std::round(scn.sim_horizon / scn.sim_dt));
  if (steps < 1) throw std::invalid_argument("run_closed_loop: horizon < dt");

  RunResult out;
  out.candidates = candidates;
  out.h_series.assign(nc, {});
  out.trajectory.dt = scn.sim_dt;

  QpSettings qp_settings;
  Eigen::VectorXd x = scn.initial_state;
  Eigen::VectorXd u_prev;

  for (int t = 0; t <= steps; ++t) {
    const double time = t * scn.sim_dt;

    std::vector<double> h(nc);
    for (int c = 0; c < nc; ++c) {
      try {
        h[c] = eval_candidate(candidates[c], x, n, scn.eps);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("run aborted at t=" + std::to_string(time) +
                                 ": " + e.what());
      }
      out.h_series[c].push_back(h[c]);
    }
    if (t > 0) {
      bool violated = false;
      for (double v : h) violated = violated || v < 0.0;
      if (violated) {
        out.metrics.violation_count++;
        out.metrics.violation_flag = true;
      }
    }
    if (time >= warmup - 1e-12) {
      for (double v : h) {
        out.metrics.min_h_after_warmup =
            std::min(out.metrics.min_h_after_warmup, v);
      }
    }

    out.trajectory.times.push_back(time);
    out.trajectory.states.push_back(x);
    if (t == steps) {
      out.trajectory.inputs.push_back(Eigen::VectorXd::Zero(m * M));
      out.nominal_inputs.push_back(Eigen::VectorXd::Zero(m * M));
      break;
    }

    Eigen::VectorXd u_nom = Eigen::VectorXd::Zero(m * M);
    for (int leader : leaders) {
      u_nom.segment(m * leader, m) = nominal_input(scn, x, leader);
    }

    Eigen::VectorXd u = u_nom;
    if (filter_enabled) {
      std::map<int, std::vector<LocalConstraint>> per_leader;
      for (int leader : leaders) per_leader[leader] = {};

      for (int c = 0; c < nc; ++c) {
        const DerivativeDataset& d = *ds[c];
        const BetaSplit split = scn.beta_for(candidates[c].edge);
        switch (classes[c]) {
          case EdgeClass::Lf: {
            const IndexSelection sel = select_index_pair(d, bounds[c], x, n);
            LocalConstraint lc =
                assemble_lf(scn.graph, d, bounds[c], sel, alpha, x, n);
            per_leader[lc.leader].push_back(std::move(lc));
            break;
          }
          case EdgeClass::Ll: {
            const IndexSelection sel = select_index_pair(d, bounds[c], x, n);
            auto [ck, cj] = assemble_ll(scn.graph, d, bounds[c], sel, alpha,
                                        split, x, n);
            per_leader[ck.leader].push_back(std::move(ck));
            per_leader[cj.leader].push_back(std::move(cj));
            break;
          }
          case EdgeClass::Ff: {
            const auto sel = select_index_ff(d, bounds[c], x, n,
                                             *candidates[c].ff_leaders, scn.eps);
            if (!sel) {
              out.metrics.selection_failures++;
              break;  // no admissible anchor; the run relies on slack
            }
            auto [ck, cj] = assemble_ff(scn.graph, d, bounds[c], *sel, alpha,
                                        split, x, n, scn.eps);
            per_leader[ck.leader].push_back(std::move(ck));
            per_leader[cj.leader].push_back(std::move(cj));
            break;
          }
        }
      }

      for (int leader : leaders) {
        const Eigen::VectorXd unl = u_nom.segment(m * leader, m);
        const auto& cons = per_leader[leader];
        Eigen::VectorXd ustar;
        if (cons.empty()) {
          ustar = clip(unl, scn.input_box);
        } else {
          const QpProblem prob =
              build_safety_filter(unl, cons, scn.rho, scn.input_box);
          const QpSolution sol = solve(prob, qp_settings);
          if (sol.status == QpStatus::InfeasibleDetected ||
              std::max(sol.primal_residual, sol.dual_residual) > 1e-3) {
            throw std::runtime_error(
                "run aborted at t=" + std::to_string(time) +
                ": safety filter QP failed for leader " +
                std::to_string(leader));
          }
          ustar = sol.primal.head(m);
        }
        u.segment(m * leader, m) = ustar;
      }
    }

    out.metrics.control_cost += 0.5 * (u - u_nom).squaredNorm();
    if (u_prev.size() == u.size()) {
      out.metrics.input_total_variation += (u - u_prev).cwiseAbs().sum();
    }
    u_prev = u;

    out.trajectory.inputs.push_back(u);
    out.nominal_inputs.push_back(u_nom);
    x = step(model, x, u, scn.sim_dt);
  }
  return out;
}

std::vector<DerivativeDataset> build_datasets(const Scenario& scn,
                                              const DatasetConfig& cfg,
                                              DatasetBuildInfo* info) {
  const ConsensusModel model = scn.make_model();
  const std::vector<BarrierCandidate> candidates = scn.make_candidates();
  std::vector<GeneratedDataset> gen = generate(model, candidates, cfg, scn.eps);

  std::vector<DerivativeDataset> out;
  out.reserve(gen.size());
  for (auto& g : gen) {
    const int raw = static_cast<int>(g.dataset.size());
    DerivativeDataset filtered =
        filter_feasible(g.dataset, scn.alpha(), g.h_values);
    const int kept = static_cast<int>(filtered.size());
    if (kept == 0) {
      throw std::runtime_error("no feasible samples for candidate " +
                               g.dataset.candidate.label());
    }
    const int k = std::min(cfg.kmeans_k, kept);
    DerivativeDataset reduced = kmeans_reduce(filtered, k, cfg.seed);
    if (info) {
      info->labels.push_back(g.dataset.candidate.label());
      info->raw_count.push_back(raw);
      info->filtered_count.push_back(kept);
      info->reduced_count.push_back(static_cast<int>(reduced.size()));
    }
    out.push_back(std::move(reduced));
  }
  return out;
}

std::vector<JacobianBounds> fit_all_bounds(
    const std::vector<DerivativeDataset>& datasets, double scale_factor) {
  std::vector<JacobianBounds> out;
  out.reserve(datasets.size());
  for (const auto& ds : datasets) {
    out.push_back(scale(estimate(ds), scale_factor));
  }
  return out;
}

std::vector<StudyRow> run_study(const Scenario& scn, const StudyConfig& cfg) {
  if (cfg.seeds.empty()) throw std::invalid_argument("run_study: need seeds");

  struct Task {
    int entry;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int e = 0; e < static_cast<int>(cfg.entries.size()); ++e) {
    for (std::uint64_t s : cfg.seeds) tasks.push_back({e, s});
  }

  struct Outcome {
    bool ok = false;
    RunMetrics metrics;
  };
  std::vector<Outcome> outcomes(tasks.size());

  auto run_one = [&](const Task& task) {
    Outcome o;
    try {
      Scenario s = scn;
      s.sim_dt = cfg.sim_dt;
      s.sim_horizon = cfg.sim_horizon;
      s.dataset.n_sims = cfg.entries[task.entry].n_sims;
      s.dataset.seed = task.seed;
      s.bound_scale = cfg.entries[task.entry].bound_scale;
      const auto datasets = build_datasets(s, s.dataset);
      const auto bounds = fit_all_bounds(datasets, s.bound_scale);
      const RunResult res = run_closed_loop(s, datasets, bounds, true);
      o.metrics = res.metrics;
      o.ok = true;
    } catch (const std::exception&) {
      o.ok = false;
    }
    return o;
  };

  std::atomic<std::size_t> next{0};
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(tasks.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        outcomes[i] = run_one(tasks[i]);
      }
    });
  }
  for (auto& th : pool) th.join();

  std::vector<StudyRow> rows;
  for (int e = 0; e < static_cast<int>(cfg.entries.size()); ++e) {
    StudyRow row;
    row.n_sims = cfg.entries[e].n_sims;
    row.bound_scale = cfg.entries[e].bound_scale;
    double cost_sum = 0.0;
    double minh_sum = 0.0;
    int minh_count = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].entry != e) continue;
      row.runs++;
      if (!outcomes[i].ok) {
        row.failed_runs++;
        continue;
      }
      const RunMetrics& mm = outcomes[i].metrics;
      cost_sum += mm.control_cost;
      row.violation_instants += mm.violation_count;
      if (mm.violation_flag) {
        row.violating_runs++;
      } else {
        minh_sum += mm.min_h_after_warmup;
        minh_count++;
      }
    }
    const int completed = row.runs - row.failed_runs;
    row.mean_cost = completed > 0 ? cost_sum / completed : 0.0;
    row.min_h_defined = minh_count > 0;
    row.mean_min_h = row.min_h_defined ? minh_sum / minh_count : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ddcbf
