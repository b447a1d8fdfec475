#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ddcbf/bounds.hpp"
#include "ddcbf/certify.hpp"
#include "ddcbf/data.hpp"
#include "ddcbf/qp.hpp"

namespace ddcbf {

/// Everything a closed-loop run needs: the graph, consensus-model
/// parameters, barrier and controller settings, dataset generation
/// configuration and the bound scale applied after fitting.
struct Scenario {
  CommGraph graph;
  int dim = 1;
  std::map<Edge, Eigen::VectorXd> desired_disp;
  std::map<int, Eigen::VectorXd> leader_targets;
  double k_p = 1.0;

  double d_max = 3.0;
  double gamma = 1.0;
  double eps = 0.1;
  double rho = 100.0;
  double beta_default = 0.5;
  std::map<Edge, double> beta_overrides;  ///< beta for the canonical first endpoint

  DatasetConfig dataset;
  double bound_scale = 1.0;

  double sim_dt = 0.01;
  double sim_horizon = 5.0;
  Eigen::VectorXd initial_state;

  Box state_box{-10.0, 10.0};
  InputBox input_box{-50.0, 50.0};

  /// Validates cross-references (edges, leaders, dimensions) and
  /// Assumption-4 eligibility of every ff edge; throws on any defect.
  void validate() const;

  ConsensusModel make_model() const;
  std::vector<BarrierCandidate> make_candidates() const;
  KInfFunction alpha() const { return {gamma}; }
  BetaSplit beta_for(const Edge& e) const;
};

struct RunMetrics {
  double control_cost = 0.0;
  double min_h_after_warmup = std::numeric_limits<double>::infinity();
  int violation_count = 0;
  bool violation_flag = false;
  int selection_failures = 0;
  double input_total_variation = 0.0;  ///< chattering indicator
};

struct RunResult {
  Trajectory trajectory;                      ///< inputs = filtered inputs
  std::vector<Eigen::VectorXd> nominal_inputs;
  std::vector<BarrierCandidate> candidates;
  std::vector<std::vector<double>> h_series;  ///< [candidate][time point]
  RunMetrics metrics;
};

/// -k_p (x_l - target_l).
Eigen::VectorXd nominal_input(const Scenario& scn, const Eigen::VectorXd& x,
                              int leader);

/// Closed loop: at every step select anchor indices, assemble the
/// per-leader constraints, solve one safety filter per leader, apply the
/// inputs and integrate. Violations are counted over post-step instants;
/// the minimum barrier value excludes the first 0.1 s warm-up.
RunResult run_closed_loop(const Scenario& scn,
                          const std::vector<DerivativeDataset>& datasets,
                          const std::vector<JacobianBounds>& bounds,
                          bool filter_enabled = true);

struct DatasetBuildInfo {
  std::vector<std::string> labels;
  std::vector<int> raw_count;
  std::vector<int> filtered_count;
  std::vector<int> reduced_count;
};

/// generate -> filter_feasible -> kmeans_reduce for every candidate.
/// The reduction k is clamped to the filtered sample count.
std::vector<DerivativeDataset> build_datasets(const Scenario& scn,
                                              const DatasetConfig& cfg,
                                              DatasetBuildInfo* info = nullptr);

/// estimate() per candidate dataset, then scale.
std::vector<JacobianBounds> fit_all_bounds(
    const std::vector<DerivativeDataset>& datasets, double scale_factor);

struct StudyEntry {
  int n_sims = 0;
  double bound_scale = 1.0;
};

struct StudyConfig {
  std::vector<StudyEntry> entries;
  std::vector<std::uint64_t> seeds;
  double sim_dt = 0.01;
  double sim_horizon = 1.0;
};

struct StudyRow {
  int n_sims = 0;
  double bound_scale = 1.0;
  double mean_cost = 0.0;
  double mean_min_h = 0.0;
  bool min_h_defined = false;  ///< false when every run violated
  long violation_instants = 0;
  int violating_runs = 0;
  int failed_runs = 0;
  int runs = 0;
};

/// Dataset-size / bound-scale study: per entry and seed, regenerate the
/// datasets, fit and scale bounds, run the closed loop, and average the
/// metrics. Runs execute in parallel on isolated RNG streams; a failed run
/// is recorded, not fatal.
std::vector<StudyRow> run_study(const Scenario& scn, const StudyConfig& cfg);

}  // namespace ddcbf
