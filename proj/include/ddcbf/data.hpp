#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ddcbf/barriers.hpp"
#include "ddcbf/dynamics.hpp"

namespace ddcbf {

/// One derivative sample: dh/dt together with the states over I_hdot and
/// the inputs over I_h at the sampling instant.
struct DataSample {
  double hdot = 0.0;
  Eigen::VectorXd x_block;
  Eigen::VectorXd u_block;
};

struct DerivativeDataset {
  BarrierCandidate candidate;
  std::vector<DataSample> samples;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t size() const { return samples.size(); }
};

/// Dataset plus the barrier values at each sample's midpoint, needed for
/// feasibility filtering.
struct GeneratedDataset {
  DerivativeDataset dataset;
  std::vector<double> h_values;
};

struct DatasetConfig {
  int n_sims = 50;
  double horizon = 1.0;
  double dt = 0.01;
  double box_lo = -5.0;
  double box_hi = 5.0;
  int kmeans_k = 100;
  std::uint64_t seed = 0;
};

/// Randomized rollouts with i.i.d. uniform initial states and constant
/// per-rollout leader inputs; interior time points yield samples via
/// central differences. Rollout r uses the RNG stream (seed, r), so the
/// output is reproducible regardless of scheduling. Samples whose barrier
/// is degenerate at any of the three stencil points are skipped.
std::vector<GeneratedDataset> generate(
    const SystemModel& model, const std::vector<BarrierCandidate>& candidates,
    const DatasetConfig& cfg, double eps);

/// (h_next - h_prev) / (2 dt).
double central_diff(double h_prev, double h_next, double dt);

/// Keep samples with hdot + alpha(h) >= 0.
DerivativeDataset filter_feasible(const DerivativeDataset& ds,
                                  const KInfFunction& alpha,
                                  const std::vector<double>& h_values);

/// Lloyd's algorithm with k-means++ seeding on the concatenated
/// (x_block, u_block) features; keeps the original sample nearest each
/// non-empty cluster centroid. Deterministic given the seed.
DerivativeDataset kmeans_reduce(const DerivativeDataset& ds, int k,
                                std::uint64_t seed);

}  // namespace ddcbf
