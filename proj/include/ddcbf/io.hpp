#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddcbf/bounds.hpp"
#include "ddcbf/data.hpp"
#include "ddcbf/sim.hpp"

namespace ddcbf::io {

/// FNV-1a of a string, hex-encoded; used for config/dataset fingerprints.
std::string fnv1a_hex(const std::string& text);

/// Doubles are written with enough digits to round-trip exactly, so
/// re-reading an artifact reproduces it bit for bit.

/// dataset_<label>.csv with header hdot, x_<agent>_<dim>..., u_<agent>_<dim>...
/// plus a dataset_<label>.json manifest (seed, config hash, candidate).
void write_dataset(const std::filesystem::path& dir,
                   const DerivativeDataset& ds);
DerivativeDataset read_dataset(const std::filesystem::path& dir,
                               const std::string& label);

struct BoundsMeta {
  std::string dataset_hash;
  int kmeans_k = 0;
  double solver_tol = 0.0;
  double scale_factor = 1.0;
};

void write_bounds(const std::filesystem::path& dir, const BarrierCandidate& c,
                  const JacobianBounds& b, const BoundsMeta& meta);
JacobianBounds read_bounds(const std::filesystem::path& dir,
                           const std::string& label);

/// Content fingerprint of a dataset (samples only), for bounds metadata.
std::string dataset_hash(const DerivativeDataset& ds);

void write_trajectory_csv(const std::filesystem::path& file,
                          const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& file);

/// trajectory.csv, inputs.csv (nominal and filtered), h_values.csv,
/// metrics.json under dir.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& res);

void write_study_csv(const std::filesystem::path& file,
                     const std::vector<StudyRow>& rows);

std::string format_study_table(const std::vector<StudyRow>& rows);

}  // namespace ddcbf::io
