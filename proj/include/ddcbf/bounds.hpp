#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "ddcbf/data.hpp"

namespace ddcbf {

/// Componentwise interval enclosure of the Jacobian of dh/dt, split into
/// the state block (over I_hdot) and the input block (over I_h).
struct JacobianBounds {
  Eigen::VectorXd lower_x;
  Eigen::VectorXd upper_x;
  Eigen::VectorXd lower_u;
  Eigen::VectorXd upper_u;
};

/// Fit minimal-total-width interval bounds from all ordered sample pairs of
/// the dataset via a linear program: for each pair with feature difference
/// D and derivative difference dd,
///   Jlo . D+ - Jhi . D-  <=  dd  <=  Jhi . D+ - Jlo . D-,
/// plus Jlo <= Jhi. Requires at least two samples.
JacobianBounds estimate(const DerivativeDataset& ds);

/// Multiply every bound component by a positive factor.
JacobianBounds scale(const JacobianBounds& b, double factor);

/// Largest violation of the pairwise constraints by the fitted bounds;
/// used to re-verify LP solutions.
double max_pairwise_violation(const JacobianBounds& b,
                              const DerivativeDataset& ds);

struct CoverageReport {
  long total_components = 0;
  long inside = 0;
  double coverage = 0.0;
};

/// Probe random (x, u) points, compare the true gradient of dh/dt (finite
/// differences of the analytic oracle) against the interval. Diagnostic
/// only; the pipeline never calls it.
CoverageReport validate_against_truth(const JacobianBounds& b,
                                      const BarrierCandidate& c,
                                      const SystemModel& model, int probes,
                                      std::uint64_t seed, double eps);

}  // namespace ddcbf
