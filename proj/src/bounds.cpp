#include "ddcbf/bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ddcbf/qp.hpp"
#include "ddcbf/random.hpp"

namespace ddcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd feature_matrix(const DerivativeDataset& ds) {
  const int N = static_cast<int>(ds.samples.size());
  const int dx = static_cast<int>(ds.samples.front().x_block.size());
  const int du = static_cast<int>(ds.samples.front().u_block.size());
  Eigen::MatrixXd z(N, dx + du);
  for (int i = 0; i < N; ++i) {
    z.row(i).head(dx) = ds.samples[i].x_block.transpose();
    z.row(i).tail(du) = ds.samples[i].u_block.transpose();
  }
  return z;
}

}  // namespace

JacobianBounds estimate(const DerivativeDataset& ds) {
  const int N = static_cast<int>(ds.samples.size());
  if (N < 2) throw std::invalid_argument("estimate: need at least two samples");
  const int dx = static_cast<int>(ds.samples.front().x_block.size());
  const int du = static_cast<int>(ds.samples.front().u_block.size());
  const int D = dx + du;

  const Eigen::MatrixXd z = feature_matrix(ds);

  // Count usable pair rows first (identical features are vacuous).
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(N) * (N - 1) / 2);
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const Eigen::VectorXd delta = (z.row(i) - z.row(j)).transpose();
      if (delta.cwiseAbs().maxCoeff() == 0.0) {
        if (ds.samples[i].hdot != ds.samples[j].hdot) {
          throw std::runtime_error(
              "estimate: identical features with different derivatives");
        }
        continue;
      }
      pairs.emplace_back(i, j);
    }
  }

  const int nv = 2 * D;
  const int rows = 2 * static_cast<int>(pairs.size()) + D;
  QpProblem p;
  p.P = Eigen::MatrixXd::Zero(nv, nv);
  p.P.diagonal().setConstant(1e-9);  // ridge for conditioning only
  p.q = Eigen::VectorXd::Zero(nv);
  p.q.head(D).setConstant(-1.0);  // minimize sum(upper - lower)
  p.q.tail(D).setConstant(1.0);
  p.A = Eigen::MatrixXd::Zero(rows, nv);
  p.lower = Eigen::VectorXd::Constant(rows, -kInf);
  p.upper = Eigen::VectorXd::Constant(rows, kInf);

  int r = 0;
  for (auto [i, j] : pairs) {
    const Eigen::VectorXd delta = (z.row(i) - z.row(j)).transpose();
    const Eigen::VectorXd dplus = delta.cwiseMax(0.0);
    const Eigen::VectorXd dminus = (-delta).cwiseMax(0.0);
    const double dd = ds.samples[i].hdot - ds.samples[j].hdot;
    // lower . D+ - upper . D- <= dd
    p.A.row(r).head(D) = dplus.transpose();
    p.A.row(r).tail(D) = -dminus.transpose();
    p.upper[r] = dd;
    ++r;
    // upper . D+ - lower . D- >= dd
    p.A.row(r).head(D) = -dminus.transpose();
    p.A.row(r).tail(D) = dplus.transpose();
    p.lower[r] = dd;
    ++r;
  }
  for (int c = 0; c < D; ++c) {
    p.A(r, c) = -1.0;
    p.A(r, D + c) = 1.0;
    p.lower[r] = 0.0;
    ++r;
  }

  QpSettings st;
  st.tol = 1e-6;
  QpSolution sol = solve(p, st);
  if (std::max(sol.primal_residual, sol.dual_residual) > 1e-8) {
    st.tol = 1e-8;
    st.max_iters = 100000;
    sol = solve(p, st);
  }
  if (sol.status == QpStatus::InfeasibleDetected) {
    throw std::runtime_error("estimate: bound LP reported infeasible");
  }

  JacobianBounds b;
  b.lower_x = sol.primal.segment(0, dx);
  b.upper_x = sol.primal.segment(D, dx);
  b.lower_u = sol.primal.segment(dx, du);
  b.upper_u = sol.primal.segment(D + dx, du);
  return b;
}

JacobianBounds scale(const JacobianBounds& b, double factor) {
  if (factor <= 0.0) throw std::invalid_argument("scale: factor must be positive");
  return {factor * b.lower_x, factor * b.upper_x, factor * b.lower_u,
          factor * b.upper_u};
}

double max_pairwise_violation(const JacobianBounds& b,
                              const DerivativeDataset& ds) {
  const int N = static_cast<int>(ds.samples.size());
  const Eigen::MatrixXd z = feature_matrix(ds);
  Eigen::VectorXd lower(b.lower_x.size() + b.lower_u.size());
  lower << b.lower_x, b.lower_u;
  Eigen::VectorXd upper(b.upper_x.size() + b.upper_u.size());
  upper << b.upper_x, b.upper_u;

  double worst = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const Eigen::VectorXd delta = (z.row(i) - z.row(j)).transpose();
      const Eigen::VectorXd dplus = delta.cwiseMax(0.0);
      const Eigen::VectorXd dminus = (-delta).cwiseMax(0.0);
      const double dd = ds.samples[i].hdot - ds.samples[j].hdot;
      const double lo = lower.dot(dplus) - upper.dot(dminus);
      const double hi = upper.dot(dplus) - lower.dot(dminus);
      worst = std::max(worst, lo - dd);
      worst = std::max(worst, dd - hi);
    }
  }
  return worst;
}

CoverageReport validate_against_truth(const JacobianBounds& b,
                                      const BarrierCandidate& c,
                                      const SystemModel& model, int probes,
                                      std::uint64_t seed, double eps) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int M = model.num_agents();
  const Box xbox = model.state_box();
  const Box ubox = model.input_box();
  const double fd_step = 1e-6;
  const double tol = 1e-7;  // absorbs finite-difference rounding

  Rng rng(mix_seed(seed, 0x76616c6964ULL));
  CoverageReport rep;
  int done = 0;
  int attempts = 0;
  while (done < probes && attempts < 50 * probes) {
    ++attempts;
    Eigen::VectorXd x(n * M), u = Eigen::VectorXd::Zero(m * M);
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(xbox.lo, xbox.hi);
    for (int leader : model.graph().leaders()) {
      for (int cc = 0; cc < m; ++cc) {
        u[m * leader + cc] = rng.uniform(ubox.lo, ubox.hi);
      }
    }
    try {
      auto hdot_at = [&](const Eigen::VectorXd& xs, const Eigen::VectorXd& us) {
        return analytic_hdot(c, model, xs, us, eps);
      };
      for (std::size_t a = 0; a < c.hdot_members.size(); ++a) {
        for (int cc = 0; cc < n; ++cc) {
          const int idx = n * c.hdot_members[a] + cc;
          Eigen::VectorXd xp = x, xm = x;
          xp[idx] += fd_step;
          xm[idx] -= fd_step;
          const double g = (hdot_at(xp, u) - hdot_at(xm, u)) / (2.0 * fd_step);
          const int bi = static_cast<int>(a) * n + cc;
          rep.total_components++;
          if (g >= b.lower_x[bi] - tol && g <= b.upper_x[bi] + tol) {
            rep.inside++;
          }
        }
      }
      for (std::size_t a = 0; a < c.members.size(); ++a) {
        for (int cc = 0; cc < m; ++cc) {
          const int idx = m * c.members[a] + cc;
          Eigen::VectorXd up = u, um = u;
          up[idx] += fd_step;
          um[idx] -= fd_step;
          const double g = (hdot_at(x, up) - hdot_at(x, um)) / (2.0 * fd_step);
          const int bi = static_cast<int>(a) * m + cc;
          rep.total_components++;
          if (g >= b.lower_u[bi] - tol && g <= b.upper_u[bi] + tol) {
            rep.inside++;
          }
        }
      }
      ++done;
    } catch (const std::runtime_error&) {
      continue;  // degenerate ff configuration, draw again
    }
  }
  rep.coverage = rep.total_components > 0
                     ? static_cast<double>(rep.inside) / rep.total_components
                     : 0.0;
  return rep;
}

}  // namespace ddcbf
