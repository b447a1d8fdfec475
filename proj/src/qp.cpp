#include "ddcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ddcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Modified Ruiz equilibration (in place). Returns variable scaling d,
/// constraint scaling e and cost scaling c such that the scaled problem is
/// P <- c D P D, q <- c D q, A <- E A D, l <- E l, u <- E u.
struct Scaling {
  Eigen::VectorXd d;
  Eigen::VectorXd e;
  double c = 1.0;
};

Scaling equilibrate(Eigen::MatrixXd& P, Eigen::VectorXd& q, Eigen::MatrixXd& A,
                    Eigen::VectorXd& l, Eigen::VectorXd& u) {
  const int n = static_cast<int>(q.size());
  const int mc = static_cast<int>(l.size());
  Scaling s;
  s.d = Eigen::VectorXd::Ones(n);
  s.e = Eigen::VectorXd::Ones(mc);

  for (int iter = 0; iter < 10; ++iter) {
    Eigen::VectorXd dn(n), en(mc);
    for (int j = 0; j < n; ++j) {
      double m = inf_norm(P.col(j));
      if (mc > 0) m = std::max(m, inf_norm(A.col(j)));
      dn[j] = m > 1e-10 ? 1.0 / std::sqrt(m) : 1.0;
    }
    for (int i = 0; i < mc; ++i) {
      const double m = inf_norm(A.row(i).transpose());
      en[i] = m > 1e-10 ? 1.0 / std::sqrt(m) : 1.0;
    }
    P = dn.asDiagonal() * P * dn.asDiagonal();
    q = dn.cwiseProduct(q);
    if (mc > 0) {
      A = en.asDiagonal() * A * dn.asDiagonal();
      l = en.cwiseProduct(l);
      u = en.cwiseProduct(u);
    }
    s.d = s.d.cwiseProduct(dn);
    s.e = s.e.cwiseProduct(en);

    // cost scaling toward unit-norm objective rows
    double cost_norm = 0.0;
    for (int j = 0; j < n; ++j) cost_norm += inf_norm(P.col(j));
    cost_norm = std::max(cost_norm / std::max(n, 1), inf_norm(q));
    const double g = cost_norm > 1e-10 ? 1.0 / cost_norm : 1.0;
    P *= g;
    q *= g;
    s.c *= g;

    const double dev =
        std::max((dn.array() - 1.0).abs().maxCoeff(),
                 mc > 0 ? (en.array() - 1.0).abs().maxCoeff() : 0.0);
    if (dev < 0.1) break;
  }
  return s;
}

struct PolishResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double rp = kInf;
  double rd = kInf;
  bool ok = false;
  bool dual_feasible = false;
};

/// Equality-constrained least-squares solve on a guessed active set with
/// regularization and iterative refinement.
PolishResult polish(const QpProblem& p, const Eigen::VectorXd& y,
                    double dual_eps) {
  const int n = p.num_vars();
  const int mc = p.num_constraints();

  std::vector<int> act;
  std::vector<double> bval;
  for (int i = 0; i < mc; ++i) {
    if (y[i] < -dual_eps && p.lower[i] > -kInf) {
      act.push_back(i);
      bval.push_back(p.lower[i]);
    } else if (y[i] > dual_eps && p.upper[i] < kInf) {
      act.push_back(i);
      bval.push_back(p.upper[i]);
    }
  }
  const int na = static_cast<int>(act.size());

  const double delta = 1e-7;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
  K.topLeftCorner(n, n) = p.P;
  K.topLeftCorner(n, n).diagonal().array() += delta;
  for (int a = 0; a < na; ++a) {
    K.block(0, n + a, n, 1) = p.A.row(act[a]).transpose();
    K.block(n + a, 0, 1, n) = p.A.row(act[a]);
    K(n + a, n + a) = -delta;
  }
  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -p.q;
  for (int a = 0; a < na; ++a) rhs[n + a] = bval[a];

  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  if (ldlt.info() != Eigen::Success) return {};

  // refine against the unregularized KKT matrix
  Eigen::MatrixXd K0 = K;
  K0.topLeftCorner(n, n).diagonal().array() -= delta;
  for (int a = 0; a < na; ++a) K0(n + a, n + a) = 0.0;

  Eigen::VectorXd t = Eigen::VectorXd::Zero(n + na);
  for (int it = 0; it < 6; ++it) t += ldlt.solve(rhs - K0 * t);

  PolishResult out;
  out.x = t.head(n);
  out.y = Eigen::VectorXd::Zero(mc);
  for (int a = 0; a < na; ++a) out.y[act[a]] = t[n + a];

  // a lower-active row needs y <= 0, an upper-active row y >= 0; a wrong
  // sign means the guessed active set is not the optimal one
  const double sign_tol = 1e-9 * std::max(1.0, inf_norm(out.y));
  out.dual_feasible = true;
  for (int a = 0; a < na; ++a) {
    const bool at_lower = y[act[a]] < 0.0;
    if ((at_lower && t[n + a] > sign_tol) ||
        (!at_lower && t[n + a] < -sign_tol)) {
      out.dual_feasible = false;
      break;
    }
  }

  Eigen::VectorXd Ax = p.A * out.x;
  Eigen::VectorXd z = Ax.cwiseMax(p.lower).cwiseMin(p.upper);
  out.rp = mc > 0 ? inf_norm(Ax - z) : 0.0;
  out.rd = inf_norm(p.P * out.x + p.q + p.A.transpose() * out.y);
  out.ok = true;
  return out;
}

}  // namespace

QpSolution solve(const QpProblem& p, const QpSettings& st) {
  const int n = p.num_vars();
  const int mc = p.num_constraints();
  if (p.P.rows() != n || p.P.cols() != n || p.A.cols() != n ||
      p.A.rows() != mc || p.upper.size() != mc) {
    throw std::invalid_argument("qp::solve: inconsistent dimensions");
  }

  QpSolution sol;
  sol.primal = Eigen::VectorXd::Zero(n);
  sol.dual = Eigen::VectorXd::Zero(mc);

  for (int i = 0; i < mc; ++i) {
    if (p.lower[i] > p.upper[i] || p.lower[i] == kInf || p.upper[i] == -kInf) {
      sol.status = QpStatus::InfeasibleDetected;
      return sol;
    }
  }

  // scaled working copies
  Eigen::MatrixXd P = p.P, A = p.A;
  Eigen::VectorXd q = p.q, l = p.lower, u = p.upper;
  Scaling sc;
  if (st.scaling) {
    sc = equilibrate(P, q, A, l, u);
  } else {
    sc.d = Eigen::VectorXd::Ones(n);
    sc.e = Eigen::VectorXd::Ones(mc);
  }

  Eigen::VectorXd rho(mc);
  auto assign_rho = [&](double base) {
    for (int i = 0; i < mc; ++i) {
      if (l[i] == -kInf && u[i] == kInf) {
        rho[i] = 1e-6;
      } else if (u[i] - l[i] < 1e-10) {
        rho[i] = 1e3 * base;
      } else {
        rho[i] = base;
      }
    }
  };
  double rho_bar = st.rho0;
  assign_rho(rho_bar);

  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  auto factor = [&]() {
    Eigen::MatrixXd H = P;
    H.diagonal().array() += st.sigma;
    if (mc > 0) H.noalias() += A.transpose() * rho.asDiagonal() * A;
    ldlt.compute(H);
  };
  factor();
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("qp::solve: KKT factorization failed");
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(mc);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(mc);
  Eigen::VectorXd x_prev_us = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y_prev_us = Eigen::VectorXd::Zero(mc);

  const double relax = st.relax;
  bool have_result = false;
  int iter = 0;

  auto unscale_x = [&](const Eigen::VectorXd& xs) {
    return Eigen::VectorXd(sc.d.cwiseProduct(xs));
  };
  auto unscale_y = [&](const Eigen::VectorXd& ys) {
    return Eigen::VectorXd(sc.e.cwiseProduct(ys) / sc.c);
  };

  for (; iter < st.max_iters && !have_result; ++iter) {
    Eigen::VectorXd rhs = st.sigma * x - q;
    if (mc > 0) rhs.noalias() += A.transpose() * (rho.cwiseProduct(z) - y);
    const Eigen::VectorXd xt = ldlt.solve(rhs);
    const Eigen::VectorXd zt = mc > 0 ? Eigen::VectorXd(A * xt)
                                      : Eigen::VectorXd::Zero(0);

    x = relax * xt + (1.0 - relax) * x;
    if (mc > 0) {
      const Eigen::VectorXd z_nom =
          relax * zt + (1.0 - relax) * z + y.cwiseQuotient(rho);
      const Eigen::VectorXd z_new = z_nom.cwiseMax(l).cwiseMin(u);
      y = rho.cwiseProduct(z_nom - z_new);
      z = z_new;
    }

    if ((iter + 1) % st.check_interval != 0) continue;

    const Eigen::VectorXd xu = unscale_x(x);
    const Eigen::VectorXd yu = unscale_y(y);
    const Eigen::VectorXd zu =
        mc > 0 ? Eigen::VectorXd(z.cwiseQuotient(sc.e)) : z;

    const Eigen::VectorXd Ax = p.A * xu;
    const Eigen::VectorXd Px = p.P * xu;
    const Eigen::VectorXd Aty = p.A.transpose() * yu;
    const double rp = mc > 0 ? inf_norm(Ax - zu) : 0.0;
    const double rd = inf_norm(Px + p.q + Aty);

    if (std::max(rp, rd) < st.tol) {
      sol.status = QpStatus::Optimal;
      sol.primal = xu;
      sol.dual = yu;
      sol.primal_residual = rp;
      sol.dual_residual = rd;
      have_result = true;
      break;
    }

    // infeasibility certificates from the iterate differences
    const Eigen::VectorXd dy = yu - y_prev_us;
    const double dy_norm = inf_norm(dy);
    if (mc > 0 && dy_norm > 1e-14) {
      double support = 0.0;
      bool certificate = true;
      for (int i = 0; i < mc; ++i) {
        if (p.upper[i] < kInf) {
          support += p.upper[i] * std::max(0.0, dy[i]);
        } else if (dy[i] > 1e-4 * dy_norm) {
          certificate = false;
          break;
        }
        if (p.lower[i] > -kInf) {
          support += p.lower[i] * std::min(0.0, dy[i]);
        } else if (dy[i] < -1e-4 * dy_norm) {
          certificate = false;
          break;
        }
      }
      if (certificate &&
          std::max(inf_norm(p.A.transpose() * dy), support) <
              1e-4 * dy_norm) {
        sol.status = QpStatus::InfeasibleDetected;
        sol.primal = xu;
        sol.dual = yu;
        sol.iterations = iter + 1;
        return sol;
      }
    }
    const Eigen::VectorXd dx = xu - x_prev_us;
    const double dx_norm = inf_norm(dx);
    if (dx_norm > 1e-14) {
      bool certificate = inf_norm(p.P * dx) <= 1e-4 * dx_norm &&
                         p.q.dot(dx) <= 1e-4 * dx_norm;
      const Eigen::VectorXd Adx = p.A * dx;
      for (int i = 0; certificate && i < mc; ++i) {
        if (p.upper[i] == kInf) {
          certificate = Adx[i] >= -1e-4 * dx_norm;
        } else if (p.lower[i] == -kInf) {
          certificate = Adx[i] <= 1e-4 * dx_norm;
        } else {
          certificate = std::abs(Adx[i]) <= 1e-4 * dx_norm;
        }
      }
      if (certificate) {
        sol.status = QpStatus::InfeasibleDetected;
        sol.primal = xu;
        sol.dual = yu;
        sol.iterations = iter + 1;
        return sol;
      }
    }
    x_prev_us = xu;
    y_prev_us = yu;

    if (st.adaptive_rho && mc > 0) {
      const double prim_scale = std::max({inf_norm(Ax), inf_norm(zu), 1e-10});
      const double dual_scale =
          std::max({inf_norm(Px), inf_norm(p.q), inf_norm(Aty), 1e-10});
      const double ratio =
          std::sqrt((rp / prim_scale) / std::max(rd / dual_scale, 1e-16));
      if (ratio > 5.0 || ratio < 0.2) {
        rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
        assign_rho(rho_bar);
        factor();
      }
    }
  }

  if (!have_result) {
    sol.status = QpStatus::MaxIters;
    sol.primal = unscale_x(x);
    sol.dual = unscale_y(y);
    const Eigen::VectorXd zu =
        mc > 0 ? Eigen::VectorXd(z.cwiseQuotient(sc.e)) : z;
    sol.primal_residual = mc > 0 ? inf_norm(p.A * sol.primal - zu) : 0.0;
    sol.dual_residual =
        inf_norm(p.P * sol.primal + p.q + p.A.transpose() * sol.dual);
  }
  sol.iterations = iter;

  if (st.polish && mc > 0) {
    const double yscale = std::max(1.0, inf_norm(sol.dual));
    for (double frac : {1e-5, 1e-9}) {
      PolishResult pr = polish(p, sol.dual, frac * yscale);
      if (pr.ok && pr.dual_feasible &&
          std::max(pr.rp, pr.rd) <
              std::max(sol.primal_residual, sol.dual_residual)) {
        sol.primal = pr.x;
        sol.dual = pr.y;
        sol.primal_residual = pr.rp;
        sol.dual_residual = pr.rd;
        if (std::max(pr.rp, pr.rd) < st.tol) sol.status = QpStatus::Optimal;
      }
    }
  }

  sol.objective = 0.5 * sol.primal.dot(p.P * sol.primal) + p.q.dot(sol.primal);
  return sol;
}

QpProblem build_safety_filter(const Eigen::VectorXd& u_nom,
                              const std::vector<LocalConstraint>& constraints,
                              double rho, const InputBox& box) {
  if (rho <= 0.0) throw std::invalid_argument("safety filter: rho must be positive");
  const int m = static_cast<int>(u_nom.size());
  const int C = static_cast<int>(constraints.size());

  // variables: [u (m) | t_c (m per constraint) | s_c (one per constraint)]
  const int nv = m + C * (m + 1);
  const int t0 = m;
  const int s0 = m + C * m;

  const int rows = C * (2 * m + 1) + m + C;
  QpProblem p;
  p.P = Eigen::MatrixXd::Zero(nv, nv);
  p.P.topLeftCorner(m, m).setIdentity();
  p.q = Eigen::VectorXd::Zero(nv);
  p.q.head(m) = -u_nom;
  for (int c = 0; c < C; ++c) p.q[s0 + c] = rho;

  p.A = Eigen::MatrixXd::Zero(rows, nv);
  p.lower = Eigen::VectorXd::Constant(rows, -kInf);
  p.upper = Eigen::VectorXd::Constant(rows, kInf);

  int r = 0;
  for (int c = 0; c < C; ++c) {
    const LocalConstraint& lc = constraints[c];
    if (lc.slope_lo.size() != m || lc.slope_hi.size() != m ||
        lc.input_anchor.size() != m) {
      throw std::invalid_argument("safety filter: constraint dimension mismatch");
    }
    for (int comp = 0; comp < m; ++comp) {
      // t <= slope (u - anchor) for both interval endpoints
      p.A(r, t0 + c * m + comp) = 1.0;
      p.A(r, comp) = -lc.slope_lo[comp];
      p.upper[r] = -lc.slope_lo[comp] * lc.input_anchor[comp];
      ++r;
      p.A(r, t0 + c * m + comp) = 1.0;
      p.A(r, comp) = -lc.slope_hi[comp];
      p.upper[r] = -lc.slope_hi[comp] * lc.input_anchor[comp];
      ++r;
    }
    // const_term + sum t + s >= rhs
    for (int comp = 0; comp < m; ++comp) p.A(r, t0 + c * m + comp) = 1.0;
    p.A(r, s0 + c) = 1.0;
    p.lower[r] = lc.rhs - lc.const_term;
    ++r;
  }
  for (int comp = 0; comp < m; ++comp) {
    p.A(r, comp) = 1.0;
    p.lower[r] = box.lo;
    p.upper[r] = box.hi;
    ++r;
  }
  for (int c = 0; c < C; ++c) {
    p.A(r, s0 + c) = 1.0;
    p.lower[r] = 0.0;
    ++r;
  }
  return p;
}

}  // namespace ddcbf
