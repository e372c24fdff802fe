#include "rulerepair/repair_opt.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "rulerepair/criticality.hpp"

namespace rulerepair {

namespace {

constexpr double kInfBound = 1e17;

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

SpMat build_p(const QPProblem& qp) {
  std::vector<Triplet> trips;
  for (int i = 0; i < qp.n; ++i) {
    for (const auto& [j, v] : qp.p_rows[static_cast<std::size_t>(i)]) {
      trips.emplace_back(i, j, v);
      if (j != i) trips.emplace_back(j, i, v);
    }
  }
  SpMat p(qp.n, qp.n);
  p.setFromTriplets(trips.begin(), trips.end());
  return p;
}

SpMat build_a(const QPProblem& qp) {
  std::vector<Triplet> trips;
  for (int i = 0; i < qp.m; ++i) {
    for (const auto& [j, v] : qp.a_rows[static_cast<std::size_t>(i)]) {
      trips.emplace_back(i, j, v);
    }
  }
  SpMat a(qp.m, qp.n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

double support_value(const QPProblem& qp, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (int i = 0; i < qp.m; ++i) {
    const double yi = y[i];
    if (yi > 0.0) {
      if (qp.upper[static_cast<std::size_t>(i)] >= kInfBound) return std::numeric_limits<double>::infinity();
      s += yi * qp.upper[static_cast<std::size_t>(i)];
    } else if (yi < 0.0) {
      if (qp.lower[static_cast<std::size_t>(i)] <= -kInfBound) return std::numeric_limits<double>::infinity();
      s += yi * qp.lower[static_cast<std::size_t>(i)];
    }
  }
  return s;
}

}  // namespace

namespace {

// Reduced inequality-only problem after eliminating the equality rows on the
// null space of their constraint matrix.
struct ReducedQp {
  Eigen::MatrixXd p;     // nw x nw
  Eigen::VectorXd q;     // nw
  Eigen::MatrixXd g;     // mi x nw
  Eigen::VectorXd lo;    // mi
  Eigen::VectorXd hi;    // mi
  Eigen::VectorXd z0;    // n, particular solution of the equalities
  Eigen::MatrixXd basis; // n x nw
  std::vector<int> ineq_rows;
  double constant = 0.0;
};

// Active-set refinement in the reduced space: starting from the splitting
// iterate's guess, constraints with wrong-signed duals are dropped and the
// most violated ones added until a consistent face is found.
bool polish_reduced(const ReducedQp& r, const Eigen::VectorXd& y, const Eigen::VectorXd& gw,
                    Eigen::VectorXd* w_out, Eigen::VectorXd* y_out) {
  const int nw = static_cast<int>(r.p.rows());
  const int mi = static_cast<int>(r.g.rows());

  // side per active row: -1 lower, +1 upper
  std::map<int, int> active;
  for (int i = 0; i < mi; ++i) {
    const double near_tol = 1e-6 * (1.0 + std::min(std::abs(r.lo[i]), std::abs(r.hi[i])));
    if (y[i] < -1e-8) {
      active[i] = -1;
    } else if (y[i] > 1e-8) {
      active[i] = +1;
    } else if (gw[i] - r.lo[i] < near_tol) {
      active[i] = -1;
    } else if (r.hi[i] - gw[i] < near_tol) {
      active[i] = +1;
    }
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(nw);
  Eigen::VectorXd y_full = Eigen::VectorXd::Zero(mi);
  for (int round = 0; round < 200; ++round) {
    while (static_cast<int>(active.size()) > nw) active.erase(std::prev(active.end()));
    const int ma = static_cast<int>(active.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nw + ma, nw + ma);
    kkt.topLeftCorner(nw, nw) = r.p;
    Eigen::VectorXd rhs(nw + ma);
    rhs.head(nw) = -r.q;
    {
      int a = 0;
      for (const auto& [row, side] : active) {
        kkt.block(nw + a, 0, 1, nw) = r.g.row(row);
        kkt.block(0, nw + a, nw, 1) = r.g.row(row).transpose();
        rhs[nw + a] = side < 0 ? r.lo[row] : r.hi[row];
        ++a;
      }
    }
    Eigen::MatrixXd kkt_reg = kkt;
    kkt_reg.topLeftCorner(nw, nw) += 1e-9 * Eigen::MatrixXd::Identity(nw, nw);
    if (ma > 0) kkt_reg.bottomRightCorner(ma, ma) -= 1e-9 * Eigen::MatrixXd::Identity(ma, ma);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt_reg);
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int refine = 0; refine < 4; ++refine) sol += lu.solve(rhs - kkt * sol);
    if (!sol.allFinite()) return false;

    w = sol.head(nw);
    y_full.setZero();
    {
      int a = 0;
      for (const auto& [row, side] : active) {
        y_full[row] = sol[nw + a];
        ++a;
      }
    }

    // wrong-signed duals leave the face
    bool dropped = false;
    for (auto it = active.begin(); it != active.end();) {
      const double dual = y_full[it->first];
      if ((it->second < 0 && dual > 1e-9) || (it->second > 0 && dual < -1e-9)) {
        y_full[it->first] = 0.0;
        it = active.erase(it);
        dropped = true;
      } else {
        ++it;
      }
    }

    // most violated inactive constraint joins
    const Eigen::VectorXd gw_new = r.g * w;
    double worst = 1e-8;
    int worst_row = -1, worst_side = 0;
    for (int i = 0; i < mi; ++i) {
      if (active.count(i)) continue;
      if (r.lo[i] - gw_new[i] > worst) {
        worst = r.lo[i] - gw_new[i];
        worst_row = i;
        worst_side = -1;
      }
      if (gw_new[i] - r.hi[i] > worst) {
        worst = gw_new[i] - r.hi[i];
        worst_row = i;
        worst_side = +1;
      }
    }
    if (worst_row >= 0) {
      active[worst_row] = worst_side;
      continue;
    }
    if (dropped) continue;

    // consistent face: validate
    for (int i = 0; i < mi; ++i) {
      if (gw_new[i] < r.lo[i] - 1e-7 || gw_new[i] > r.hi[i] + 1e-7) return false;
      if (y_full[i] < -1e-9 && gw_new[i] > r.lo[i] + 1e-6) return false;
      if (y_full[i] > 1e-9 && gw_new[i] < r.hi[i] - 1e-6) return false;
    }
    *w_out = w;
    *y_out = y_full;
    return true;
  }
  if (std::getenv("RULEREPAIR_QP_TRACE") != nullptr) fprintf(stderr, "polish cap hit\n");
  return false;
}

}  // namespace

QpOutcome solve_qp(const QPProblem& qp, const QpTolerances& tol) {
  const SpMat p_sparse = build_p(qp);
  const SpMat a_sparse = build_a(qp);
  const Eigen::MatrixXd p_full = Eigen::MatrixXd(p_sparse);
  const Eigen::MatrixXd a_full = Eigen::MatrixXd(a_sparse);
  Eigen::VectorXd q_full(qp.n), lo_full(qp.m), hi_full(qp.m);
  for (int i = 0; i < qp.n; ++i) q_full[i] = qp.q[static_cast<std::size_t>(i)];
  for (int i = 0; i < qp.m; ++i) {
    lo_full[i] = qp.lower[static_cast<std::size_t>(i)];
    hi_full[i] = qp.upper[static_cast<std::size_t>(i)];
  }

  // split equality and inequality rows
  std::vector<int> eq_rows, ineq_rows;
  for (int i = 0; i < qp.m; ++i) {
    (hi_full[i] - lo_full[i] < 1e-12 ? eq_rows : ineq_rows).push_back(i);
  }

  ReducedQp red;
  red.ineq_rows = ineq_rows;
  const int me = static_cast<int>(eq_rows.size());
  const int mi = static_cast<int>(ineq_rows.size());
  if (me > 0) {
    Eigen::MatrixXd a_eq(me, qp.n);
    Eigen::VectorXd b_eq(me);
    for (int r = 0; r < me; ++r) {
      a_eq.row(r) = a_full.row(eq_rows[static_cast<std::size_t>(r)]);
      b_eq[r] = lo_full[eq_rows[static_cast<std::size_t>(r)]];
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a_eq);
    red.z0 = lu.solve(b_eq);
    if ((a_eq * red.z0 - b_eq).lpNorm<Eigen::Infinity>() > 1e-6) {
      return QpInfeasible{};  // inconsistent equality system
    }
    red.basis = lu.kernel();
    if (red.basis.cols() == 0) {
      // fully determined by the equalities; check the inequalities
      for (int i : ineq_rows) {
        const double v = a_full.row(i).dot(red.z0);
        if (v < lo_full[i] - 1e-8 || v > hi_full[i] + 1e-8) return QpInfeasible{};
      }
      QpSolution out;
      out.z.assign(red.z0.data(), red.z0.data() + qp.n);
      out.objective = 0.5 * red.z0.dot(p_full * red.z0) + q_full.dot(red.z0);
      return out;
    }
  } else {
    red.z0 = Eigen::VectorXd::Zero(qp.n);
    red.basis = Eigen::MatrixXd::Identity(qp.n, qp.n);
  }
  const int nw = static_cast<int>(red.basis.cols());

  // column scaling keeps the reduced data near unit magnitude
  Eigen::VectorXd col_scale = Eigen::VectorXd::Ones(nw);
  {
    const Eigen::MatrixXd g_raw = [&] {
      Eigen::MatrixXd g(mi, nw);
      for (int r = 0; r < mi; ++r) {
        g.row(r) = a_full.row(ineq_rows[static_cast<std::size_t>(r)]) * red.basis;
      }
      return g;
    }();
    const Eigen::MatrixXd p_raw = red.basis.transpose() * p_full * red.basis;
    for (int j = 0; j < nw; ++j) {
      double norm = std::abs(p_raw.col(j).lpNorm<Eigen::Infinity>());
      if (mi > 0) norm = std::max(norm, g_raw.col(j).lpNorm<Eigen::Infinity>());
      if (norm > 1e-12) col_scale[j] = 1.0 / std::sqrt(norm);
    }
    red.basis = red.basis * col_scale.asDiagonal();
  }

  red.p = red.basis.transpose() * p_full * red.basis;
  red.q = red.basis.transpose() * (p_full * red.z0 + q_full);
  red.g.resize(mi, nw);
  red.lo.resize(mi);
  red.hi.resize(mi);
  for (int r = 0; r < mi; ++r) {
    const int row = ineq_rows[static_cast<std::size_t>(r)];
    red.g.row(r) = a_full.row(row) * red.basis;
    const double shift = a_full.row(row).dot(red.z0);
    red.lo[r] = lo_full[row] <= -kInfBound ? lo_full[row] : lo_full[row] - shift;
    red.hi[r] = hi_full[row] >= kInfBound ? hi_full[row] : hi_full[row] - shift;
  }

  // row scaling of the inequalities
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(mi);
  for (int r = 0; r < mi; ++r) {
    const double norm = red.g.row(r).lpNorm<Eigen::Infinity>();
    if (norm > 1e-12) row_scale[r] = 1.0 / norm;
    red.g.row(r) *= row_scale[r];
    if (red.lo[r] > -kInfBound) red.lo[r] *= row_scale[r];
    if (red.hi[r] < kInfBound) red.hi[r] *= row_scale[r];
  }

  const auto assemble_solution = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& y_red,
                                     int iters) -> std::optional<QpSolution> {
    const Eigen::VectorXd z = red.z0 + red.basis * w;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(qp.m);
    for (int r = 0; r < mi; ++r) {
      y[ineq_rows[static_cast<std::size_t>(r)]] = y_red[r] * row_scale[r];
    }
    // equality duals from stationarity
    if (me > 0) {
      Eigen::MatrixXd a_eq_t(qp.n, me);
      for (int r = 0; r < me; ++r) {
        a_eq_t.col(r) = a_full.row(eq_rows[static_cast<std::size_t>(r)]).transpose();
      }
      const Eigen::VectorXd resid = -(p_full * z + q_full + a_full.transpose() * y);
      const Eigen::VectorXd y_eq =
          a_eq_t.colPivHouseholderQr().solve(resid);
      for (int r = 0; r < me; ++r) y[eq_rows[static_cast<std::size_t>(r)]] += y_eq[r];
    }

    QpSolution out;
    out.z.assign(z.data(), z.data() + qp.n);
    out.iterations = iters;
    const Eigen::VectorXd az = a_full * z;
    Eigen::VectorXd proj(qp.m);
    for (int i = 0; i < qp.m; ++i) proj[i] = std::clamp(az[i], lo_full[i], hi_full[i]);
    out.primal_residual = (az - proj).lpNorm<Eigen::Infinity>();
    out.dual_residual =
        (p_full * z + q_full + a_full.transpose() * y).lpNorm<Eigen::Infinity>();
    out.objective = 0.5 * z.dot(p_full * z) + q_full.dot(z);
    const double dual_obj = -0.5 * z.dot(p_full * z) - support_value(qp, y);
    out.duality_gap = std::isfinite(dual_obj)
                          ? std::abs(out.objective - dual_obj) /
                                std::max(1.0, std::abs(out.objective))
                          : 0.0;
    if (out.primal_residual <= tol.primal && out.dual_residual <= tol.dual &&
        out.duality_gap <= tol.rel_gap) {
      return out;
    }
    return std::nullopt;
  };

  // unconstrained reduced problem
  if (mi == 0) {
    const Eigen::VectorXd w =
        (red.p + 1e-12 * Eigen::MatrixXd::Identity(nw, nw)).ldlt().solve(-red.q);
    const auto out = assemble_solution(w, Eigen::VectorXd::Zero(0), 0);
    if (out) return *out;
    return NumericalBreakdown{0};
  }

  // primal-dual interior point (Mehrotra predictor-corrector) on the
  // reduced problem, formulated over the finite one-sided rows C w <= d
  std::vector<std::pair<int, double>> rows;  // (signed reduced row+1, bound)
  for (int i = 0; i < mi; ++i) {
    if (red.lo[i] > red.hi[i] + 1e-12) return QpInfeasible{};
    if (red.hi[i] < kInfBound) rows.emplace_back(i + 1, red.hi[i]);
    if (red.lo[i] > -kInfBound) rows.emplace_back(-(i + 1), -red.lo[i]);
  }
  const int mc = static_cast<int>(rows.size());
  Eigen::MatrixXd c_mat(mc, nw);
  Eigen::VectorXd d_vec(mc);
  for (int r = 0; r < mc; ++r) {
    const int i = std::abs(rows[static_cast<std::size_t>(r)].first) - 1;
    const double sign = rows[static_cast<std::size_t>(r)].first > 0 ? 1.0 : -1.0;
    c_mat.row(r) = sign * red.g.row(i);
    d_vec[r] = rows[static_cast<std::size_t>(r)].second;
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(nw);
  Eigen::VectorXd slack = Eigen::VectorXd::Ones(mc);
  Eigen::VectorXd zdual = Eigen::VectorXd::Ones(mc);
  {
    // start with positive slacks
    const Eigen::VectorXd cw = c_mat * w;
    for (int r = 0; r < mc; ++r) slack[r] = std::max(1.0, d_vec[r] - cw[r] + 1.0);
  }

  int iters = 0;
  for (; iters < std::min(tol.max_iterations, 200); ++iters) {
    const Eigen::VectorXd r_dual = red.p * w + red.q + c_mat.transpose() * zdual;
    const Eigen::VectorXd r_prim = c_mat * w + slack - d_vec;
    const double mu = slack.dot(zdual) / mc;

    if (r_dual.lpNorm<Eigen::Infinity>() < 1e-9 &&
        r_prim.lpNorm<Eigen::Infinity>() < 1e-9 && mu < 1e-11) {
      break;
    }

    // primal infeasibility certificate: dual ray with negative support
    const double z_norm = zdual.lpNorm<Eigen::Infinity>();
    if (z_norm > 1e8) {
      const Eigen::VectorXd ray = zdual / z_norm;
      if ((c_mat.transpose() * ray).lpNorm<Eigen::Infinity>() < 1e-6 &&
          d_vec.dot(ray) < -1e-8) {
        return QpInfeasible{};
      }
    }

    const Eigen::VectorXd zs = zdual.cwiseQuotient(slack);
    Eigen::MatrixXd h = red.p;
    h.noalias() += c_mat.transpose() * zs.asDiagonal() * c_mat;
    const Eigen::LLT<Eigen::MatrixXd> llt(
        h + 1e-12 * Eigen::MatrixXd::Identity(nw, nw));
    if (llt.info() != Eigen::Success) break;  // barrier exhausted, polish takes over

    const auto newton = [&](const Eigen::VectorXd& r_cent) {
      // eliminate slack and dual updates
      const Eigen::VectorXd tmp =
          r_cent.cwiseQuotient(slack) - zs.cwiseProduct(r_prim);
      const Eigen::VectorXd rhs = -r_dual + c_mat.transpose() * tmp;
      const Eigen::VectorXd dw = llt.solve(rhs);
      const Eigen::VectorXd ds = -(r_prim + c_mat * dw);
      const Eigen::VectorXd dz =
          -(r_cent + zdual.cwiseProduct(ds)).cwiseQuotient(slack);
      return std::make_tuple(dw, ds, dz);
    };

    // affine predictor
    const Eigen::VectorXd r_cent_aff = slack.cwiseProduct(zdual);
    auto [dw_aff, ds_aff, dz_aff] = newton(r_cent_aff);
    double alpha_aff = 1.0;
    for (int r = 0; r < mc; ++r) {
      if (ds_aff[r] < 0) alpha_aff = std::min(alpha_aff, -slack[r] / ds_aff[r]);
      if (dz_aff[r] < 0) alpha_aff = std::min(alpha_aff, -zdual[r] / dz_aff[r]);
    }
    const double mu_aff =
        (slack + alpha_aff * ds_aff).dot(zdual + alpha_aff * dz_aff) / mc;
    const double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);

    // corrector
    const Eigen::VectorXd r_cent =
        slack.cwiseProduct(zdual) + ds_aff.cwiseProduct(dz_aff) -
        Eigen::VectorXd::Constant(mc, sigma * mu);
    auto [dw, ds, dz] = newton(r_cent);
    double alpha = 1.0;
    for (int r = 0; r < mc; ++r) {
      if (ds[r] < 0) alpha = std::min(alpha, -slack[r] / ds[r]);
      if (dz[r] < 0) alpha = std::min(alpha, -zdual[r] / dz[r]);
    }
    alpha = std::min(1.0, 0.99 * alpha);
    w += alpha * dw;
    slack += alpha * ds;
    zdual += alpha * dz;
  }

  // duals per reduced row: upper rows positive, lower rows negative
  Eigen::VectorXd y_red = Eigen::VectorXd::Zero(mi);
  for (int r = 0; r < mc; ++r) {
    const int i = std::abs(rows[static_cast<std::size_t>(r)].first) - 1;
    const double sign = rows[static_cast<std::size_t>(r)].first > 0 ? 1.0 : -1.0;
    y_red[i] += sign * zdual[r];
  }

  // active-set polish for exact residuals, with the interior-point solution
  // as the fallback
  {
    Eigen::VectorXd wp, yp;
    if (polish_reduced(red, y_red, red.g * w, &wp, &yp)) {
      const auto out = assemble_solution(wp, yp, iters);
      if (out) return *out;
    }
  }
  const auto out = assemble_solution(w, y_red, iters);
  if (out) return *out;
  return NumericalBreakdown{iters};
}

// ---------------------------------------------------------------------------
// Problem builders

namespace {

struct LonIndex {
  int n_steps;
  int xi(int t, int j) const { return 4 * t + j; }
  int ui(int t) const { return 4 * (n_steps + 1) + t; }
  int total() const { return 4 * (n_steps + 1) + n_steps; }
};

void add_p(QPProblem* qp, int i, double v) {
  qp->p_rows[static_cast<std::size_t>(i)].emplace_back(i, v);
}

int add_row(QPProblem* qp, std::vector<std::pair<int, double>> row, double lo, double hi) {
  qp->a_rows.push_back(std::move(row));
  qp->lower.push_back(lo);
  qp->upper.push_back(hi);
  return qp->m++;
}

}  // namespace

RepairQp build_qp(const Scenario& sc, const Corridor& corridor, int k_cut,
                  const QpWeights& weights) {
  RepairQp out;
  out.k_cut = k_cut;
  const int n_steps = sc.horizon - k_cut;
  const LonIndex ix{n_steps};
  QPProblem& qp = out.longitudinal;
  qp.n = ix.total();
  qp.p_rows.assign(static_cast<std::size_t>(qp.n), {});
  qp.q.assign(static_cast<std::size_t>(qp.n), 0.0);

  const double dt = sc.dt;
  for (int t = 0; t <= n_steps; ++t) {
    const double s_ref =
        sc.ego_trajectory.states[static_cast<std::size_t>(k_cut + t)].s;
    add_p(&qp, ix.xi(t, 0), 2.0 * weights.w_dev);
    qp.q[static_cast<std::size_t>(ix.xi(t, 0))] = -2.0 * weights.w_dev * s_ref;
    add_p(&qp, ix.xi(t, 2), 2.0 * weights.w_acc);
    add_p(&qp, ix.xi(t, 3), 2.0 * weights.w_jerk);
    add_p(&qp, ix.xi(t, 1), 2e-6);
  }
  // small smoothness term on the raw input keeps the problem strictly convex
  for (int t = 0; t < n_steps; ++t) add_p(&qp, ix.ui(t), 2e-4);

  // initial state pinned
  const State& x0 = sc.ego_trajectory.states[static_cast<std::size_t>(k_cut)];
  const double init[4] = {x0.s, x0.s_dot, x0.s_ddot, x0.s_dddot};
  for (int j = 0; j < 4; ++j) {
    add_row(&qp, {{ix.xi(0, j), 1.0}}, init[j], init[j]);
    ++qp.equality_rows;
  }

  // exact ZOH dynamics of the fourth-order chain
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  const double ad[4][4] = {{1, dt, dt2 / 2, dt3 / 6},
                           {0, 1, dt, dt2 / 2},
                           {0, 0, 1, dt},
                           {0, 0, 0, 1}};
  const double bd[4] = {dt4 / 24, dt3 / 6, dt2 / 2, dt};
  for (int t = 0; t < n_steps; ++t) {
    for (int r = 0; r < 4; ++r) {
      std::vector<std::pair<int, double>> row;
      for (int c = r; c < 4; ++c) row.emplace_back(ix.xi(t, c), ad[r][c]);
      row.emplace_back(ix.ui(t), bd[r]);
      row.emplace_back(ix.xi(t + 1, r), -1.0);
      add_row(&qp, std::move(row), 0.0, 0.0);
      ++qp.equality_rows;
    }
  }

  // corridor and admissible boxes
  for (int t = 1; t <= n_steps; ++t) {
    const Cell& box = corridor.boxes.at(static_cast<std::size_t>(t));
    add_row(&qp, {{ix.xi(t, 0), 1.0}}, box.s_lo, box.s_hi);
    add_row(&qp, {{ix.xi(t, 1), 1.0}}, std::max(box.sdot_lo, sc.state_bounds.s_dot.lo),
            std::min(box.sdot_hi, sc.state_bounds.s_dot.hi));
    add_row(&qp, {{ix.xi(t, 2), 1.0}}, sc.state_bounds.s_ddot.lo, sc.state_bounds.s_ddot.hi);
    add_row(&qp, {{ix.xi(t, 3), 1.0}}, sc.state_bounds.s_dddot.lo, sc.state_bounds.s_dddot.hi);
    qp.inequality_rows += 4;
  }
  for (int t = 0; t < n_steps; ++t) {
    add_row(&qp, {{ix.ui(t), 1.0}}, sc.input_bounds.u_long.lo, sc.input_bounds.u_long.hi);
    ++qp.inequality_rows;
  }
  out.constraint_count = qp.m;
  return out;
}

QPProblem build_lateral_qp(const Scenario& sc, const Corridor& corridor, int k_cut,
                           const std::vector<double>& s_profile, const QpWeights& weights) {
  const int n_steps = sc.horizon - k_cut;
  QPProblem qp;
  const auto xi = [](int t, int j) { return 2 * t + j; };
  const int nu0 = 2 * (n_steps + 1);
  qp.n = nu0 + n_steps;
  qp.p_rows.assign(static_cast<std::size_t>(qp.n), {});
  qp.q.assign(static_cast<std::size_t>(qp.n), 0.0);

  for (int t = 0; t <= n_steps; ++t) {
    const double d_ref = sc.ego_trajectory.states[static_cast<std::size_t>(k_cut + t)].d;
    add_p(&qp, xi(t, 0), 2.0 * weights.w_dev);
    qp.q[static_cast<std::size_t>(xi(t, 0))] = -2.0 * weights.w_dev * d_ref;
    add_p(&qp, xi(t, 1), 2e-6);
  }
  for (int t = 0; t < n_steps; ++t) add_p(&qp, nu0 + t, 2.0 * weights.w_acc);

  const State& x0 = sc.ego_trajectory.states[static_cast<std::size_t>(k_cut)];
  add_row(&qp, {{xi(0, 0), 1.0}}, x0.d, x0.d);
  add_row(&qp, {{xi(0, 1), 1.0}}, x0.d_dot, x0.d_dot);
  qp.equality_rows += 2;

  const double dt = sc.dt;
  for (int t = 0; t < n_steps; ++t) {
    add_row(&qp, {{xi(t, 0), 1.0}, {xi(t, 1), dt}, {nu0 + t, dt * dt / 2.0}, {xi(t + 1, 0), -1.0}},
            0.0, 0.0);
    add_row(&qp, {{xi(t, 1), 1.0}, {nu0 + t, dt}, {xi(t + 1, 1), -1.0}}, 0.0, 0.0);
    qp.equality_rows += 2;
  }

  for (int t = 1; t <= n_steps; ++t) {
    const Cell& box = corridor.boxes.at(static_cast<std::size_t>(t));
    const double s_t = s_profile.at(static_cast<std::size_t>(t));
    const double road_hi = sc.road.road_left.at(s_t) - sc.ego_width / 2.0;
    const double road_lo = sc.road.road_right.at(s_t) + sc.ego_width / 2.0;
    add_row(&qp, {{xi(t, 0), 1.0}}, std::max(box.d_lo, road_lo), std::min(box.d_hi, road_hi));
    add_row(&qp, {{xi(t, 1), 1.0}}, sc.state_bounds.d_dot.lo, sc.state_bounds.d_dot.hi);
    qp.inequality_rows += 2;
  }
  for (int t = 0; t < n_steps; ++t) {
    add_row(&qp, {{nu0 + t, 1.0}}, sc.input_bounds.u_lat.lo, sc.input_bounds.u_lat.hi);
    ++qp.inequality_rows;
  }
  return qp;
}

std::optional<RepairedSegment> solve_repair(const Scenario& sc, const Corridor& corridor,
                                            int k_cut, const QpWeights& weights,
                                            const QpTolerances& tol) {
  const RepairQp built = build_qp(sc, corridor, k_cut, weights);
  const QpOutcome lon = solve_qp(built.longitudinal, tol);
  const QpSolution* lon_sol = std::get_if<QpSolution>(&lon);
  if (lon_sol == nullptr) return std::nullopt;

  const int n_steps = sc.horizon - k_cut;
  std::vector<double> s_profile(static_cast<std::size_t>(n_steps) + 1);
  for (int t = 0; t <= n_steps; ++t) {
    s_profile[static_cast<std::size_t>(t)] = lon_sol->z[static_cast<std::size_t>(4 * t)];
  }
  const QPProblem lat_qp = build_lateral_qp(sc, corridor, k_cut, s_profile, weights);
  const QpOutcome lat = solve_qp(lat_qp, tol);
  const QpSolution* lat_sol = std::get_if<QpSolution>(&lat);
  if (lat_sol == nullptr) return std::nullopt;

  RepairedSegment seg;
  seg.inputs.resize(static_cast<std::size_t>(n_steps));
  const int lon_u0 = 4 * (n_steps + 1);
  const int lat_u0 = 2 * (n_steps + 1);
  for (int t = 0; t < n_steps; ++t) {
    seg.inputs[static_cast<std::size_t>(t)].u_long = lon_sol->z[static_cast<std::size_t>(lon_u0 + t)];
    seg.inputs[static_cast<std::size_t>(t)].u_lat = lat_sol->z[static_cast<std::size_t>(lat_u0 + t)];
  }
  // re-simulate so the segment is exactly dynamics-consistent
  seg.states.push_back(sc.ego_trajectory.states[static_cast<std::size_t>(k_cut)]);
  for (const Input& u : seg.inputs) {
    seg.states.push_back(step_dynamics(seg.states.back(), u, sc.dt));
  }
  return seg;
}

SpliceOutcome splice_and_verify(const Scenario& sc, const RepairedSegment& segment, int k_cut,
                                const Formula& rule, const PredicateCatalog& catalog) {
  SpliceOutcome out;
  Trajectory& traj = out.trajectory;
  traj.states.assign(sc.ego_trajectory.states.begin(),
                     sc.ego_trajectory.states.begin() + k_cut + 1);
  traj.inputs.assign(sc.ego_trajectory.inputs.begin(), sc.ego_trajectory.inputs.begin() + k_cut);
  for (std::size_t i = 1; i < segment.states.size(); ++i) traj.states.push_back(segment.states[i]);
  for (const Input& u : segment.inputs) traj.inputs.push_back(u);

  TraceSignal sig(sc, traj, catalog);
  out.tv = time_to_violation(rule, sig, 0);
  out.verified = std::isinf(out.tv) && out.tv > 0.0 && collision_free(sc, traj, k_cut);
  return out;
}

}  // namespace rulerepair
