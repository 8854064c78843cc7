#include "somandbd/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "somandbd/lanczos.hpp"

namespace soman {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

// Real inner-product weight of an upper-triangle cell of a Hermitian matrix:
// <X,Y> = sum_diag X_ii Y_ii + 2 sum_{i<j} Re(conj(X_ij) Y_ij).
inline double cell_weight(int i, int j) { return i == j ? 1.0 : 2.0; }

enum class Side { Unknown, Positive, Negative };

struct BlockWork {
  int n = 0;
  std::string label;
  std::vector<AffineTerm> terms;  // sorted by (i, j)
  std::vector<ConstTerm> constants;
  MatrixXcd S, U, M;
  // projection policy state
  Side side = Side::Unknown;
  int side_count = 0;
  int cooldown = 0;
  MatrixXcd warm;
  bool used_lanczos = false;
};

// M = C + A z on the upper triangle, mirrored to a full Hermitian matrix.
void eval_block(BlockWork& b, const VectorXd& z) {
  b.M.setZero();
  for (const auto& t : b.terms) b.M(t.i, t.j) += t.coef * z[t.var];
  for (const auto& c : b.constants) b.M(c.i, c.j) += c.value;
  for (int i = 0; i < b.n; ++i)
    for (int j = i + 1; j < b.n; ++j) b.M(j, i) = std::conj(b.M(i, j));
}

// out += A^*(X) for the cell values produced by `cell`.
template <class CellFn>
void adjoint_accum(const BlockWork& b, CellFn cell, VectorXd& out) {
  for (const auto& t : b.terms)
    out[t.var] += cell_weight(t.i, t.j) * (std::conj(t.coef) * cell(t.i, t.j)).real();
}

double const_inner(const BlockWork& b, const MatrixXcd& X) {
  double v = 0;
  for (const auto& c : b.constants)
    v += cell_weight(c.i, c.j) * (std::conj(c.value) * X(c.i, c.j)).real();
  return v;
}

struct LinSolve {
  bool diagonal = true;
  VectorXd inv_diag;
  SpMat Hfull;
  Eigen::SimplicialLDLT<SpMat> ldlt;

  VectorXd solve(const VectorXd& x) const {
    if (diagonal) return inv_diag.cwiseProduct(x);
    return ldlt.solve(x);
  }
};

struct EqSys {
  std::vector<std::vector<std::pair<int, double>>> rows;
  VectorXd f;
  int n_eq = 0;
  bool diagonal = true;
  VectorXd inv_sdiag;
  bool use_dense = false;
  Eigen::LDLT<MatrixXd> dense;

  VectorXd apply_E(const VectorXd& x) const {
    VectorXd r(n_eq);
    for (int i = 0; i < n_eq; ++i) {
      double s = 0;
      for (const auto& [v, a] : rows[i]) s += a * x[v];
      r[i] = s;
    }
    return r;
  }
  void scatter_ET(const VectorXd& nu, VectorXd& out) const {
    out.setZero();
    for (int i = 0; i < n_eq; ++i)
      for (const auto& [v, a] : rows[i]) out[v] += a * nu[i];
  }
  VectorXd solve(const VectorXd& r) const {
    if (diagonal) return inv_sdiag.cwiseProduct(r);
    return dense.solve(r);
  }
};

// ---------------------------------------------------------------------------
// PSD projection strategies
// ---------------------------------------------------------------------------

void store_warm(BlockWork& b, const MatrixXcd& vecs) {
  int c = std::min<int>(static_cast<int>(vecs.cols()), 64);
  b.warm = vecs.leftCols(c);
}

// Full complex Hermitian eigendecomposition; rebuilds from the smaller side
// of the spectrum and records which side that was.
void project_full_complex(BlockWork& b, const MatrixXcd& W) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("solver: eigendecomposition failed on block '" + b.label + "'");
  const VectorXd& ev = es.eigenvalues();  // ascending
  const int n = b.n;
  int nneg = 0;
  while (nneg < n && ev[nneg] < 0) ++nneg;
  int npos = n - nneg;
  if (nneg <= npos) {
    b.S = W;
    if (nneg > 0) {
      MatrixXcd Vn = es.eigenvectors().leftCols(nneg);
      b.S.noalias() -= Vn * ev.head(nneg).asDiagonal() * Vn.adjoint();
      store_warm(b, Vn);
    }
    b.side = Side::Negative;
    b.side_count = nneg;
  } else {
    if (npos > 0) {
      MatrixXcd Vp = es.eigenvectors().rightCols(npos);
      b.S.noalias() = Vp * ev.tail(npos).asDiagonal() * Vp.adjoint();
      store_warm(b, Vp);
    } else {
      b.S.setZero();
    }
    b.side = Side::Positive;
    b.side_count = npos;
  }
}

void project_real_embedding(BlockWork& b, const MatrixXcd& W) {
  MatrixXd G = hermitian_to_real_embedding(W);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("solver: eigendecomposition failed on block '" + b.label + "'");
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  MatrixXd Gp = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  b.S = real_embedding_to_hermitian(Gp);
}

// Returns false when the partial-spectrum route did not certify itself; the
// caller then falls back to the full decomposition.
bool project_lanczos(BlockWork& b, const MatrixXcd& W) {
  LanczosOptions lo;
  lo.expect = std::max(1, b.side_count + 2);
  lo.tol = 1e-10;
  lo.max_positive = std::max(4, b.n / 5);
  lo.max_matvec = std::min(b.n, 10 * lo.expect + 200);
  const MatrixXcd* warm = b.warm.size() > 0 ? &b.warm : nullptr;
  if (b.side == Side::Negative) {
    MatrixXcd Wneg = -W;
    LanczosResult res = hermitian_positive_spectrum(Wneg, lo, warm);
    if (!res.converged) return false;
    b.S = W;
    int k = static_cast<int>(res.values.size());
    if (k > 0)
      b.S.noalias() += res.vectors * res.values.asDiagonal() * res.vectors.adjoint();
    b.side_count = k;
    if (k > 0) store_warm(b, res.vectors);
    b.used_lanczos = true;
    return true;
  }
  LanczosResult res = hermitian_positive_spectrum(W, lo, warm);
  if (!res.converged) return false;
  int k = static_cast<int>(res.values.size());
  if (k > 0) {
    b.S.noalias() = res.vectors * res.values.asDiagonal() * res.vectors.adjoint();
    store_warm(b, res.vectors);
  } else {
    b.S.setZero();
  }
  b.side_count = k;
  b.used_lanczos = true;
  return true;
}

void project_block(BlockWork& b, const MatrixXcd& W, ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::RealEmbedding:
      project_real_embedding(b, W);
      return;
    case ProjectionKind::ComplexEig:
      project_full_complex(b, W);
      return;
    case ProjectionKind::Lanczos:
      if (b.n >= 32 && b.side != Side::Unknown && b.side_count <= b.n / 3 &&
          project_lanczos(b, W))
        return;
      project_full_complex(b, W);
      return;
    case ProjectionKind::Auto:
      if (b.n >= 160 && b.cooldown == 0 && b.side != Side::Unknown &&
          b.side_count <= b.n / 6) {
        if (project_lanczos(b, W)) return;
        b.cooldown = 25;  // partial route failed; learn counts densely for a while
      }
      if (b.cooldown > 0) --b.cooldown;
      project_full_complex(b, W);
      return;
  }
}

struct CheckValues {
  double pri = 0, dual = 0, gap = 0;
  double eps_pri = 0, eps_dual = 0;
  double pobj = 0, dobj = 0;
  double objective_user = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// public helpers
// ---------------------------------------------------------------------------

MatrixXd hermitian_to_real_embedding(const MatrixXcd& H) {
  const Eigen::Index n = H.rows();
  MatrixXd G(2 * n, 2 * n);
  G.topLeftCorner(n, n) = H.real();
  G.topRightCorner(n, n) = -H.imag();
  G.bottomLeftCorner(n, n) = H.imag();
  G.bottomRightCorner(n, n) = H.real();
  return G;
}

MatrixXcd real_embedding_to_hermitian(const MatrixXd& G) {
  const Eigen::Index n = G.rows() / 2;
  if (G.rows() != 2 * n || G.cols() != 2 * n)
    throw std::invalid_argument("embedding: matrix must be 2n x 2n");
  MatrixXcd H(n, n);
  H.real() = 0.5 * (G.topLeftCorner(n, n) + G.bottomRightCorner(n, n));
  H.imag() = 0.5 * (G.bottomLeftCorner(n, n) - G.topRightCorner(n, n));
  return H;
}

MatrixXcd psd_project(const MatrixXcd& H) {
  MatrixXcd A = 0.5 * (H + H.adjoint());
  MatrixXd G = hermitian_to_real_embedding(A);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("psd_project: eigendecomposition failed");
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  MatrixXd Gp = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  MatrixXcd P = real_embedding_to_hermitian(Gp);
  return 0.5 * (P + P.adjoint());
}

void SolverConfig::validate() const {
  if (!(tol_abs > 0) || !(tol_rel > 0) || !(tol_gap > 0))
    throw std::invalid_argument("solver config: tolerances must be > 0");
  if (max_iter < 1) throw std::invalid_argument("solver config: max_iter must be >= 1");
  if (!(rho > 0)) throw std::invalid_argument("solver config: rho must be > 0");
  if (over_relax < 1.0 || over_relax >= 2.0)
    throw std::invalid_argument("solver config: over_relax must lie in [1, 2)");
  if (check_every < 1) throw std::invalid_argument("solver config: check_every must be >= 1");
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

SdpSolution solve_sdp(const SdpProblem& prob, const SolverConfig& cfg) {
  cfg.validate();
  prob.validate();
  if (prob.blocks.empty()) throw std::invalid_argument("solver: problem has no PSD blocks");
  const auto t_start = std::chrono::steady_clock::now();
  const int nv = prob.num_vars;
  const double sense_flip = prob.sense == Sense::Minimize ? 1.0 : -1.0;

  // ---- assemble block workspaces -----------------------------------------
  std::vector<BlockWork> blocks(prob.blocks.size());
  int max_n = 0;
  for (size_t bi = 0; bi < prob.blocks.size(); ++bi) {
    BlockWork& b = blocks[bi];
    b.n = prob.blocks[bi].n;
    b.label = prob.blocks[bi].label;
    b.terms = prob.blocks[bi].terms;
    b.constants = prob.blocks[bi].constants;
    std::stable_sort(b.terms.begin(), b.terms.end(), [](const AffineTerm& a, const AffineTerm& c) {
      return a.i != c.i ? a.i < c.i : a.j < c.j;
    });
    b.S = MatrixXcd::Zero(b.n, b.n);
    b.U = MatrixXcd::Zero(b.n, b.n);
    b.M = MatrixXcd::Zero(b.n, b.n);
    max_n = std::max(max_n, b.n);
  }
  MatrixXcd Wbuf(max_n, max_n);

  // ---- Jacobi variable scaling -------------------------------------------
  VectorXd dscale = VectorXd::Ones(nv);
  if (cfg.scaling) {
    VectorXd hd = VectorXd::Zero(nv);
    for (const auto& b : blocks)
      for (const auto& t : b.terms)
        hd[t.var] += cell_weight(t.i, t.j) * std::norm(t.coef);
    double hmax = hd.maxCoeff();
    if (hmax > 0)
      for (int k = 0; k < nv; ++k) dscale[k] = hd[k] > 1e-12 * hmax ? std::sqrt(hd[k]) : 1.0;
    for (auto& b : blocks)
      for (auto& t : b.terms) t.coef /= dscale[t.var];
  }
  VectorXd cbar(nv);
  for (int k = 0; k < nv; ++k) cbar[k] = sense_flip * prob.objective[k] / dscale[k];
  const double kmin = sense_flip * prob.objective_const;

  // ---- H = sum A^*A (scaled), split into diagonal + off-diagonal ----------
  VectorXd Hdiag = VectorXd::Zero(nv);
  std::vector<Trip> off_trips;
  for (const auto& b : blocks) {
    size_t a = 0;
    while (a < b.terms.size()) {
      size_t e = a;
      while (e < b.terms.size() && b.terms[e].i == b.terms[a].i && b.terms[e].j == b.terms[a].j)
        ++e;
      double w = cell_weight(b.terms[a].i, b.terms[a].j);
      for (size_t x = a; x < e; ++x)
        for (size_t y = a; y < e; ++y) {
          double v = w * (std::conj(b.terms[x].coef) * b.terms[y].coef).real();
          if (std::abs(v) < 1e-30) continue;
          if (b.terms[x].var == b.terms[y].var)
            Hdiag[b.terms[x].var] += v;
          else
            off_trips.emplace_back(b.terms[x].var, b.terms[y].var, v);
        }
      a = e;
    }
  }
  SpMat Hoff(nv, nv);
  Hoff.setFromTriplets(off_trips.begin(), off_trips.end());
  off_trips.clear();
  off_trips.shrink_to_fit();

  double hdmax = Hdiag.size() ? Hdiag.maxCoeff() : 0.0;
  double delta = 0.0;
  if (hdmax <= 0 || Hdiag.minCoeff() <= 1e-10 * hdmax)
    delta = std::max(1e-8 * std::max(hdmax, 1.0), 1e-12);

  LinSolve lin;
  lin.diagonal = Hoff.nonZeros() == 0;
  if (lin.diagonal) {
    lin.inv_diag = (Hdiag.array() + delta).inverse().matrix();
  } else {
    SpMat D(nv, nv);
    D.setIdentity();
    for (int k = 0; k < nv; ++k) D.coeffRef(k, k) = Hdiag[k] + delta;
    lin.Hfull = D + SpMat(0.5 * (Hoff + SpMat(Hoff.transpose())));
    lin.ldlt.compute(lin.Hfull);
    if (lin.ldlt.info() != Eigen::Success)
      throw std::runtime_error("solver: failed to factorize the normal matrix");
  }

  // ---- equality system -----------------------------------------------------
  EqSys eq;
  eq.n_eq = static_cast<int>(prob.eqs.size());
  eq.rows.resize(eq.n_eq);
  eq.f.resize(eq.n_eq);
  std::vector<bool> var_in_off(nv, false);
  for (int k = 0; k < Hoff.outerSize(); ++k)
    for (SpMat::InnerIterator it(Hoff, k); it; ++it) {
      var_in_off[it.row()] = true;
      var_in_off[it.col()] = true;
    }
  if (eq.n_eq > 0) {
    bool separable = true;
    for (int i = 0; i < eq.n_eq; ++i) {
      eq.f[i] = prob.eqs[i].b;
      eq.rows[i].reserve(prob.eqs[i].a.size());
      for (const auto& [v, a] : prob.eqs[i].a) {
        eq.rows[i].push_back({v, a / dscale[v]});
        if (var_in_off[v]) separable = false;
      }
    }
    if (separable) {
      // S_E = E diag(H)^(-1) E^T; diagonal when no variable is shared by rows
      std::vector<int> owner(nv, -1);
      bool shared = false;
      for (int i = 0; i < eq.n_eq && !shared; ++i)
        for (const auto& [v, a] : eq.rows[i]) {
          if (owner[v] >= 0 && owner[v] != i) {
            shared = true;
            break;
          }
          owner[v] = i;
        }
      if (!shared) {
        eq.diagonal = true;
        eq.inv_sdiag.resize(eq.n_eq);
        for (int i = 0; i < eq.n_eq; ++i) {
          double s = 0;
          for (const auto& [v, a] : eq.rows[i]) s += a * a / (Hdiag[v] + delta);
          if (!(s > 0))
            throw std::runtime_error("solver: equality row touches no conic variable");
          eq.inv_sdiag[i] = 1.0 / s;
        }
      } else {
        separable = false;
      }
    }
    if (!separable) {
      if (eq.n_eq > 2000)
        throw std::runtime_error("solver: dense equality elimination too large");
      MatrixXd SE = MatrixXd::Zero(eq.n_eq, eq.n_eq);
      VectorXd col(nv), sol(nv);
      for (int i = 0; i < eq.n_eq; ++i) {
        col.setZero();
        for (const auto& [v, a] : eq.rows[i]) col[v] = a;
        sol = lin.solve(col);
        for (int j = 0; j < eq.n_eq; ++j) {
          double s = 0;
          for (const auto& [v, a] : eq.rows[j]) s += a * sol[v];
          SE(j, i) = s;
        }
      }
      eq.diagonal = false;
      eq.use_dense = true;
      eq.dense.compute(0.5 * (SE + SE.transpose()));
      if (eq.dense.info() != Eigen::Success)
        throw std::runtime_error("solver: equality Schur factorization failed");
    }
  }

  // ---- adjoint of the constant blocks --------------------------------------
  VectorXd aC = VectorXd::Zero(nv);
  for (auto& b : blocks) {
    b.M.setZero();
    for (const auto& c : b.constants) {
      b.M(c.i, c.j) = c.value;
      b.M(c.j, c.i) = std::conj(c.value);
    }
    adjoint_accum(b, [&](int i, int j) { return b.M(i, j); }, aC);
  }

  // ---- warm start -----------------------------------------------------------
  VectorXd z = VectorXd::Zero(nv);
  if (prob.layout.valid) {
    const int K = prob.layout.dims.K();
    for (int goff : prob.layout.gram_offsets)
      for (int i = 0; i < K; ++i) z[gram_re_var_at(goff, K, i, i)] = 1.0 / K;
    if (prob.layout.t_var >= 0) z[prob.layout.t_var] = 1.0 / K;
    if (prob.layout.tc_var >= 0) z[prob.layout.tc_var] = 1.0 / K;
    if (prob.layout.s_var >= 0) {
      double ynorm = 0;
      for (const auto& blk : prob.blocks)
        if (blk.label == "residual")
          for (const auto& c : blk.constants) ynorm += std::norm(c.value);
      z[prob.layout.s_var] = 1.0 + std::sqrt(ynorm);
    }
    z = dscale.cwiseProduct(z);
  }

  double rho = cfg.rho;
  for (auto& b : blocks) {
    eval_block(b, z);
    project_block(b, b.M, cfg.projection);
  }

  // ---- iteration ------------------------------------------------------------
  std::ofstream log;
  int log_cadence = 0;
  if (!cfg.log_path.empty() && cfg.log_every > 0) {
    log.open(cfg.log_path, std::ios::trunc);
    log << "iter,primal_res,dual_res,gap,objective\n";
    log_cadence = ((cfg.log_every + cfg.check_every - 1) / cfg.check_every) * cfg.check_every;
  }

  SdpSolution out;
  SolverStats& st = out.stats;
  VectorXd g(nv), w(nv), etv(nv), nu, adjU(nv);
  VectorXd z_prev = z, z_best = z;
  CheckValues best_vals;
  bool have_best = false;
  double prev_best_window = std::numeric_limits<double>::infinity();
  int stall_checks = 0;
  bool converged = false, infeasible = false;
  std::string detail;
  const double alpha = cfg.over_relax;
  int it = 0;
  bool force_full = false;
  int verify_rounds = 0;
  CheckValues last;

  auto run_check = [&](CheckValues& cv) {
    double pri2 = 0, nM2 = 0, nS2 = 0;
    for (const auto& b : blocks) {
      pri2 += (b.M - b.S).squaredNorm();
      nM2 += b.M.squaredNorm();
      nS2 += b.S.squaredNorm();
    }
    double eqres2 = 0;
    if (eq.n_eq > 0) {
      VectorXd r = eq.apply_E(z) - eq.f;
      eqres2 = r.squaredNorm();
    }
    double dim_p = 0;
    for (const auto& b : blocks) dim_p += double(b.n) * b.n;
    cv.pri = std::sqrt(pri2 + eqres2);
    cv.eps_pri = cfg.tol_abs * std::sqrt(dim_p + eq.n_eq) +
                 cfg.tol_rel * std::max({std::sqrt(nM2), std::sqrt(nS2), eq.n_eq ? eq.f.norm() : 0.0});

    adjU.setZero();
    for (const auto& b : blocks)
      adjoint_accum(b, [&](int i, int j) { return b.U(i, j); }, adjU);
    VectorXd dvec = cbar + rho * adjU;
    double et_norm = 0;
    if (eq.n_eq > 0 && nu.size() == eq.n_eq) {
      eq.scatter_ET(nu, etv);
      dvec += rho * etv;
      et_norm = rho * etv.norm();
    }
    cv.dual = dvec.norm();
    cv.eps_dual = cfg.tol_abs * std::sqrt(double(nv)) +
                  cfg.tol_rel * std::max({cbar.norm(), rho * adjU.norm(), et_norm});

    cv.pobj = cbar.dot(z) + kmin;
    double yc = 0;
    for (const auto& b : blocks) yc += const_inner(b, b.U);  // <C, U>
    double mu_f = (eq.n_eq > 0 && nu.size() == eq.n_eq) ? rho * nu.dot(eq.f) : 0.0;
    cv.dobj = rho * yc - mu_f + kmin;  // -<C, Y> with Y = -rho U
    cv.gap = std::abs(cv.pobj - cv.dobj) / std::max({1.0, std::abs(cv.pobj), std::abs(cv.dobj)});
    cv.objective_user = sense_flip * cv.pobj;
  };

  for (it = 1; it <= cfg.max_iter; ++it) {
    // z-step: rho(Hz - g) + delta rho (z - z_prev) + cbar + E^T mu = 0, Ez = f
    g.setZero();
    for (const auto& b : blocks)
      adjoint_accum(b, [&](int i, int j) { return b.S(i, j) - b.U(i, j); }, g);
    g -= aC;
    w = g - cbar / rho;
    if (delta > 0) w += delta * z_prev;
    VectorXd wt = lin.solve(w);
    if (eq.n_eq > 0) {
      nu = eq.solve(eq.apply_E(wt) - eq.f);
      eq.scatter_ET(nu, etv);
      z = wt - lin.solve(etv);
    } else {
      z = wt;
    }

    // S- and U-steps with over-relaxation
    for (auto& b : blocks) {
      eval_block(b, z);
      auto W = Wbuf.topLeftCorner(b.n, b.n);
      W = alpha * b.M + (1.0 - alpha) * b.S + b.U;
      project_block(b, W, force_full ? ProjectionKind::ComplexEig : cfg.projection);
      b.U = W - b.S;
    }
    z_prev = z;

    const bool at_check = (it % cfg.check_every == 0) || it == cfg.max_iter;
    if (!at_check) continue;

    run_check(last);
    double rmax = std::max(last.pri / std::max(last.eps_pri, 1e-300),
                           last.dual / std::max(last.eps_dual, 1e-300));
    if (rmax < st.best_residual_max || !have_best) {
      st.best_residual_max = std::min(st.best_residual_max, rmax);
      z_best = z;
      best_vals = last;
      have_best = true;
    }

    if (log.is_open() && log_cadence > 0 && it % log_cadence == 0) {
      char line[192];
      std::snprintf(line, sizeof line, "%d,%.9e,%.9e,%.9e,%.9e\n", it, last.pri, last.dual,
                    last.gap, last.objective_user);
      log << line;
    }
    if (cfg.verbose && it % (cfg.check_every * 20) == 0)
      std::fprintf(stderr, "[solve] it=%d rho=%.2e pri=%.3e dual=%.3e gap=%.3e obj=%.6f\n", it,
                   rho, last.pri, last.dual, last.gap, last.objective_user);

    if (last.pri <= last.eps_pri && last.dual <= last.eps_dual && last.gap <= cfg.tol_gap) {
      // Partial-spectrum projections self-certify, but verify once at exit.
      bool psd_ok = true;
      for (auto& b : blocks) {
        if (!b.used_lanczos) continue;
        LanczosOptions lo;
        lo.expect = 4;
        lo.tol = 1e-8;
        lo.max_positive = std::max(4, b.n / 4);
        MatrixXcd Sneg = -b.S;
        LanczosResult chk = hermitian_positive_spectrum(Sneg, lo, nullptr);
        double tol_psd = 1e-6 * (1.0 + b.S.norm() / std::sqrt(double(b.n)));
        bool bad;
        if (chk.converged)
          bad = chk.values.size() > 0 && chk.values[0] > tol_psd;
        else {
          Eigen::SelfAdjointEigenSolver<MatrixXcd> es(b.S);
          bad = es.eigenvalues()[0] < -tol_psd;
        }
        if (bad) {
          psd_ok = false;
          break;
        }
      }
      if (psd_ok) {
        converged = true;
        break;
      }
      if (++verify_rounds > 2) {
        detail = "projection verification kept failing; reporting best iterate";
        break;
      }
      force_full = true;
      continue;
    }

    // divergence / stall heuristics
    if (std::abs(last.pobj) > 1e14) {
      infeasible = true;
      detail = "objective diverging; problem likely unbounded or infeasible";
      break;
    }
    ++stall_checks;
    if (stall_checks >= 40) {
      stall_checks = 0;
      double cur = st.best_residual_max;
      if (it >= 3000 && cur > 1e3 && cur > 0.995 * prev_best_window) {
        infeasible = true;
        detail = "primal residual stalled far above tolerance";
        break;
      }
      prev_best_window = cur;
    }

    if (cfg.adaptive_rho && it % 100 == 0) {
      double rp = last.pri / std::max(last.eps_pri, 1e-300);
      double rd = last.dual / std::max(last.eps_dual, 1e-300);
      if (rp > 5.0 * rd || rd > 5.0 * rp) {
        double fac = std::sqrt(std::max(rp, 1e-12) / std::max(rd, 1e-12));
        fac = std::clamp(fac, 0.1, 10.0);
        double rho_new = std::clamp(rho * fac, 1e-7, 1e7);
        if (rho_new != rho) {
          // scaled dual U = Y / rho: keep Y continuous across the rho change
          double ratio = rho / rho_new;
          for (auto& b : blocks) b.U *= ratio;
          rho = rho_new;
        }
      }
    }
  }
  it = std::min(it, cfg.max_iter);

  // ---- status & reporting ---------------------------------------------------
  if (converged) {
    out.status = SolveStatus::Optimal;
  } else if (infeasible) {
    out.status = SolveStatus::Infeasible;
  } else {
    out.status = SolveStatus::MaxIter;
    if (have_best) {
      z = z_best;
      last = best_vals;
      for (auto& b : blocks) eval_block(b, z);
    }
    if (detail.empty()) detail = "iteration limit reached; returning best iterate";
  }

  CheckValues recheck = last;
  if (out.status == SolveStatus::Optimal) {
    run_check(recheck);
    st.residual_recompute_diff =
        std::max({std::abs(recheck.pri - last.pri), std::abs(recheck.dual - last.dual),
                  std::abs(recheck.gap - last.gap)});
  }
  st.iterations = it;
  st.primal_residual = recheck.pri;
  st.dual_residual = recheck.dual;
  st.gap = recheck.gap;
  st.objective = recheck.objective_user;
  st.rho_final = rho;
  st.detail = detail;
  st.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  // ---- solution extraction ----------------------------------------------------
  out.z = z.cwiseQuotient(dscale);
  out.objective_value = prob.objective.dot(out.z) + prob.objective_const;

  if (prob.layout.valid) {
    const auto& lay = prob.layout;
    const int K = lay.dims.K();
    out.q.resize(K);
    for (int mt = 0; mt < K; ++mt)
      out.q[mt] = cxd(out.z[lay.q_offset + 2 * mt], out.z[lay.q_offset + 2 * mt + 1]);
    auto extract_gram = [&](int goff, MatrixXcd& G) {
      G.resize(K, K);
      for (int i = 0; i < K; ++i) {
        G(i, i) = out.z[gram_re_var_at(goff, K, i, i)];
        for (int j = i + 1; j < K; ++j) {
          G(i, j) = cxd(out.z[gram_re_var_at(goff, K, i, j)], out.z[gram_im_var_at(goff, K, i, j)]);
          G(j, i) = std::conj(G(i, j));
        }
      }
    };
    if (lay.Q_offset >= 0) extract_gram(lay.Q_offset, out.Q);
    if (lay.Qc_offset >= 0) extract_gram(lay.Qc_offset, out.Qc);
    if (lay.t_var >= 0) out.t = out.z[lay.t_var];
    if (lay.tc_var >= 0) out.tc = out.z[lay.tc_var];
    if (lay.s_var >= 0) out.s = out.z[lay.s_var];
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      if (b.label.rfind("lift_radar", 0) == 0 && out.Qhat_r.size() == 0)
        out.Qhat_r = b.M.topRightCorner(K, b.n - K);
      if (b.label.rfind("lift_comms", 0) == 0 && out.Qhat_c.size() == 0)
        out.Qhat_c = b.M.topRightCorner(K, b.n - K);
    }
  }
  return out;
}

}  // namespace soman
