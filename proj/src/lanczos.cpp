#include "somandbd/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace soman {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cxd = std::complex<double>;

// splitmix64-backed start vector; fixed salt keeps every run bit-identical.
void fill_deterministic(VectorXcd& v, std::uint64_t salt) {
  std::uint64_t s = 0x9e3779b97f4a7c15ULL ^ salt;
  auto next = [&s]() {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  };
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = std::complex<double>(next() - 0.5, next() - 0.5);
}

// Two classical Gram-Schmidt passes against the first `cols` columns of V.
// Returns the first-pass coefficient against column `cols-1` (the alpha).
double orthogonalize(const MatrixXcd& V, int cols, VectorXcd& w) {
  VectorXcd c1 = V.leftCols(cols).adjoint() * w;
  w.noalias() -= V.leftCols(cols) * c1;
  VectorXcd c2 = V.leftCols(cols).adjoint() * w;
  w.noalias() -= V.leftCols(cols) * c2;
  return (c1[cols - 1] + c2[cols - 1]).real();
}

}  // namespace

LanczosResult hermitian_positive_spectrum(const MatrixXcd& A, const LanczosOptions& opt,
                                          const MatrixXcd* warm) {
  const int n = static_cast<int>(A.rows());
  LanczosResult res;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  const auto Alow = A.selfadjointView<Eigen::Lower>();
  const int expect = std::clamp(opt.expect, 1, n);
  const int max_pos = opt.max_positive > 0 ? std::min(opt.max_positive, n) : std::max(1, n / 4);
  const int max_mv = opt.max_matvec > 0 ? opt.max_matvec
                                        : std::max(96, std::min(n, 6 * expect + 96));
  const int m_cap = std::min(n, 512);
  int m = std::clamp(3 * expect + 16, std::min(32, n), m_cap);

  MatrixXcd V(n, m + 1);
  VectorXd alpha = VectorXd::Zero(m), beta = VectorXd::Zero(m);
  VectorXd theta_locked, bcoup;
  int k = 0;  // locked Ritz pairs after a restart

  // Start direction: previous eigenvectors when available, else fixed noise.
  {
    VectorXcd v(n);
    if (warm && warm->rows() == n && warm->cols() > 0) {
      v = warm->rowwise().sum();
      VectorXcd jitter(n);
      fill_deterministic(jitter, 0x5eedULL);
      v += 1e-3 * v.norm() * jitter / jitter.norm();
    } else {
      fill_deterministic(v, 0x5eedULL);
    }
    double nv = v.norm();
    if (!(nv > 0) || !v.allFinite()) {
      fill_deterministic(v, 0xfa11ULL);
      nv = v.norm();
    }
    V.col(0) = v / nv;
  }

  int deflate_salt = 0;
  for (;;) {
    if (m + 1 > V.cols()) {
      V.conservativeResize(Eigen::NoChange, m + 1);
      alpha.conservativeResize(m);
      beta.conservativeResize(m);
    }
    // Extend the (arrowed) Lanczos factorization to m vectors.
    for (int j = k; j < m; ++j) {
      VectorXcd w = Alow * V.col(j);
      ++res.matvecs;
      alpha[j] = orthogonalize(V, j + 1, w);
      double b = w.norm();
      double scale_guess = std::max({std::abs(alpha[j]), j > k ? beta[j - 1] : 0.0, 1e-30});
      if (!(b > 1e-13 * scale_guess) || !w.allFinite()) {
        // invariant subspace: inject a fresh deterministic direction
        VectorXcd f(n);
        fill_deterministic(f, 0xdef1a7eULL + static_cast<std::uint64_t>(++deflate_salt));
        orthogonalize(V, j + 1, f);
        double nf = f.norm();
        beta[j] = 0.0;
        V.col(j + 1) = nf > 0 ? VectorXcd(f / nf) : V.col(j);
      } else {
        beta[j] = b;
        V.col(j + 1) = w / b;
      }
    }

    // Rayleigh-Ritz on the projected (arrow + tridiagonal) matrix.
    MatrixXd T = MatrixXd::Zero(m, m);
    for (int i = 0; i < k; ++i) {
      T(i, i) = theta_locked[i];
      T(i, k) = T(k, i) = bcoup[i];
    }
    for (int j = k; j < m; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
    const VectorXd& ev = es.eigenvalues();  // ascending
    const MatrixXd& Y = es.eigenvectors();
    double scale = std::max({std::abs(ev[0]), std::abs(ev[m - 1]), 1e-300});

    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = m - 1 - i;  // descending

    int prefix = 0;
    bool separator = false;  // converged nonpositive Ritz value inside prefix
    for (; prefix < m; ++prefix) {
      int idx = order[prefix];
      double resid = std::abs(beta[m - 1] * Y(m - 1, idx));
      if (resid > opt.tol * scale) break;
      if (ev[idx] <= 0) {
        ++prefix;
        separator = true;
        break;
      }
    }

    if (separator || (m == n && prefix == n)) {
      int kp = 0;
      while (kp < prefix && ev[order[kp]] > 0) ++kp;
      if (kp > max_pos) return res;  // dense positive side: let caller go dense
      res.values.resize(kp);
      res.vectors.resize(n, kp);
      for (int i = 0; i < kp; ++i) {
        res.values[i] = ev[order[i]];
        res.vectors.col(i).noalias() = V.leftCols(m) * Y.col(order[i]).cast<cxd>();
      }
      res.converged = true;
      return res;
    }

    int count_pos = 0;
    for (int i = 0; i < m; ++i)
      if (ev[i] > 0) ++count_pos;
    int conv_pos = 0;
    for (int i = 0; i < prefix; ++i)
      if (ev[order[i]] > 0) ++conv_pos;
    if (conv_pos > max_pos) return res;
    if (res.matvecs >= max_mv) return res;

    // Thick restart: lock the leading Ritz pairs plus a buffer.
    int keep = std::min({count_pos + 8, m - 8, n - 1});
    if (keep < 1) keep = std::min(1, m - 1);
    MatrixXcd newV(n, keep);
    VectorXd th(keep), bc(keep);
    for (int i = 0; i < keep; ++i) {
      int idx = order[i];
      newV.col(i).noalias() = V.leftCols(m) * Y.col(idx).cast<cxd>();
      th[i] = ev[idx];
      bc[i] = beta[m - 1] * Y(m - 1, idx);
    }
    VectorXcd cont = V.col(m);
    V.leftCols(keep) = newV;
    V.col(keep) = cont;
    theta_locked = th;
    bcoup = bc;
    k = keep;
    m = std::min(m + m / 2, m_cap);
    if (m <= k + 8) m = std::min(n, k + 9);
  }
}

}  // namespace soman
