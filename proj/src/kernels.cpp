#include "somandbd/kernels.hpp"

#include <cmath>

namespace soman {

VectorXd g_weights(int N, int M) {
  if (N < 1) throw std::invalid_argument("g_weights: N must be >= 1");
  if (M <= N) throw std::invalid_argument("g_weights: M must exceed N");
  VectorXd g(2 * N + 1);
  for (int n = -N; n <= N; ++n) {
    double acc = 0;
    int k0 = std::max(n - N, -N), k1 = std::min(n + N, N);
    for (int k = k0; k <= k1; ++k)
      acc += (1.0 - std::abs(k) / double(M)) * (1.0 - std::abs(n - k) / double(M));
    g(n + N) = acc / N;
  }
  return g;
}

KernelTable KernelTable::exact_fejer_sq(int half) {
  if (half < 0) throw std::invalid_argument("exact_fejer_sq: negative half-size");
  int T = half / 2 + 1;      // largest integer with support 2T-2 <= half
  int S = 2 * (T - 1);       // coefficient support
  KernelTable t;
  t.lo = -S;
  t.hi = S;
  t.g = VectorXd::Zero(2 * S + 1);
  // autocorrelation of the triangle (1 - |k|/T), normalized by T^2
  for (int n = -S; n <= S; ++n) {
    double acc = 0;
    for (int k = -(T - 1); k <= T - 1; ++k) {
      int m = n - k;
      if (std::abs(m) <= T - 1)
        acc += (1.0 - std::abs(k) / double(T)) * (1.0 - std::abs(m) / double(T));
    }
    t.g(n + S) = acc / double(T * T);
  }
  return t;
}

KernelTable KernelTable::axis_weights(int len) {
  if (len < 1) throw std::invalid_argument("axis_weights: axis length must be >= 1");
  KernelTable t;
  if (len == 1) {
    t.lo = t.hi = 0;
    t.g = VectorXd::Ones(1);
    return t;
  }
  int c = (len - 1) / 2;  // centering offset
  int N = c;
  if (N < 1) throw std::invalid_argument("axis_weights: axis length 2 unsupported");
  // paper sequence evaluated on the centered index range of this axis
  // (for even lengths the range is asymmetric by one on the right)
  t.lo = -c;
  t.hi = len - 1 - c;
  t.g = VectorXd::Zero(len);
  double sum = 0;
  for (int n = t.lo; n <= t.hi; ++n) {
    double acc = 0;
    int k0 = std::max(n - N, -N), k1 = std::min(n + N, N);
    for (int k = k0; k <= k1; ++k)
      acc += (1.0 - std::abs(k) / double(len)) * (1.0 - std::abs(n - k) / double(len));
    t.g(n - t.lo) = acc / N;
    sum += t.g(n - t.lo);
  }
  t.g /= sum;
  return t;
}

cxd KernelTable::eval(double x, int order) const {
  cxd acc = 0;
  for (int n = lo; n <= hi; ++n) {
    double w = two_pi * n;
    double ph = w * x;
    cxd rot(std::cos(ph), std::sin(ph));
    cxd deriv = 1.0;
    for (int m = 0; m < order; ++m) deriv *= cxd(0.0, w);
    acc += g(n - lo) * deriv * rot;
  }
  return acc;
}

double KernelTable::kappa() const {
  double acc = 0;
  for (int n = lo; n <= hi; ++n) acc += g(n - lo) * (two_pi * n) * (two_pi * n);
  return std::sqrt(acc);
}

double fejer_sq_kernel(double tau, int N, int order) {
  if (order < 0 || order > 4) throw std::invalid_argument("fejer_sq_kernel: order must be 0..4");
  KernelTable t = KernelTable::exact_fejer_sq(N);
  return t.eval(tau, order).real();
}

double kernel3d(double tau, double nu, double beta, const ProblemDims& d, int m1, int m2,
                int m3) {
  d.validate();
  return fejer_sq_kernel(tau, d.N(), m1) * fejer_sq_kernel(nu, (d.P - 1) / 2, m2) *
         fejer_sq_kernel(beta, (d.N_r - 1) / 2, m3);
}

}  // namespace soman
