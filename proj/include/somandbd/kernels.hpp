#pragma once
// Squared-Fejer interpolation kernels and the triangular-correlation weight
// sequences used by the certificate construction.
//
// Two related objects live here:
//  * g_weights(N, M): the raw weight sequence
//      g_N(n) = (1/N) sum_k (1 - |k|/M)(1 - |n-k|/M),  n in [-N, N],
//    used (up to an axis-constant) inside the certificate weighting. It is
//    positive and symmetric but does not sum to 1.
//  * fejer_sq_kernel / KernelTable: the exact squared Fejer trigonometric
//    polynomial K(tau) = (sin(T pi tau) / (T sin(pi tau)))^4 with the integer
//    parameter T = floor(N/2)+1, whose Fourier coefficients are the
//    normalized triangle autocorrelation (support |n| <= 2T-2 <= N) and which
//    satisfies K(0) = 1 exactly.

#include <Eigen/Dense>

#include "somandbd/dims.hpp"

namespace soman {

using Eigen::VectorXd;

// Raw certificate weight sequence over n in [-N, N] (entry index n + N).
// Requires N >= 1 and M > N.
VectorXd g_weights(int N, int M);

// K_N^(order)(tau) of the exact squared Fejer kernel with T = floor(N/2)+1.
// order is the derivative order (0..4 supported).
double fejer_sq_kernel(double tau, int N, int order = 0);

// Separable 3-D kernel K(tau)K(nu)K(beta) with per-axis half-sizes
// (M-1)/2, floor((P-1)/2), floor((N_r-1)/2); orders select per-axis
// derivative orders.
double kernel3d(double tau, double nu, double beta, const ProblemDims& d, int m1 = 0,
                int m2 = 0, int m3 = 0);

// Tabulated 1-D kernel: normalized coefficients over a centered integer index
// range [lo, hi]; evaluation sums g(n) (j 2 pi n)^order e^{j 2 pi n x}.
struct KernelTable {
  int lo = 0;
  int hi = 0;
  VectorXd g;  // size hi-lo+1, sums to 1

  cxd eval(double x, int order = 0) const;
  // curvature scale sqrt(|K''(0)|) = sqrt(sum g(n) (2 pi n)^2)
  double kappa() const;

  // Exact squared-Fejer coefficients for half-size N (symmetric support).
  static KernelTable exact_fejer_sq(int half);
  // Normalized paper weight sequence for an axis of the given length,
  // centered at floor((len-1)/2). Length-1 axes give the trivial kernel.
  static KernelTable axis_weights(int len);
};

}  // namespace soman
