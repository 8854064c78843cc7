#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <somandbd/kernels.hpp>

using namespace soman;

namespace {

// Independent transcription of the triangular-correlation sum: k runs over
// the clamped range where both shifted indices stay inside [-N, N].
double g_weight_bruteforce(int n, int N, int M) {
  double acc = 0.0;
  for (int k = std::max(n - N, -N); k <= std::min(n + N, N); ++k)
    acc += (1.0 - std::abs(k) / static_cast<double>(M)) *
           (1.0 - std::abs(n - k) / static_cast<double>(M));
  return acc / N;
}

// Trigonometric closed form (sin(T pi z) / (T sin(pi z)))^4 with T = N/2 + 1,
// extended to complex arguments. The removable singularities sit exactly at
// integer z, so any z off the integers is safe to evaluate directly.
std::complex<double> fejer_sq_closed(std::complex<double> z, int N) {
  const double T = N / 2 + 1;
  const std::complex<double> ratio =
      std::sin(T * std::numbers::pi * z) / (T * std::sin(std::numbers::pi * z));
  return std::pow(ratio, 4);
}

// Independent derivative oracle: Cauchy's integral formula on a circle of
// radius 0.1 around tau. The kernel is an entire trigonometric polynomial, so
// the trapezoid rule converges past double precision at a few hundred nodes.
double fejer_sq_cauchy(double tau, int N, int order) {
  if (order == 0 && std::abs(tau - std::round(tau)) > 1e-6)
    return fejer_sq_closed(tau, N).real();
  const int nodes = 512;
  const double radius = 0.1;
  std::complex<double> acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double ang = two_pi * k / nodes;
    const std::complex<double> w = radius * std::exp(j1i * ang);
    acc += fejer_sq_closed(tau + w, N) / std::pow(w, order);
  }
  double fact = 1.0;
  for (int m = 2; m <= order; ++m) fact *= m;
  return (fact * acc / static_cast<double>(nodes)).real();
}

}  // namespace

TEST_CASE("g_weights matches the closed form at N=1, M=3") {
  // n = 0: (2/3)(2/3) + (1)(1) + (2/3)(2/3) = 17/9
  // n = 1: k in [0, 1] only -> (1)(2/3) + (2/3)(1) = 4/3
  VectorXd g = g_weights(1, 3);
  CHECK(g.size() == 3);
  CHECK(g(1) == doctest::Approx(17.0 / 9.0).epsilon(1e-15));
  CHECK(g(2) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(g(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("g_weights equals the brute-force sum on a grid of (N, M)") {
  for (int N : {1, 2, 3, 5, 8}) {
    for (int M : {2 * N + 1, 2 * N + 3, 4 * N + 1}) {
      VectorXd g = g_weights(N, M);
      REQUIRE(g.size() == 2 * N + 1);
      for (int n = -N; n <= N; ++n)
        CHECK(g(n + N) == doctest::Approx(g_weight_bruteforce(n, N, M)).epsilon(1e-13));
    }
  }
}

TEST_CASE("g_weights is symmetric and positive") {
  VectorXd g = g_weights(6, 13);
  for (int n = 0; n < g.size(); ++n) {
    CHECK(g(n) > 0.0);
    CHECK(g(n) == doctest::Approx(g(g.size() - 1 - n)).epsilon(1e-15));
  }
}

TEST_CASE("g_weights rejects invalid sizes") {
  CHECK_THROWS(g_weights(0, 3));
  CHECK_THROWS(g_weights(3, 3));  // needs M > N
}

TEST_CASE("squared Fejer kernel matches the trigonometric closed form") {
  for (int N : {2, 3, 5, 6, 8}) {
    for (int order = 0; order <= 4; ++order) {
      for (double tau : {0.0, 0.013, 0.11, 0.25, 0.37, 0.5, 0.77, 0.999}) {
        const double direct = fejer_sq_kernel(tau, N, order);
        const double ref = fejer_sq_cauchy(tau, N, order);
        // scale the comparison by the derivative's natural magnitude
        const double scale = std::pow(two_pi * N, order);
        CHECK(direct == doctest::Approx(ref).epsilon(1e-10).scale(scale));
      }
    }
  }
}

TEST_CASE("squared Fejer kernel normalization and parity") {
  for (int N : {2, 4, 7}) {
    CHECK(fejer_sq_kernel(0.0, N, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fejer_sq_kernel(0.0, N, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(fejer_sq_kernel(0.0, N, 3) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(fejer_sq_kernel(0.0, N, 2) < 0.0);  // strict maximum at 0
    // even function: K(tau) = K(-tau)
    CHECK(fejer_sq_kernel(0.23, N, 0) == doctest::Approx(fejer_sq_kernel(-0.23, N, 0)));
    CHECK(fejer_sq_kernel(0.9, N, 0) == doctest::Approx(fejer_sq_kernel(0.1, N, 0)));
  }
}

TEST_CASE("kernel3d is the product of the per-axis kernels") {
  ProblemDims d{7, 5, 3, 1, 0, 0};
  const double tau = 0.21, nu = 0.68, beta = 0.05;
  const double k3 = kernel3d(tau, nu, beta, d, 0, 2, 1);
  const double ref = fejer_sq_kernel(tau, 3, 0) * fejer_sq_kernel(nu, 2, 2) *
                     fejer_sq_kernel(beta, 1, 1);
  CHECK(k3 == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
}

TEST_CASE("KernelTable::exact_fejer_sq reproduces the closed form") {
  for (int half : {2, 5, 6}) {
    KernelTable t = KernelTable::exact_fejer_sq(half);
    CHECK(t.g.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t.hi <= half);
    for (double x : {0.0, 0.09, 0.41}) {
      const cxd v = t.eval(x, 0);
      CHECK(std::abs(v.imag()) < 1e-12);
      CHECK(v.real() == doctest::Approx(fejer_sq_kernel(x, half, 0)).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("KernelTable::axis_weights normalizes g_weights and handles length 1") {
  KernelTable t = KernelTable::axis_weights(7);  // half = 3
  CHECK(t.lo == -3);
  CHECK(t.hi == 3);
  CHECK(t.g.sum() == doctest::Approx(1.0).epsilon(1e-14));
  VectorXd raw = g_weights(3, 7);
  const double total = raw.sum();
  for (int i = 0; i < raw.size(); ++i)
    CHECK(t.g(i) == doctest::Approx(raw(i) / total).epsilon(1e-14));

  KernelTable one = KernelTable::axis_weights(1);
  CHECK(one.lo == 0);
  CHECK(one.hi == 0);
  CHECK(one.g(0) == doctest::Approx(1.0));
  CHECK(one.eval(0.37, 0).real() == doctest::Approx(1.0));
  CHECK(one.kappa() == doctest::Approx(0.0));

  CHECK_THROWS(KernelTable::axis_weights(0));
  CHECK_THROWS(KernelTable::axis_weights(2));  // no centered weight sequence
}

TEST_CASE("KernelTable::kappa equals the root curvature of the tabulated kernel") {
  KernelTable t = KernelTable::exact_fejer_sq(5);
  double acc = 0.0;
  for (int n = t.lo; n <= t.hi; ++n) {
    const double w = two_pi * n;
    acc += t.g(n - t.lo) * w * w;
  }
  CHECK(t.kappa() == doctest::Approx(std::sqrt(acc)).epsilon(1e-13));
  // and |K''(0)| from eval
  CHECK(std::abs(t.eval(0.0, 2).real()) == doctest::Approx(acc).epsilon(1e-12));
}
