#pragma once
// Problem dimensions and the flattened sample indexing shared by every module.
//
// A scene is sampled on an M x P x N_r grid: M = 2N+1 subcarriers (fast time),
// P pulses (slow time), N_r antennas. The flat sample index is
//   mt = (n + N) + M*p + M*P*r,  n in [-N, N], p in [0, P), r in [0, N_r).

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace soman {

using cxd = std::complex<double>;
inline constexpr cxd j1i{0.0, 1.0};
inline constexpr double two_pi = 6.283185307179586476925286766559;

struct ProblemDims {
  int M = 1;    // subcarriers per pulse, odd
  int P = 1;    // pulses
  int N_r = 1;  // receive antennas
  int J = 1;    // waveform/message subspace dimension
  int L = 0;    // radar scatterers
  int Q = 0;    // communication paths

  int N() const { return (M - 1) / 2; }
  int K() const { return M * P * N_r; }  // total samples
  int PJ() const { return P * J; }

  void validate() const {
    if (M < 1 || M % 2 == 0) throw std::invalid_argument("dims: M must be odd and >= 1");
    if (P < 1 || N_r < 1 || J < 1) throw std::invalid_argument("dims: P, N_r, J must be >= 1");
    if (L < 0 || Q < 0) throw std::invalid_argument("dims: L, Q must be >= 0");
  }
};

// 3-D sample coordinate; n is the signed subcarrier index.
struct SampleIdx {
  int n;  // [-N, N]
  int p;  // [0, P)
  int r;  // [0, N_r)
};

inline int flat_index(const ProblemDims& d, SampleIdx s) {
  return (s.n + d.N()) + d.M * s.p + d.M * d.P * s.r;
}

inline SampleIdx sample_index(const ProblemDims& d, int mt) {
  SampleIdx s;
  s.n = mt % d.M - d.N();
  s.p = (mt / d.M) % d.P;
  s.r = mt / (d.M * d.P);
  return s;
}

// Distance on the unit torus (all of tau, nu, beta live in [0,1) with wrap-around).
inline double wrap_dist(double a, double b) {
  double t = a - b;
  t -= static_cast<long long>(t);  // |t| < 1
  double x = t < 0 ? t + 1.0 : t;  // [0,1)
  return x <= 0.5 ? x : 1.0 - x;
}

inline double wrap01(double x) {
  double y = x - static_cast<long long>(x);
  return y < 0 ? y + 1.0 : y;
}

}  // namespace soman
