#pragma once
// Deterministic thick-restart Lanczos for the strictly positive end of a
// Hermitian spectrum. Used by the solver's PSD projection when one side of
// the spectrum is expected to be low-rank; every run is bit-reproducible
// (fixed internal start vector, no timing-dependent branches).

#include <Eigen/Dense>

namespace soman {

struct LanczosOptions {
  int expect = 8;          // anticipated number of positive eigenvalues
  double tol = 1e-9;       // Ritz residual tolerance, relative to spectral scale
  int max_matvec = 0;      // 0 = choose from matrix size
  int max_positive = 0;    // abort when more positives than this (0 = n/4)
};

struct LanczosResult {
  bool converged = false;       // positive spectrum fully separated
  Eigen::VectorXd values;       // eigenvalues > 0, descending
  Eigen::MatrixXcd vectors;     // matching orthonormal eigenvectors
  int matvecs = 0;
};

// All eigenpairs of Hermitian A with eigenvalue > 0. `converged` is set once a
// converged Ritz value <= 0 separates the returned set from the rest of the
// spectrum (or the whole space was exhausted). `warm` optionally seeds the
// start vector with the previous call's eigenvectors.
LanczosResult hermitian_positive_spectrum(const Eigen::MatrixXcd& A, const LanczosOptions& opt,
                                          const Eigen::MatrixXcd* warm = nullptr);

}  // namespace soman
