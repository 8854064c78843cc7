#pragma once
// Self-contained first-order solver for the standard-form SDPs emitted by the
// builders: PSD block cones plus affine equalities over a real decision
// vector. Operator splitting (ADMM): a closed-form regularized KKT step in z,
// a PSD projection per block, and a scaled dual update, with over-relaxation,
// residual-balanced penalty adaptation and optional Jacobi variable scaling.

#include <limits>
#include <string>

#include "somandbd/sdp.hpp"

namespace soman {

enum class ProjectionKind {
  Auto,           // complex eig, switching to Lanczos when one side is low-rank
  RealEmbedding,  // project through the 2n x 2n real symmetric embedding
  ComplexEig,     // full complex Hermitian eigendecomposition
  Lanczos,        // force partial-spectrum projections (falls back when dense)
};

struct SolverConfig {
  double tol_abs = 1e-7;
  double tol_rel = 1e-6;
  double tol_gap = 1e-5;    // relative primal-dual objective gap
  int max_iter = 50000;
  double rho = 1.0;         // initial ADMM penalty
  double over_relax = 1.6;  // relaxation factor in [1, 2)
  bool adaptive_rho = true;
  bool scaling = true;      // diagonal variable equilibration
  ProjectionKind projection = ProjectionKind::Auto;
  int check_every = 25;     // stopping-test cadence (iterations)
  int log_every = 100;      // checkpoint cadence for the CSV log
  std::string log_path;     // empty = no log
  bool verbose = false;

  void validate() const;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible };

struct SolverStats {
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();  // relative
  double best_residual_max = std::numeric_limits<double>::infinity();
  double objective = 0;  // user-sense objective at the reported iterate
  double rho_final = 0;
  double seconds = 0;
  // |in-loop stopping values - recomputed-at-exit values|, consistency check
  double residual_recompute_diff = 0;
  std::string detail;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::MaxIter;
  VectorXd z;  // raw decision vector
  double objective_value = 0;
  SolverStats stats;

  // Populated when the problem carries the builder layout.
  VectorXcd q;       // K
  MatrixXcd Q;       // K x K Hermitian Gram of the radar polynomial
  MatrixXcd Qc;      // K x K Hermitian Gram of the comms polynomial
  MatrixXcd Qhat_r;  // K x J strip of the (first) radar lifting block
  MatrixXcd Qhat_c;  // K x PJ strip of the (first) comms lifting block
  double t = 0, tc = 0, s = 0;
};

SdpSolution solve_sdp(const SdpProblem& prob, const SolverConfig& cfg = {});

// [[Re H, -Im H], [Im H, Re H]]; eigenvalues of H doubled in multiplicity.
MatrixXd hermitian_to_real_embedding(const MatrixXcd& H);
// Inverse of the embedding (averages the redundant copies).
MatrixXcd real_embedding_to_hermitian(const MatrixXd& G);

// Frobenius-nearest PSD matrix, computed through the real embedding.
// Symmetrizes the input first.
MatrixXcd psd_project(const MatrixXcd& H);

}  // namespace soman
