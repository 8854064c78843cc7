#pragma once
// Semidefinite program representation and the dual-program builders.
//
// Problems are stated over a real decision vector z:
//   optimize  c.z + const   s.t.  S_b(z) = C_b + sum_k z_k A_{b,k}  PSD  (each block),
//                                 a_e.z = b_e                            (each equality).
// Hermitian blocks are described by their upper triangle; the mirrored lower
// entry is implied (diagonal coefficients must be real).

#include <cstdint>
#include <string>
#include <vector>

#include "somandbd/types.hpp"

namespace soman {

struct AffineTerm {
  std::int32_t var;   // decision index
  std::int32_t i, j;  // block cell, i <= j
  cxd coef;           // S_ij += coef * z_var
};

struct ConstTerm {
  std::int32_t i, j;  // i <= j
  cxd value;
};

struct PsdBlock {
  int n = 0;
  std::string label;
  std::vector<AffineTerm> terms;
  std::vector<ConstTerm> constants;
};

// sum_k a[k].second * z_{a[k].first} = b
struct EqConstraint {
  std::vector<std::pair<std::int32_t, double>> a;
  double b = 0;
  std::string label;
};

enum class Sense { Minimize, Maximize };

struct SdpProblem {
  int num_vars = 0;
  Sense sense = Sense::Minimize;
  VectorXd objective;  // length num_vars
  double objective_const = 0;
  std::vector<PsdBlock> blocks;
  std::vector<EqConstraint> eqs;
  std::string description;

  // Layout metadata populated by the builders (unused for generic problems).
  // Each bounded polynomial carries its own Gram matrix: the bounded-real-lemma
  // parametrization certifies one sup-norm constraint per Gram, and a matrix
  // shared across the radar and comms LMIs is strictly more restrictive (it
  // caps the dual objective below L + Q at small pulse/antenna counts).
  struct Layout {
    bool valid = false;
    ProblemDims dims;
    int q_offset = -1;   // 2K reals: (re, im) per sample
    int Q_offset = -1;   // radar Gram, K*K reals, see gram_var_* helpers
    int Qc_offset = -1;  // comms Gram, K*K reals
    int t_var = -1;      // radar spectral-norm epigraph (noisy only, -1 if absent)
    int tc_var = -1;     // comms spectral-norm epigraph
    int s_var = -1;      // residual-norm epigraph (noisy only)
    std::vector<int> gram_offsets;  // every Gram base, radar emitters first
    double mu_r = 1.0, mu_c = 1.0;
    double eps_e = 0.0;
  } layout;

  std::string to_json() const;
  void validate() const;
};

// --- builders -------------------------------------------------------------

// Canonical half-space of 3-D correlation lags: l1 in [0,M), l2, l3 over
// symmetric ranges, with (l2 > 0 or (l2 == 0 and l3 >= 0)) required at l1 = 0.
struct LagClass {
  int l1, l2, l3;
  // grid pairs (flat_row, flat_col) with coord(col) - coord(row) = (l1,l2,l3);
  // when flat_col < flat_row the cell is stored in the lower triangle and its
  // upper mirror carries the conjugate value.
  std::vector<std::pair<int, int>> cells;
  bool is_zero_lag() const { return l1 == 0 && l2 == 0 && l3 == 0; }
};

std::vector<LagClass> enumerate_lag_classes(const ProblemDims& d);

// Elementary multilevel Toeplitz selector for a lag (dense; test-scale only):
// [Theta]_{i,j} = 1 iff coord(j) - coord(i) = (l1,l2,l3).
MatrixXd build_theta(const ProblemDims& d, int l1, int l2, int l3);

// maximize Re<q,y> over (q, Q_r, Q_c): one masked lifting LMI per channel,
// each with its own Gram carrying a full set of unit multilevel-Toeplitz trace
// constraints.  Each Gram's positive semidefiniteness is implied by its LMI
// (Schur complement), so no standalone Gram cone is added.
SdpProblem build_noiseless_dual(const Observation& obs, const SubspaceBases& bases,
                                int max_block = 8192);

// minimize ||q - y||_2 subject to the mu-scaled LMIs, zero off-lag trace
// constraints on each Gram, and a per-Gram trace/spectral-norm budget
//   Tr(Q_i) + (eps_e + 2 sqrt(K)) eps_e * t_i <= 1,  t_i >= ||Q_i||_2.
SdpProblem build_noisy_dual(const Observation& obs, const SubspaceBases& bases, double mu_r,
                            double mu_c, double eps_e, int max_block = 8192);

// Multi-emitter program: one masked LMI per emitter, each with its own Gram
// and trace-constraint set.  With one radar and one comms emitter this is
// exactly the noiseless builder.
SdpProblem build_ntuple_dual(const Observation& obs, const std::vector<MatrixXcd>& radar_T,
                             const std::vector<std::vector<MatrixXcd>>& comms_D,
                             int max_block = 8192);

// Theorem-style regularizer bounds scaled by rho >= 1:
//   mu_r = rho * sigma * (eps_e K + ||T||_F sqrt(M P J N_r log K)),
//   mu_c = rho * sigma * (eps_e K + ||D||_F sqrt(M P^2 J N_r log K)).
struct Regularizers {
  double mu_r = 0, mu_c = 0;
};
Regularizers compute_regularizers(const ProblemDims& d, const SubspaceBases& bases,
                                  double sigma_noise, double eps_e, double rho = 1.0);

// Decision-vector helpers shared by builders and the solution extraction.
// The *_at forms address any Gram by its base offset (layout.gram_offsets);
// the layout forms address the radar (Q_offset) and comms (Qc_offset) Grams.
int gram_re_var_at(int gram_offset, int K, int i, int j);      // i <= j
int gram_im_var_at(int gram_offset, int K, int i, int j);      // i <  j
int gram_re_var(const SdpProblem::Layout& lay, int i, int j);  // i <= j
int gram_im_var(const SdpProblem::Layout& lay, int i, int j);  // i <  j
int gramc_re_var(const SdpProblem::Layout& lay, int i, int j);
int gramc_im_var(const SdpProblem::Layout& lay, int i, int j);

}  // namespace soman
