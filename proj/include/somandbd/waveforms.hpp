#pragma once

#include <string>
#include <vector>

#include <somandbd/model.hpp>
#include <somandbd/types.hpp>

namespace soman {

// Recovery of the unknown waveform / message coefficients and path amplitudes
// from localized channel parameters: y = W p with the stacked unknown
// p = [alpha_r,1 u; ...; alpha_r,L u; alpha_c,1 v; ...; alpha_c,Q v].

struct RecoveredSignals {
  VectorXcd u_hat;                // J, unit norm, leading entry real-positive
  VectorXcd v_hat;                // PJ, unit norm, leading entry real-positive
  VectorXcd alphas_r;             // L
  VectorXcd alphas_c;             // Q
  VectorXcd s_hat;                // M, = T u_hat
  std::vector<VectorXcd> g_hat;   // P messages, each M, = D_p v_hat_p
  double residual = 0.0;          // ||W p - y||_2
  std::string scale_note;         // global scaling ambiguity marker
};

// K x (LJ + QPJ) mixing matrix from estimated atoms.  Radar column block l at
// row mt: conj(w(r_l)[mt]) * t_n^H; comms block q at row mt has support only on
// its pulse sub-block p(mt): conj(w(c_q)[mt]) * d_v^H.
MatrixXcd build_W(const Channel3D& r_hats, const Channel3D& c_hats, const SubspaceBases& bases,
                  const ProblemDims& dims);

// Least-squares p, then per-block de-mixing: common u (resp. v) as the
// dominant left singular direction across the radar (comms) blocks, amplitudes
// as the per-block scales.  Throws when cond(W) > 1e10, naming the closest
// atom pair.
RecoveredSignals recover_ls(const MatrixXcd& W, const VectorXcd& y, const Channel3D& r_hats,
                            const Channel3D& c_hats, const SubspaceBases& bases,
                            const ProblemDims& dims);

// Data-driven model-order selection.  The dual polynomial can touch the unit
// ball at isolated spurious points (the primal-optimal measure carries tiny
// off-support mass when recovery is marginal), so candidate peaks are refit
// jointly by least squares and atoms whose fitted coefficient-block norm falls
// below rel_cut times the largest block norm across both channels are dropped;
// the refit/prune loop runs until the set stabilizes.  Candidates must arrive
// strongest-first (extract_peaks order): oversized or rank-deficient candidate
// sets back off by discarding the weakest candidate instead of failing.
struct AtomSelection {
  Channel3D radar, comms;    // surviving atoms, alpha = fitted amplitude
  RecoveredSignals signals;  // least-squares refit on the surviving set
  int dropped_r = 0, dropped_c = 0;
  int rounds = 0;
};
AtomSelection select_atoms(const VectorXcd& y, const Channel3D& cand_r, const Channel3D& cand_c,
                           const SubspaceBases& bases, const ProblemDims& dims,
                           double rel_cut = 0.05, int max_rounds = 8);

// Alternating gain/phase-error calibration: e-step minimizes the residual over
// per-antenna errors on the sphere ||e|| = eps_e (multiplier found by
// bisection), p-step re-solves the row-scaled least squares.  The residual
// objective is asserted non-increasing; stops at relative change < 1e-8 or the
// iteration cap.
struct AlternatingResult {
  RecoveredSignals signals;
  VectorXcd e_hat;                 // N_r per-antenna multiplicative errors
  std::vector<double> objectives;  // residual^2 after each full iteration
  int iterations = 0;
};
AlternatingResult recover_alternating(const VectorXcd& y, const Channel3D& r_hats,
                                      const Channel3D& c_hats, const SubspaceBases& bases,
                                      const ProblemDims& dims, double eps_e, int iters = 50);

// JSON dump of all recovered quantities (vectors as [re, im] pair lists).
std::string recovered_to_json(const RecoveredSignals& rec);
// <prefix>.json plus u/v/s as <prefix>.{u,v,s}.cf64.
void save_recovered(const std::string& prefix, const RecoveredSignals& rec);

}  // namespace soman
