#pragma once
// Forward model: steering vectors, random bases/scenes, the lifted sensing
// operators B_r/B_c and their adjoints, direct synthesis and the error model.

#include <cstdint>

#include "somandbd/types.hpp"

namespace soman {

// w(r)[mt] = exp(+j 2 pi (n*tau + p*nu + r*beta)), length K.
VectorXcd steering_vector(const ProblemDims& d, double tau, double nu, double beta);

// h = sum_l conj(alpha_l) w(r_l), so that X = u h^H = sum_l alpha_l u w(r_l)^H.
VectorXcd channel_vector(const ProblemDims& d, const Channel3D& ch);

// Rows b_n = [1, e^{j2pi s_n}, ..., e^{j2pi (J-1) s_n}], s_n ~ N(0,1), for T
// and for each pulse block of D. Deterministic in the seed.
SubspaceBases random_bases(const ProblemDims& d, std::uint64_t seed);

// u entrywise uniform [0,1]^2 re/im then normalized; v is a normalized J-vector
// drawn the same way and tiled across the P pulse blocks (pulse-aligned gauge
// representative).  Lifted matrices built from the scene channels.
GroundTruth random_ground_truth(const ProblemDims& d, const Channel3D& radar,
                                const Channel3D& comms, std::uint64_t seed);

// Per-axis minimum separations enforced inside each channel when drawing
// random scenes (rejection sampling); atoms get unit-modulus amplitudes with
// uniform phases unless amplitude magnitudes are supplied.
struct SceneDraw {
  double delta_tau = 0.0;
  double delta_nu = 0.0;
  double delta_beta = 0.0;
  std::vector<double> radar_mags;  // optional per-atom |alpha|
  std::vector<double> comms_mags;
};

Scene random_scene(const ProblemDims& d, std::uint64_t seed, const SceneDraw& draw = {});

// [B_r(X)]_mt = t_n^H X e_mt  (X is J x K);   [B_c(X)]_mt = d_v^H X e_mt
// with d_v the length-PJ row supported on pulse block p(mt).
VectorXcd apply_Br(const MatrixXcd& X_r, const ProblemDims& d, const SubspaceBases& b);
VectorXcd apply_Bc(const MatrixXcd& X_c, const ProblemDims& d, const SubspaceBases& b);

// Adjoints w.r.t. the real inner product Re tr(A^H B):
// adjoint_Br(q) = sum_mt q_mt t_n e_mt^T  (J x K), column mt = q_mt * t_n.
MatrixXcd adjoint_Br(const VectorXcd& q, const ProblemDims& d, const SubspaceBases& b);
MatrixXcd adjoint_Bc(const VectorXcd& q, const ProblemDims& d, const SubspaceBases& b);

// Direct multi-atom synthesis
//   y_mt = sum_l alpha_l (t_n^H u) e^{-j2pi(n tau_l + p nu_l + r beta_l)}
//        + sum_q alpha_q (d_v^H v) e^{-j2pi(...)};
// equals apply_Br(X_r) + apply_Bc(X_c) up to rounding.
VectorXcd synth_observation(const ProblemDims& d, const SubspaceBases& b,
                            const Channel3D& radar, const Channel3D& comms,
                            const GroundTruth& gt);

// y_obs = (1 + e_{r(mt)}) * y_clean + noise, e_m = (1+n_m) e^{j phi_m} - 1
// with n_m, phi_m ~ N(0, sigma_gainphase^2); noise per-entry complex
// N(0, sigma_noise^2). Deterministic in the seed.
PerturbedObservation apply_error_model(const VectorXcd& y_clean, const ProblemDims& d,
                                       const ErrorModel& em, std::uint64_t seed);

// Per-complex-entry noise std-dev so that E||noise||^2 = ||y||^2 10^(-snr/10).
double noise_sigma_for_snr(const VectorXcd& y_clean, double snr_db);

}  // namespace soman
