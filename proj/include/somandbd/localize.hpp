#pragma once

#include <array>
#include <string>
#include <vector>

#include <somandbd/model.hpp>
#include <somandbd/types.hpp>

namespace soman {

// Evaluation and peak extraction for the vector-valued tri-variate dual
// polynomials.  The radar polynomial has J components
//   f_j(tau, nu, beta) = sum_mt q_mt T[n+N, j] e^{+j 2 pi (n tau + p nu + r beta)}.
// The comms polynomial is PJ-valued with per-pulse blocks
//   f_{(p,j)}(c) = e^{j 2 pi p nu} Phi_{p,j}(tau, beta),
// whose norm is therefore exactly constant along nu.  Doppler localization
// instead uses the pulse-collapsed field
//   f~_j(c) = (1/sqrt(P)) sum_mt q_mt D_p[n+N, j] e^{+j 2 pi (n tau + p nu + r beta)},
// which by Cauchy-Schwarz is bounded by the PJ norm (equality iff the pulse
// blocks phase-align) and peaks at exactly 1 at true atoms for pulse-aligned
// message coefficients.  Point evaluations still expose the full PJ vector.

enum class FieldKind { Radar, Comms };

// Gridded squared norm of the (radar or pulse-collapsed comms) polynomial.
// Row-major layout: values[(g1 * G_nu + g2) * G_beta + g3].
struct PolynomialField {
  int G_tau = 0, G_nu = 0, G_beta = 0;
  std::vector<double> values;  // ||f||_2^2, >= 0
  FieldKind which = FieldKind::Radar;

  double at(int g1, int g2, int g3) const {
    return values[(static_cast<std::size_t>(g1) * G_nu + g2) * G_beta + g3];
  }
  // Nyquist-safe oversampling: each grid axis at least 4x the matching dim.
  void validate(const ProblemDims& d) const;
};

struct LocalizedAtom {
  double tau = 0, nu = 0, beta = 0;
  double peak_norm2 = 0;
};

struct LocalizationResult {
  std::vector<LocalizedAtom> atoms;
  double threshold_used = 0;
  bool refined = false;
};

struct RefineResult {
  double tau = 0, nu = 0, beta = 0;
  double norm2 = 0;
  bool refined = false;  // false: ascent did not converge, coordinates = start
};

// Noisy peak levels on the squared-norm scale,
//   a_i = mu_i^2 (1 - (eps_e + 2 sqrt(K)) eps_e ||Q_i||_2),
// each using its own channel's Gram spectral norm, and the extract_peaks
// thresholds derived from them by a slack factor.
struct NoisyThresholds {
  double a_r = 0, a_c = 0;
  double threshold_r = 0, threshold_c = 0;  // slack * a
  bool usable = true;                       // false when the error bound eats the level
};

// Evaluate f (or one first derivative) at a single point by direct summation.
// Returns J components for Radar, PJ for Comms (uncollapsed per-pulse blocks).
// deriv: 0 value, 1 d/dtau, 2 d/dnu, 3 d/dbeta.  Derivative multipliers are
// j2pi*n, j2pi*(p - floor((P-1)/2)), j2pi*(r - floor((N_r-1)/2)).
VectorXcd eval_dual_at(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                       double tau, double nu, double beta, FieldKind which, int deriv = 0);

// Squared norm of the localization field (radar: ||f_r||^2; comms: collapsed
// ||f~_c||^2 / 1) at a point, with optional gradient / Hessian (3x3, symmetric).
double field_norm2_at(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                      double tau, double nu, double beta, FieldKind which,
                      std::array<double, 3>* grad = nullptr,
                      std::array<double, 6>* hess = nullptr);  // upper triangle, row-major

// Zero-padded 3-D FFT evaluation of the localization field over the grid.
// grid entries of 0 pick the default 8M x 8P x 8N_r; grid < dims is rejected.
PolynomialField eval_dual_field(const VectorXcd& q, const SubspaceBases& bases,
                                const ProblemDims& dims, std::array<int, 3> grid,
                                FieldKind which);

// Grid local maxima (26-neighbour, wrap-around) with squared norm >= threshold
// (threshold shares the ||f||^2 scale of the stored field and of the noisy
// peak levels), greedily deduplicated within the min_sep wrap-around box, then
// refined by local ascent (continuous coordinates).  Negative min_sep entries
// select the defaults 1/(2M), 1/(2P), 1/(2N_r).
LocalizationResult extract_peaks(const PolynomialField& field, const VectorXcd& q,
                                 const SubspaceBases& bases, const ProblemDims& dims,
                                 double threshold,
                                 std::array<double, 3> min_sep = {-1.0, -1.0, -1.0});

// Damped Newton ascent on the localization field's squared norm from a grid
// local maximum; falls back to gradient steps when the Newton step fails.
RefineResult refine_peak(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                         double tau0, double nu0, double beta0, FieldKind which);

// Peak levels for the noisy program.  Qc_spectral_norm < 0 reuses
// Q_spectral_norm for the comms level.  Throws when the error bound makes the
// levels negative (unusable regime); levels of exactly zero are returned with
// usable = false.
NoisyThresholds noisy_thresholds(double mu_r, double mu_c, double eps_e, const ProblemDims& dims,
                                 double Q_spectral_norm, double Qc_spectral_norm = -1.0,
                                 double slack = 0.95);

// Noiseless extract_peaks threshold: peak-norm cutoff 1 - 1e-2, stored on the
// squared-norm scale the extractor compares against.
inline constexpr double kNoiselessPeakThreshold = (1.0 - 1e-2) * (1.0 - 1e-2);

// Field export: flat binary real64 grid + JSON sidecar (shape + axis labels).
void export_field(const std::string& path, const PolynomialField& field);

}  // namespace soman
