#pragma once

#include <array>
#include <string>

#include <somandbd/model.hpp>
#include <somandbd/types.hpp>

namespace soman {

// Executable form of the dual-certificate construction: build the
// interpolation system for a known scene, solve the weighted least-norm
// problem for a candidate dual vector q0, and verify the peak/derivative/
// off-support conditions numerically.

struct CertificateReport {
  double interp_residual = 0.0;  // max over atoms of ||f(atom) - sign(alpha) coef||
  double deriv_residual = 0.0;   // max norm of the three partial derivatives at atoms
  double offgrid_max = 0.0;      // max ||f||_2 over the fine grid away from atoms
  double H_invertibility = 0.0;  // smallest singular value of H
  double H_deviation = 0.0;      // ||H - E[H]||_2, E[H] estimated by basis redraws
  bool passed = false;
};

// Interpolation matrix, rows stacked as
//   [radar value; radar d/dtau; radar d/dnu; radar d/dbeta;
//    comms value; comms d/dtau; comms d/dnu; comms d/dbeta]
// with J rows per radar atom block and PJ per comms atom block; derivative
// multipliers are j2pi*n, j2pi*(p - floor((P-1)/2)), j2pi*(r - floor((N_r-1)/2)).
// Row r applied to q equals the localize-module evaluation of that functional.
// Note: each comms nu-derivative row is by construction the value row scaled
// by its pulse multiplier (the per-pulse polynomial depends on nu only through
// a unit-modulus factor), so F is structurally rank-deficient whenever Q >= 1.
MatrixXcd build_F(const Scene& scene, const SubspaceBases& bases, const ProblemDims& dims);

// Certificate weights omega_mt = sqrt(N/g_N(n)) sqrt(P/g_P(p)) sqrt(N_r/g_{N_r}(r)),
// each axis using its own (half-size, full-size) weight sequence centered at
// floor((len-1)/2); length-1 axes contribute a unit factor.  Even P or N_r is
// rejected (the centered weight range is only defined for odd axes).
VectorXd certificate_weights(const ProblemDims& dims);

// Weighted least-norm candidate: minimizes ||diag(omega) q||_2 subject to the
// consistent interpolation conditions (radar value + all three derivatives;
// comms value + tau/beta derivatives -- the comms nu-derivative conditions are
// linearly dependent on the value rows and hold automatically in collapsed
// form for pulse-aligned message coefficients).  The ground-truth u, v are
// regenerated from scene.seed.  Throws when the reduced system is
// rank-deficient (atoms too close / dims too small).
VectorXcd construct_certificate(const Scene& scene, const SubspaceBases& bases,
                                const ProblemDims& dims);

// Gram matrix of all 4(LJ+QPJ) interpolation functionals under the
// omega^{-2} inner product, derivative blocks scaled by the per-axis inverse
// curvature 1/kappa and the whole matrix by 1/sum(omega^{-2}) so that the
// value-value diagonal is 1 in expectation (exactly 1 for the unit-modulus
// basis draws used here).
MatrixXcd build_H(const Scene& scene, const SubspaceBases& bases, const ProblemDims& dims);

// Evaluates the interpolation and off-support conditions for q0:
//   interp_residual <= 1e-6, deriv_residual <= 1e-4, offgrid_max < 1 => passed.
// Off-support maxima are taken over the localization fields (radar PJ-norm^2 is
// the plain J-component field; comms uses the pulse-collapsed field) on the
// fine grid minus wrap-around boxes of radii 1/(2M), 1/(2P), 1/(2N_r) around
// that channel's atoms.  fine_grid entries of 0 select 8M x 8P x 8N_r.
CertificateReport validate_certificate(const VectorXcd& q0, const Scene& scene,
                                       const SubspaceBases& bases, const ProblemDims& dims,
                                       std::array<int, 3> fine_grid = {0, 0, 0});

std::string certificate_report_to_json(const CertificateReport& report);

}  // namespace soman
