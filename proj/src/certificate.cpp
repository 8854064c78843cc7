#include <somandbd/certificate.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include <somandbd/kernels.hpp>
#include <somandbd/localize.hpp>
#include <somandbd/rng.hpp>

namespace soman {

namespace {

cxd csign(cxd z) {
  double a = std::abs(z);
  if (a < 1e-300) return cxd(1.0, 0.0);
  return z / a;
}

// Derivative multiplier for axis a (0 = none, 1..3 = tau/nu/beta) at sample s.
cxd deriv_mult(const ProblemDims& d, const SampleIdx& s, int a) {
  if (a == 0) return cxd(1.0, 0.0);
  double m = (a == 1)   ? s.n
             : (a == 2) ? s.p - (d.P - 1) / 2
                        : s.r - (d.N_r - 1) / 2;
  return cxd(0.0, two_pi * m);
}

// One interpolation row block: for a radar atom, J rows over components j; for
// a comms atom, PJ rows over (pulse, j) with per-pulse support.
void fill_rows(MatrixXcd& F, int row0, const Atom3D& at, int deriv, bool comms,
               const SubspaceBases& b, const ProblemDims& d) {
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    double ph = two_pi * (s.n * at.tau + s.p * at.nu + s.r * at.beta);
    cxd e = cxd(std::cos(ph), std::sin(ph)) * deriv_mult(d, s, deriv);
    if (!comms) {
      for (int j = 0; j < d.J; ++j) F(row0 + j, mt) = e * b.T(s.n + d.N(), j);
    } else {
      for (int j = 0; j < d.J; ++j)
        F(row0 + s.p * d.J + j, mt) = e * b.D[s.p](s.n + d.N(), j);
    }
  }
}

// Rows of the reduced (consistent) construction system and its right-hand
// side: radar value + 3 derivatives, comms value + tau/beta derivatives.
void build_reduced(const Scene& scene, const SubspaceBases& bases, const ProblemDims& d,
                   MatrixXcd& Fred, VectorXcd& p) {
  const int L = scene.radar.size(), Q = scene.comms.size();
  const int J = d.J, PJ = d.PJ();
  const int rows = 4 * L * J + 3 * Q * PJ;
  Fred = MatrixXcd::Zero(rows, d.K());
  p = VectorXcd::Zero(rows);
  GroundTruth gt = random_ground_truth(d, scene.radar, scene.comms, scene.seed);

  int r0 = 0;
  for (int deriv = 0; deriv < 4; ++deriv)
    for (int l = 0; l < L; ++l) {
      fill_rows(Fred, r0, scene.radar.atoms[l], deriv, false, bases, d);
      if (deriv == 0) p.segment(r0, J) = csign(scene.radar.atoms[l].alpha) * gt.u;
      r0 += J;
    }
  for (int deriv : {0, 1, 3}) {  // value, d/dtau, d/dbeta
    for (int q = 0; q < Q; ++q) {
      fill_rows(Fred, r0, scene.comms.atoms[q], deriv, true, bases, d);
      if (deriv == 0) p.segment(r0, PJ) = csign(scene.comms.atoms[q].alpha) * gt.v;
      r0 += PJ;
    }
  }
}

double axis_factor(int len, int half, int numerator, int centered_idx) {
  if (len == 1) return 1.0;
  VectorXd g = g_weights(half, len);
  return std::sqrt(static_cast<double>(numerator) / g(centered_idx + half));
}

}  // namespace

MatrixXcd build_F(const Scene& scene, const SubspaceBases& bases, const ProblemDims& dims) {
  dims.validate();
  scene.validate();
  const int L = scene.radar.size(), Q = scene.comms.size();
  const int J = dims.J, PJ = dims.PJ();
  MatrixXcd F = MatrixXcd::Zero(4 * L * J + 4 * Q * PJ, dims.K());
  int r0 = 0;
  for (int deriv = 0; deriv < 4; ++deriv)
    for (int l = 0; l < L; ++l) {
      fill_rows(F, r0, scene.radar.atoms[l], deriv, false, bases, dims);
      r0 += J;
    }
  for (int deriv = 0; deriv < 4; ++deriv)
    for (int q = 0; q < Q; ++q) {
      fill_rows(F, r0, scene.comms.atoms[q], deriv, true, bases, dims);
      r0 += PJ;
    }
  return F;
}

VectorXd certificate_weights(const ProblemDims& dims) {
  dims.validate();
  if (dims.P > 1 && dims.P % 2 == 0)
    throw std::invalid_argument("certificate_weights: even P not supported");
  if (dims.N_r > 1 && dims.N_r % 2 == 0)
    throw std::invalid_argument("certificate_weights: even N_r not supported");
  const int N = dims.N(), Pn = (dims.P - 1) / 2, Rn = (dims.N_r - 1) / 2;
  VectorXd w(dims.K());
  for (int mt = 0; mt < dims.K(); ++mt) {
    SampleIdx s = sample_index(dims, mt);
    w(mt) = axis_factor(dims.M, N, N, s.n) * axis_factor(dims.P, Pn, dims.P, s.p - Pn) *
            axis_factor(dims.N_r, Rn, dims.N_r, s.r - Rn);
  }
  return w;
}

VectorXcd construct_certificate(const Scene& scene, const SubspaceBases& bases,
                                const ProblemDims& dims) {
  dims.validate();
  scene.validate();
  if (scene.radar.size() + scene.comms.size() == 0)
    throw std::invalid_argument("construct_certificate: empty scene");

  MatrixXcd Fred;
  VectorXcd p;
  build_reduced(scene, bases, dims, Fred, p);
  if (Fred.rows() > dims.K())
    throw std::runtime_error("construct_certificate: more conditions than samples");

  VectorXd w = certificate_weights(dims);
  VectorXd winv2 = w.array().square().inverse();

  // min ||diag(w) q||  s.t.  Fred q = p  =>  q = W^{-2} Fred^H lambda with
  // (Fred W^{-2} Fred^H) lambda = p.
  MatrixXcd G = Fred * winv2.asDiagonal() * Fred.adjoint();
  Eigen::JacobiSVD<MatrixXcd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0)))
    throw std::runtime_error(
        "construct_certificate: rank-deficient interpolation system (atoms too close or dims "
        "too small)");
  VectorXcd lambda = svd.solve(p);
  VectorXcd q0 = winv2.asDiagonal() * (Fred.adjoint() * lambda);

  double feas = (Fred * q0 - p).norm();
  if (!(feas <= 1e-8 * std::max(1.0, p.norm())))
    throw std::runtime_error("construct_certificate: interpolation residual above 1e-8");
  return q0;
}

MatrixXcd build_H(const Scene& scene, const SubspaceBases& bases, const ProblemDims& dims) {
  dims.validate();
  MatrixXcd F = build_F(scene, bases, dims);
  VectorXd w = certificate_weights(dims);
  VectorXd winv2 = w.array().square().inverse();
  double c_norm = winv2.sum();

  // Per-axis inverse curvature on the derivative blocks (unit factor on value
  // rows and on trivial axes).
  std::array<double, 4> block_scale{1.0, 1.0, 1.0, 1.0};
  const int halves[3] = {dims.N(), (dims.P - 1) / 2, (dims.N_r - 1) / 2};
  const int lens[3] = {dims.M, dims.P, dims.N_r};
  for (int a = 0; a < 3; ++a) {
    double kappa = KernelTable::axis_weights(lens[a]).kappa();
    block_scale[a + 1] = kappa > 0 ? 1.0 / kappa : 1.0;
    (void)halves;
  }

  const int L = scene.radar.size(), Q = scene.comms.size();
  VectorXd S(F.rows());
  int r0 = 0;
  for (int deriv = 0; deriv < 4; ++deriv)
    for (int l = 0; l < L; ++l, r0 += dims.J) S.segment(r0, dims.J).setConstant(block_scale[deriv]);
  for (int deriv = 0; deriv < 4; ++deriv)
    for (int q = 0; q < Q; ++q, r0 += dims.PJ())
      S.segment(r0, dims.PJ()).setConstant(block_scale[deriv]);

  return S.asDiagonal() * (F * winv2.asDiagonal() * F.adjoint()) * S.asDiagonal() / c_norm;
}

CertificateReport validate_certificate(const VectorXcd& q0, const Scene& scene,
                                       const SubspaceBases& bases, const ProblemDims& dims,
                                       std::array<int, 3> fine_grid) {
  dims.validate();
  scene.validate();
  if (q0.size() != dims.K()) throw std::invalid_argument("validate_certificate: wrong q0 length");
  GroundTruth gt = random_ground_truth(dims, scene.radar, scene.comms, scene.seed);
  CertificateReport rep;

  // Interpolation and derivative conditions at the atoms.  Radar uses the
  // J-component polynomial; comms values use the full PJ vector while the
  // derivative conditions are measured on the pulse-collapsed localizer (its
  // tau/beta derivatives are the collapsed imposed rows; its nu derivative
  // vanishes for pulse-aligned coefficients).
  for (int l = 0; l < scene.radar.size(); ++l) {
    const Atom3D& at = scene.radar.atoms[l];
    VectorXcd f = eval_dual_at(q0, bases, dims, at.tau, at.nu, at.beta, FieldKind::Radar);
    rep.interp_residual = std::max(rep.interp_residual, (f - csign(at.alpha) * gt.u).norm());
    for (int a = 1; a <= 3; ++a) {
      VectorXcd df = eval_dual_at(q0, bases, dims, at.tau, at.nu, at.beta, FieldKind::Radar, a);
      rep.deriv_residual = std::max(rep.deriv_residual, df.norm());
    }
  }
  const double sqrtP = std::sqrt(static_cast<double>(dims.P));
  for (int q = 0; q < scene.comms.size(); ++q) {
    const Atom3D& at = scene.comms.atoms[q];
    VectorXcd f = eval_dual_at(q0, bases, dims, at.tau, at.nu, at.beta, FieldKind::Comms);
    rep.interp_residual = std::max(rep.interp_residual, (f - csign(at.alpha) * gt.v).norm());
    for (int a = 1; a <= 3; ++a) {
      VectorXcd df = eval_dual_at(q0, bases, dims, at.tau, at.nu, at.beta, FieldKind::Comms, a);
      VectorXcd collapsed = VectorXcd::Zero(dims.J);
      for (int pu = 0; pu < dims.P; ++pu) collapsed += df.segment(pu * dims.J, dims.J);
      rep.deriv_residual = std::max(rep.deriv_residual, collapsed.norm() / sqrtP);
    }
  }

  // Off-support maxima of the localization fields outside the exclusion boxes.
  const std::array<double, 3> radius{1.0 / (2.0 * dims.M), 1.0 / (2.0 * dims.P),
                                     1.0 / (2.0 * dims.N_r)};
  auto scan = [&](FieldKind which, const Channel3D& ch) {
    PolynomialField field = eval_dual_field(q0, bases, dims, fine_grid, which);
    double mx = 0.0;
    for (int g1 = 0; g1 < field.G_tau; ++g1)
      for (int g2 = 0; g2 < field.G_nu; ++g2)
        for (int g3 = 0; g3 < field.G_beta; ++g3) {
          double tau = static_cast<double>(g1) / field.G_tau;
          double nu = static_cast<double>(g2) / field.G_nu;
          double beta = static_cast<double>(g3) / field.G_beta;
          bool excluded = false;
          for (const auto& at : ch.atoms)
            if (wrap_dist(tau, at.tau) < radius[0] && wrap_dist(nu, at.nu) < radius[1] &&
                wrap_dist(beta, at.beta) < radius[2]) {
              excluded = true;
              break;
            }
          if (!excluded) mx = std::max(mx, field.at(g1, g2, g3));
        }
    return std::sqrt(mx);
  };
  if (scene.radar.size() > 0) rep.offgrid_max = scan(FieldKind::Radar, scene.radar);
  if (scene.comms.size() > 0)
    rep.offgrid_max = std::max(rep.offgrid_max, scan(FieldKind::Comms, scene.comms));

  // H diagnostics: smallest singular value and deviation from a Monte Carlo
  // expectation over basis redraws.
  MatrixXcd H = build_H(scene, bases, dims);
  Eigen::JacobiSVD<MatrixXcd> hsvd(H);
  rep.H_invertibility = hsvd.singularValues()(hsvd.singularValues().size() - 1);
  constexpr int kRedraws = 24;
  MatrixXcd Hbar = MatrixXcd::Zero(H.rows(), H.cols());
  for (int t = 0; t < kRedraws; ++t) {
    SubspaceBases rb = random_bases(dims, derive_seed(scene.seed, 0xcafe00 + t));
    Hbar += build_H(scene, rb, dims);
  }
  Hbar /= static_cast<double>(kRedraws);
  Eigen::JacobiSVD<MatrixXcd> dsvd(H - Hbar);
  rep.H_deviation = dsvd.singularValues()(0);

  rep.passed =
      rep.interp_residual <= 1e-6 && rep.deriv_residual <= 1e-4 && rep.offgrid_max < 1.0;
  return rep;
}

std::string certificate_report_to_json(const CertificateReport& report) {
  nlohmann::json j;
  j["interp_residual"] = report.interp_residual;
  j["deriv_residual"] = report.deriv_residual;
  j["offgrid_max"] = report.offgrid_max;
  j["H_invertibility"] = report.H_invertibility;
  j["H_deviation"] = report.H_deviation;
  j["passed"] = report.passed;
  return j.dump(2);
}

}  // namespace soman
