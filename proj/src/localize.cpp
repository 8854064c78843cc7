#include <somandbd/localize.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include <somandbd/io.hpp>

namespace soman {

namespace {

// Per-sample coefficient row of the localization field: J entries (radar rows
// of T; comms rows of D_p scaled by 1/sqrt(P) for the pulse-collapsed field).
Eigen::RowVectorXcd coeff_row(const SubspaceBases& b, const ProblemDims& d, const SampleIdx& s,
                              FieldKind which) {
  if (which == FieldKind::Radar) return b.T.row(s.n + d.N());
  return b.D[s.p].row(s.n + d.N()) / std::sqrt(static_cast<double>(d.P));
}

// Centered derivative multipliers (gradient/Hessian of the squared norm are
// invariant to the centering; centered values keep them small).
std::array<double, 3> centered_multipliers(const ProblemDims& d, const SampleIdx& s) {
  return {static_cast<double>(s.n), static_cast<double>(s.p - (d.P - 1) / 2),
          static_cast<double>(s.r - (d.N_r - 1) / 2)};
}

}  // namespace

void PolynomialField::validate(const ProblemDims& d) const {
  if (G_tau < 4 * d.M || G_nu < 4 * d.P || G_beta < 4 * d.N_r)
    throw std::invalid_argument("PolynomialField: grid below 4x oversampling");
  if (values.size() != static_cast<std::size_t>(G_tau) * G_nu * G_beta)
    throw std::invalid_argument("PolynomialField: value count does not match grid");
  for (double v : values)
    if (!(v >= 0.0)) throw std::invalid_argument("PolynomialField: negative value");
}

VectorXcd eval_dual_at(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                       double tau, double nu, double beta, FieldKind which, int deriv) {
  dims.validate();
  if (q.size() != dims.K()) throw std::invalid_argument("eval_dual_at: wrong q length");
  if (deriv < 0 || deriv > 3) throw std::invalid_argument("eval_dual_at: deriv out of range");
  const int out_len = (which == FieldKind::Radar) ? dims.J : dims.PJ();
  VectorXcd f = VectorXcd::Zero(out_len);
  for (int mt = 0; mt < dims.K(); ++mt) {
    SampleIdx s = sample_index(dims, mt);
    double ph = two_pi * (s.n * tau + s.p * nu + s.r * beta);
    cxd scale = q(mt) * cxd(std::cos(ph), std::sin(ph));
    if (deriv > 0) {
      auto m = centered_multipliers(dims, s);
      scale *= cxd(0.0, two_pi * m[deriv - 1]);
    }
    if (which == FieldKind::Radar) {
      f += scale * bases.T.row(s.n + dims.N()).transpose();
    } else {
      f.segment(s.p * dims.J, dims.J) +=
          scale * bases.D[s.p].row(s.n + dims.N()).transpose();
    }
  }
  return f;
}

double field_norm2_at(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                      double tau, double nu, double beta, FieldKind which,
                      std::array<double, 3>* grad, std::array<double, 6>* hess) {
  dims.validate();
  if (q.size() != dims.K()) throw std::invalid_argument("field_norm2_at: wrong q length");
  const int J = dims.J;
  VectorXcd f = VectorXcd::Zero(J);
  std::array<VectorXcd, 3> df;
  std::array<VectorXcd, 6> d2f;  // (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
  if (grad || hess)
    for (auto& v : df) v = VectorXcd::Zero(J);
  if (hess)
    for (auto& v : d2f) v = VectorXcd::Zero(J);

  for (int mt = 0; mt < dims.K(); ++mt) {
    SampleIdx s = sample_index(dims, mt);
    double ph = two_pi * (s.n * tau + s.p * nu + s.r * beta);
    cxd scale = q(mt) * cxd(std::cos(ph), std::sin(ph));
    Eigen::RowVectorXcd row = coeff_row(bases, dims, s, which);
    VectorXcd contrib = scale * row.transpose();
    f += contrib;
    if (grad || hess) {
      auto m = centered_multipliers(dims, s);
      for (int a = 0; a < 3; ++a) df[a] += cxd(0.0, two_pi * m[a]) * contrib;
      if (hess) {
        int k = 0;
        for (int a = 0; a < 3; ++a)
          for (int b = a; b < 3; ++b, ++k)
            d2f[k] += (-two_pi * two_pi * m[a] * m[b]) * contrib;
      }
    }
  }

  double g = f.squaredNorm();
  if (grad)
    for (int a = 0; a < 3; ++a) (*grad)[a] = 2.0 * f.dot(df[a]).real();
  if (hess) {
    int k = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b, ++k)
        (*hess)[k] = 2.0 * (df[b].dot(df[a]).real() + f.dot(d2f[k]).real());
  }
  return g;
}

PolynomialField eval_dual_field(const VectorXcd& q, const SubspaceBases& bases,
                                const ProblemDims& dims, std::array<int, 3> grid,
                                FieldKind which) {
  dims.validate();
  if (q.size() != dims.K()) throw std::invalid_argument("eval_dual_field: wrong q length");
  int G1 = grid[0] > 0 ? grid[0] : 8 * dims.M;
  int G2 = grid[1] > 0 ? grid[1] : 8 * dims.P;
  int G3 = grid[2] > 0 ? grid[2] : 8 * dims.N_r;
  if (G1 < dims.M || G2 < dims.P || G3 < dims.N_r)
    throw std::invalid_argument("eval_dual_field: grid smaller than coefficient support");

  PolynomialField field;
  field.G_tau = G1;
  field.G_nu = G2;
  field.G_beta = G3;
  field.which = which;
  const std::size_t cells = static_cast<std::size_t>(G1) * G2 * G3;
  field.values.assign(cells, 0.0);

  std::vector<cxd> in(cells), out(cells);
  fftw_plan plan = fftw_plan_dft_3d(G1, G2, G3, reinterpret_cast<fftw_complex*>(in.data()),
                                    reinterpret_cast<fftw_complex*>(out.data()), FFTW_BACKWARD,
                                    FFTW_ESTIMATE);
  if (!plan) throw std::runtime_error("eval_dual_field: fftw plan creation failed");

  // One transform per polynomial component; the backward sign convention
  // matches the e^{+j 2 pi (...)} evaluation of the coefficient tensor.
  for (int j = 0; j < dims.J; ++j) {
    std::fill(in.begin(), in.end(), cxd(0.0, 0.0));
    for (int mt = 0; mt < dims.K(); ++mt) {
      SampleIdx s = sample_index(dims, mt);
      int i1 = (s.n % G1 + G1) % G1;
      cxd c = q(mt) * coeff_row(bases, dims, s, which)(j);
      in[(static_cast<std::size_t>(i1) * G2 + s.p) * G3 + s.r] += c;
    }
    fftw_execute(plan);
    for (std::size_t i = 0; i < cells; ++i) field.values[i] += std::norm(out[i]);
  }
  fftw_destroy_plan(plan);
  return field;
}

RefineResult refine_peak(const VectorXcd& q, const SubspaceBases& bases, const ProblemDims& dims,
                         double tau0, double nu0, double beta0, FieldKind which) {
  RefineResult res;
  res.tau = wrap01(tau0);
  res.nu = wrap01(nu0);
  res.beta = wrap01(beta0);
  res.norm2 = field_norm2_at(q, bases, dims, res.tau, res.nu, res.beta, which);

  Eigen::Vector3d x(res.tau, res.nu, res.beta);
  double g = res.norm2;
  constexpr double grad_tol = 1e-9;
  for (int it = 0; it < 100; ++it) {
    std::array<double, 3> ga{};
    std::array<double, 6> ha{};
    g = field_norm2_at(q, bases, dims, x(0), x(1), x(2), which, &ga, &ha);
    Eigen::Vector3d grad(ga[0], ga[1], ga[2]);
    if (grad.norm() <= grad_tol) {
      res.tau = wrap01(x(0));
      res.nu = wrap01(x(1));
      res.beta = wrap01(x(2));
      res.norm2 = g;
      res.refined = true;
      return res;
    }
    Eigen::Matrix3d H;
    H << ha[0], ha[1], ha[2], ha[1], ha[3], ha[4], ha[2], ha[4], ha[5];

    // Newton step toward a maximum; fall back to a scaled gradient step when
    // the Hessian is not usefully negative definite at the current iterate.
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(H);
    bool have_newton = lu.isInvertible();
    if (have_newton) {
      step = -lu.solve(grad);
      if (step.dot(grad) <= 0.0 || !step.allFinite()) have_newton = false;
    }
    if (!have_newton) {
      double cell = std::min({1.0 / (8.0 * dims.M), 1.0 / (8.0 * dims.P), 1.0 / (8.0 * dims.N_r)});
      step = grad * (cell / grad.norm());
    }

    // Backtracking line search on the ascent direction.
    double t = 1.0;
    double slope = step.dot(grad);
    bool moved = false;
    while (t >= 1e-12) {
      Eigen::Vector3d cand = x + t * step;
      double gc = field_norm2_at(q, bases, dims, cand(0), cand(1), cand(2), which);
      if (gc >= g + 1e-4 * t * slope) {
        x = cand;
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;  // no ascent possible along either direction
  }

  // Did not reach the gradient tolerance: report the start point unrefined.
  return res;
}

LocalizationResult extract_peaks(const PolynomialField& field, const VectorXcd& q,
                                 const SubspaceBases& bases, const ProblemDims& dims,
                                 double threshold, std::array<double, 3> min_sep) {
  dims.validate();
  field.validate(dims);
  if (!(threshold > 0.0)) throw std::invalid_argument("extract_peaks: threshold must be > 0");
  if (min_sep[0] < 0) min_sep[0] = 1.0 / (2.0 * dims.M);
  if (min_sep[1] < 0) min_sep[1] = 1.0 / (2.0 * dims.P);
  if (min_sep[2] < 0) min_sep[2] = 1.0 / (2.0 * dims.N_r);

  const int G1 = field.G_tau, G2 = field.G_nu, G3 = field.G_beta;
  struct Cand {
    double v;
    int g1, g2, g3;
  };
  std::vector<Cand> cands;
  for (int g1 = 0; g1 < G1; ++g1)
    for (int g2 = 0; g2 < G2; ++g2)
      for (int g3 = 0; g3 < G3; ++g3) {
        double v = field.at(g1, g2, g3);
        if (v < threshold) continue;
        bool is_max = true;
        for (int d1 = -1; d1 <= 1 && is_max; ++d1)
          for (int d2 = -1; d2 <= 1 && is_max; ++d2)
            for (int d3 = -1; d3 <= 1 && is_max; ++d3) {
              if (d1 == 0 && d2 == 0 && d3 == 0) continue;
              double nb = field.at((g1 + d1 + G1) % G1, (g2 + d2 + G2) % G2, (g3 + d3 + G3) % G3);
              if (nb > v) is_max = false;
            }
        if (is_max) cands.push_back({v, g1, g2, g3});
      }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.v > b.v; });

  auto near = [&](const LocalizedAtom& a, double tau, double nu, double beta) {
    return wrap_dist(a.tau, tau) < min_sep[0] && wrap_dist(a.nu, nu) < min_sep[1] &&
           wrap_dist(a.beta, beta) < min_sep[2];
  };

  LocalizationResult out;
  out.threshold_used = threshold;
  out.refined = true;
  std::vector<LocalizedAtom> grid_atoms;
  for (const auto& c : cands) {
    double tau = static_cast<double>(c.g1) / G1;
    double nu = static_cast<double>(c.g2) / G2;
    double beta = static_cast<double>(c.g3) / G3;
    bool dup = false;
    for (const auto& a : grid_atoms)
      if (near(a, tau, nu, beta)) dup = true;
    if (!dup) grid_atoms.push_back({tau, nu, beta, c.v});
  }

  // Continuous refinement, then a second dedup pass: neighbouring grid maxima
  // may ascend into the same stationary point.
  for (const auto& ga : grid_atoms) {
    RefineResult r = refine_peak(q, bases, dims, ga.tau, ga.nu, ga.beta, field.which);
    if (!r.refined) out.refined = false;
    LocalizedAtom atom{r.tau, r.nu, r.beta, r.norm2};
    bool merged = false;
    for (auto& a : out.atoms) {
      if (near(a, atom.tau, atom.nu, atom.beta)) {
        if (atom.peak_norm2 > a.peak_norm2) a = atom;
        merged = true;
        break;
      }
    }
    if (!merged && atom.peak_norm2 >= threshold) out.atoms.push_back(atom);
  }
  std::sort(out.atoms.begin(), out.atoms.end(),
            [](const LocalizedAtom& a, const LocalizedAtom& b) { return a.peak_norm2 > b.peak_norm2; });
  return out;
}

NoisyThresholds noisy_thresholds(double mu_r, double mu_c, double eps_e, const ProblemDims& dims,
                                 double Q_spectral_norm, double Qc_spectral_norm, double slack) {
  dims.validate();
  if (Qc_spectral_norm < 0) Qc_spectral_norm = Q_spectral_norm;
  if (mu_r < 0 || mu_c < 0 || eps_e < 0 || Q_spectral_norm < 0)
    throw std::invalid_argument("noisy_thresholds: inputs must be >= 0");
  if (!(slack > 0.0) || slack > 1.0)
    throw std::invalid_argument("noisy_thresholds: slack must be in (0, 1]");
  const double gamma = (eps_e + 2.0 * std::sqrt(static_cast<double>(dims.K()))) * eps_e;
  const double paren_r = 1.0 - gamma * Q_spectral_norm;
  const double paren_c = 1.0 - gamma * Qc_spectral_norm;
  if (paren_r < 0.0 || paren_c < 0.0)
    throw std::domain_error("noisy_thresholds: error bound exceeds the peak level (unusable regime)");
  NoisyThresholds th;
  th.a_r = mu_r * mu_r * paren_r;
  th.a_c = mu_c * mu_c * paren_c;
  th.threshold_r = slack * th.a_r;
  th.threshold_c = slack * th.a_c;
  th.usable = th.a_r > 0.0 && th.a_c > 0.0;
  return th;
}

void export_field(const std::string& path, const PolynomialField& field) {
  std::string desc = std::string("squared norm of the ") +
                     (field.which == FieldKind::Radar ? "radar" : "pulse-collapsed comms") +
                     " dual polynomial; axes (tau, nu, beta), row-major";
  write_field_grid(path, field.values, {field.G_tau, field.G_nu, field.G_beta}, desc);
}

}  // namespace soman
