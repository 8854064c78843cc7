#include "somandbd/model.hpp"

#include <cmath>

#include "somandbd/rng.hpp"

namespace soman {

VectorXcd steering_vector(const ProblemDims& d, double tau, double nu, double beta) {
  d.validate();
  VectorXcd w(d.K());
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    double ph = two_pi * (s.n * tau + s.p * nu + s.r * beta);
    w(mt) = cxd(std::cos(ph), std::sin(ph));
  }
  return w;
}

VectorXcd channel_vector(const ProblemDims& d, const Channel3D& ch) {
  VectorXcd h = VectorXcd::Zero(d.K());
  for (const auto& a : ch.atoms) h += std::conj(a.alpha) * steering_vector(d, a.tau, a.nu, a.beta);
  return h;
}

MatrixXcd SubspaceBases::dense_D(const ProblemDims& d) const {
  MatrixXcd full = MatrixXcd::Zero(d.M * d.P, d.P * d.J);
  for (int p = 0; p < d.P; ++p) full.block(p * d.M, p * d.J, d.M, d.J) = D[p];
  return full;
}

namespace {

MatrixXcd random_rows(int M, int J, Rng& rng) {
  MatrixXcd B(M, J);
  for (int n = 0; n < M; ++n) {
    double s = rng.normal();
    for (int j = 0; j < J; ++j) {
      double ph = two_pi * s * j;
      B(n, j) = cxd(std::cos(ph), std::sin(ph));
    }
  }
  return B;
}

}  // namespace

SubspaceBases random_bases(const ProblemDims& d, std::uint64_t seed) {
  d.validate();
  SubspaceBases b;
  Rng rng(derive_seed(seed, 0xb15e5));
  b.T = random_rows(d.M, d.J, rng);
  b.D.resize(d.P);
  for (int p = 0; p < d.P; ++p) b.D[p] = random_rows(d.M, d.J, rng);
  return b;
}

GroundTruth random_ground_truth(const ProblemDims& d, const Channel3D& radar,
                                const Channel3D& comms, std::uint64_t seed) {
  d.validate();
  Rng rng(derive_seed(seed, 0x717275));
  GroundTruth gt;
  gt.u.resize(d.J);
  for (int i = 0; i < d.J; ++i) gt.u(i) = cxd(rng.uniform(), rng.uniform());
  gt.u.normalize();
  // Comms coefficients are drawn once per antenna-subspace dimension and tiled
  // across pulses.  The per-pulse message g_p = D_p v_p still varies from pulse
  // to pulse through D_p, but the pulse blocks of v share a common phase: a
  // common Doppler shift applied to every comms path is indistinguishable from
  // a per-pulse phase ramp on v, so only the pulse-aligned representative of
  // that orbit is a recoverable ground truth.
  VectorXcd vt(d.J);
  for (int i = 0; i < d.J; ++i) vt(i) = cxd(rng.uniform(), rng.uniform());
  vt.normalize();
  gt.v.resize(d.PJ());
  for (int p = 0; p < d.P; ++p)
    gt.v.segment(p * d.J, d.J) = vt / std::sqrt(static_cast<double>(d.P));
  gt.X_r = gt.u * channel_vector(d, radar).adjoint();
  gt.X_c = gt.v * channel_vector(d, comms).adjoint();
  return gt;
}

namespace {

// all pairwise per-axis wrap distances >= the requested minima
bool separated(const std::vector<Atom3D>& atoms, const Atom3D& cand, const SceneDraw& dr) {
  for (const auto& a : atoms) {
    if (wrap_dist(a.tau, cand.tau) < dr.delta_tau) return false;
    if (wrap_dist(a.nu, cand.nu) < dr.delta_nu) return false;
    if (wrap_dist(a.beta, cand.beta) < dr.delta_beta) return false;
  }
  return true;
}

bool collides(const std::vector<Atom3D>& atoms, const Atom3D& cand, double eps) {
  for (const auto& a : atoms)
    if (wrap_dist(a.tau, cand.tau) < eps && wrap_dist(a.nu, cand.nu) < eps &&
        wrap_dist(a.beta, cand.beta) < eps)
      return true;
  return false;
}

Channel3D draw_channel(int count, const std::vector<double>& mags, const SceneDraw& dr,
                       const Channel3D& avoid, Rng& rng) {
  Channel3D ch;
  int guard = 0;
  while (ch.size() < count) {
    Atom3D a;
    a.tau = rng.uniform();
    a.nu = rng.uniform();
    a.beta = rng.uniform();
    double mag = mags.empty() ? 1.0 : mags[ch.size()];
    a.alpha = mag * rng.unit_phase();
    if (separated(ch.atoms, a, dr) && !collides(avoid.atoms, a, 1e-3)) {
      ch.atoms.push_back(a);
      guard = 0;
    } else if (++guard > 100000) {
      throw std::runtime_error("random_scene: separation constraints look infeasible");
    }
  }
  return ch;
}

}  // namespace

Scene random_scene(const ProblemDims& d, std::uint64_t seed, const SceneDraw& draw) {
  d.validate();
  if (!draw.radar_mags.empty() && static_cast<int>(draw.radar_mags.size()) != d.L)
    throw std::invalid_argument("random_scene: radar magnitude count != L");
  if (!draw.comms_mags.empty() && static_cast<int>(draw.comms_mags.size()) != d.Q)
    throw std::invalid_argument("random_scene: comms magnitude count != Q");
  Rng rng(derive_seed(seed, 0x5ce4e));
  Scene sc;
  sc.dims = d;
  sc.seed = seed;
  sc.radar = draw_channel(d.L, draw.radar_mags, draw, Channel3D{}, rng);
  sc.comms = draw_channel(d.Q, draw.comms_mags, draw, sc.radar, rng);
  return sc;
}

VectorXcd apply_Br(const MatrixXcd& X_r, const ProblemDims& d, const SubspaceBases& b) {
  if (X_r.rows() != d.J || X_r.cols() != d.K()) throw std::invalid_argument("apply_Br: X is not J x K");
  // t_n^H (column mt of X); batch as T.conjugate() * X and pick matching rows.
  MatrixXcd TX = b.T.conjugate() * X_r;  // M x K
  VectorXcd y(d.K());
  for (int mt = 0; mt < d.K(); ++mt) y(mt) = TX(sample_index(d, mt).n + d.N(), mt);
  return y;
}

VectorXcd apply_Bc(const MatrixXcd& X_c, const ProblemDims& d, const SubspaceBases& b) {
  if (X_c.rows() != d.PJ() || X_c.cols() != d.K())
    throw std::invalid_argument("apply_Bc: X is not PJ x K");
  VectorXcd y(d.K());
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    // d_v^H X e_mt restricted to pulse block p (dot conjugates its left operand)
    y(mt) = b.D[s.p].row(s.n + d.N()).dot(X_c.col(mt).segment(s.p * d.J, d.J));
  }
  return y;
}

MatrixXcd adjoint_Br(const VectorXcd& q, const ProblemDims& d, const SubspaceBases& b) {
  if (q.size() != d.K()) throw std::invalid_argument("adjoint_Br: wrong q length");
  MatrixXcd A(d.J, d.K());
  for (int mt = 0; mt < d.K(); ++mt)
    A.col(mt) = q(mt) * b.T.row(sample_index(d, mt).n + d.N()).transpose();
  return A;
}

MatrixXcd adjoint_Bc(const VectorXcd& q, const ProblemDims& d, const SubspaceBases& b) {
  if (q.size() != d.K()) throw std::invalid_argument("adjoint_Bc: wrong q length");
  MatrixXcd A = MatrixXcd::Zero(d.PJ(), d.K());
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    A.block(s.p * d.J, mt, d.J, 1) = q(mt) * b.D[s.p].row(s.n + d.N()).transpose();
  }
  return A;
}

VectorXcd synth_observation(const ProblemDims& d, const SubspaceBases& b,
                            const Channel3D& radar, const Channel3D& comms,
                            const GroundTruth& gt) {
  VectorXcd y = VectorXcd::Zero(d.K());
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    cxd su = b.T.row(s.n + d.N()).conjugate() * gt.u;  // t_n^H u
    cxd sv = b.D[s.p].row(s.n + d.N()).conjugate() * gt.v.segment(s.p * d.J, d.J);
    cxd acc = 0;
    for (const auto& a : radar.atoms) {
      double ph = -two_pi * (s.n * a.tau + s.p * a.nu + s.r * a.beta);
      acc += a.alpha * su * cxd(std::cos(ph), std::sin(ph));
    }
    for (const auto& a : comms.atoms) {
      double ph = -two_pi * (s.n * a.tau + s.p * a.nu + s.r * a.beta);
      acc += a.alpha * sv * cxd(std::cos(ph), std::sin(ph));
    }
    y(mt) = acc;
  }
  return y;
}

PerturbedObservation apply_error_model(const VectorXcd& y_clean, const ProblemDims& d,
                                       const ErrorModel& em, std::uint64_t seed) {
  if (y_clean.size() != d.K()) throw std::invalid_argument("apply_error_model: wrong length");
  em.validate();
  Rng rng(derive_seed(seed, 0xe44));
  PerturbedObservation out;
  out.e.resize(d.N_r);
  for (int m = 0; m < d.N_r; ++m) {
    double gain = 1.0 + em.sigma_gainphase * rng.normal();
    double ph = em.sigma_gainphase * rng.normal();
    out.e(m) = gain * cxd(std::cos(ph), std::sin(ph)) - 1.0;
  }
  out.noise.resize(d.K());
  for (int mt = 0; mt < d.K(); ++mt) out.noise(mt) = em.sigma_noise * rng.cnormal();
  out.y.resize(d.K());
  for (int mt = 0; mt < d.K(); ++mt) {
    int r = sample_index(d, mt).r;
    out.y(mt) = (1.0 + out.e(r)) * y_clean(mt) + out.noise(mt);
  }
  out.e_norm = out.e.norm();
  out.epsilon_used = em.epsilon_e > 0 ? em.epsilon_e : out.e_norm;
  out.within_bound = out.e_norm <= out.epsilon_used * (1 + 1e-12);
  return out;
}

double noise_sigma_for_snr(const VectorXcd& y_clean, double snr_db) {
  double energy = y_clean.squaredNorm() * std::pow(10.0, -snr_db / 10.0);
  return std::sqrt(energy / static_cast<double>(y_clean.size()));
}

}  // namespace soman
