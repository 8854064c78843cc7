#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include <somandbd/model.hpp>
#include <somandbd/rng.hpp>

using namespace soman;

namespace {

// independent per-sample transcription of the lifted measurement model
VectorXcd synth_bruteforce(const ProblemDims& d, const SubspaceBases& b, const Channel3D& radar,
                           const Channel3D& comms, const GroundTruth& gt) {
  VectorXcd y = VectorXcd::Zero(d.K());
  for (int r = 0; r < d.N_r; ++r)
    for (int p = 0; p < d.P; ++p)
      for (int n = -d.N(); n <= d.N(); ++n) {
        const int mt = flat_index(d, {n, p, r});
        cxd acc = 0;
        for (const auto& a : radar.atoms) {
          cxd proj = 0;
          for (int j = 0; j < d.J; ++j) proj += std::conj(b.T(n + d.N(), j)) * gt.u(j);
          acc += a.alpha * proj * std::exp(-j1i * two_pi * (n * a.tau + p * a.nu + r * a.beta));
        }
        for (const auto& a : comms.atoms) {
          cxd proj = 0;
          for (int j = 0; j < d.J; ++j)
            proj += std::conj(b.D[p](n + d.N(), j)) * gt.v(p * d.J + j);
          acc += a.alpha * proj * std::exp(-j1i * two_pi * (n * a.tau + p * a.nu + r * a.beta));
        }
        y(mt) = acc;
      }
  return y;
}

MatrixXcd random_matrix(int rows, int cols, Rng& rng) {
  MatrixXcd X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = rng.cnormal();
  return X;
}

VectorXcd random_vector(int len, Rng& rng) {
  VectorXcd x(len);
  for (int i = 0; i < len; ++i) x(i) = rng.cnormal();
  return x;
}

}  // namespace

TEST_CASE("steering vector phases and indexing") {
  ProblemDims d{5, 2, 2, 1, 0, 0};
  VectorXcd w = steering_vector(d, 0.25, 0.0, 0.0);
  REQUIRE(w.size() == d.K());
  // phase depends only on n: e^{j pi n / 2}
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    CHECK(flat_index(d, s) == mt);
    cxd expect = std::exp(j1i * two_pi * (s.n * 0.25));
    CHECK(std::abs(w(mt) - expect) < 1e-14);
    CHECK(std::abs(std::abs(w(mt)) - 1.0) < 1e-14);
  }
  // n = 1 entries are exactly +j
  CHECK(std::abs(w(flat_index(d, {1, 0, 0})) - j1i) < 1e-14);

  VectorXcd w2 = steering_vector(d, 0.1, 0.3, 0.7);
  for (int mt = 0; mt < d.K(); ++mt) {
    SampleIdx s = sample_index(d, mt);
    cxd expect = std::exp(j1i * two_pi * (s.n * 0.1 + s.p * 0.3 + s.r * 0.7));
    CHECK(std::abs(w2(mt) - expect) < 1e-13);
  }
}

TEST_CASE("channel vector is the conjugate-amplitude steering sum") {
  ProblemDims d{5, 3, 2, 1, 2, 0};
  Channel3D ch;
  ch.atoms.push_back({0.13, 0.44, 0.81, cxd(0.6, 0.8)});
  ch.atoms.push_back({0.72, 0.05, 0.33, cxd(-1.0, 0.0)});
  VectorXcd h = channel_vector(d, ch);
  VectorXcd ref = std::conj(ch.atoms[0].alpha) * steering_vector(d, 0.13, 0.44, 0.81) +
                  std::conj(ch.atoms[1].alpha) * steering_vector(d, 0.72, 0.05, 0.33);
  CHECK((h - ref).norm() < 1e-13);
}

TEST_CASE("random bases are unit-modulus phase ramps") {
  ProblemDims d{7, 3, 2, 3, 0, 0};
  SubspaceBases b = random_bases(d, 11);
  REQUIRE(b.T.rows() == d.M);
  REQUIRE(b.T.cols() == d.J);
  REQUIRE(static_cast<int>(b.D.size()) == d.P);
  CHECK(b.coherence_mu() == doctest::Approx(1.0).epsilon(1e-14));
  auto check_ramp = [&](const MatrixXcd& B) {
    for (int n = 0; n < B.rows(); ++n) {
      CHECK(std::abs(B(n, 0) - 1.0) < 1e-14);  // first column is all ones
      for (int j = 0; j < B.cols(); ++j) {
        CHECK(std::abs(std::abs(B(n, j)) - 1.0) < 1e-14);
        // geometric ramp: entry j is the j-th power of entry 1
        CHECK(std::abs(B(n, j) - std::pow(B(n, 1), j)) < 1e-12);
      }
    }
  };
  check_ramp(b.T);
  for (const auto& blk : b.D) check_ramp(blk);

  SubspaceBases b2 = random_bases(d, 11);
  CHECK((b.T - b2.T).norm() == 0.0);  // deterministic in the seed
  SubspaceBases b3 = random_bases(d, 12);
  CHECK((b.T - b3.T).norm() > 1e-6);
}

TEST_CASE("ground truth coefficients are unit norm and pulse aligned") {
  ProblemDims d{5, 4, 2, 3, 1, 1};
  SceneDraw dr;
  Scene sc = random_scene(d, 3, dr);
  GroundTruth gt = random_ground_truth(d, sc.radar, sc.comms, sc.seed);
  CHECK(gt.u.norm() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(gt.v.norm() == doctest::Approx(1.0).epsilon(1e-13));
  REQUIRE(gt.v.size() == d.PJ());
  for (int p = 1; p < d.P; ++p)
    CHECK((gt.v.segment(p * d.J, d.J) - gt.v.segment(0, d.J)).norm() < 1e-14);
  // lifted matrices are rank one with the drawn coefficients
  CHECK((gt.X_r - gt.u * channel_vector(d, sc.radar).adjoint()).norm() < 1e-13);
  CHECK((gt.X_c - gt.v * channel_vector(d, sc.comms).adjoint()).norm() < 1e-13);
}

TEST_CASE("lifted operators match the direct synthesis") {
  ProblemDims d{7, 3, 3, 2, 2, 2};
  SceneDraw dr;
  Scene sc = random_scene(d, 21, dr);
  SubspaceBases b = random_bases(d, sc.seed);
  GroundTruth gt = random_ground_truth(d, sc.radar, sc.comms, sc.seed);
  VectorXcd y = synth_observation(d, b, sc.radar, sc.comms, gt);
  VectorXcd y_ops = apply_Br(gt.X_r, d, b) + apply_Bc(gt.X_c, d, b);
  CHECK((y - y_ops).norm() < 1e-12 * y.norm());
  VectorXcd y_ref = synth_bruteforce(d, b, sc.radar, sc.comms, gt);
  CHECK((y - y_ref).norm() < 1e-12 * y.norm());
}

TEST_CASE("adjoints satisfy the inner-product identity") {
  ProblemDims d{5, 3, 2, 2, 0, 0};
  SubspaceBases b = random_bases(d, 5);
  Rng rng(99);
  for (int rep = 0; rep < 5; ++rep) {
    VectorXcd q = random_vector(d.K(), rng);
    MatrixXcd Xr = random_matrix(d.J, d.K(), rng);
    MatrixXcd Xc = random_matrix(d.PJ(), d.K(), rng);
    // <q, B(X)> = tr(adjoint(q)^H X) as a full complex identity
    cxd lhs_r = (q.conjugate().array() * apply_Br(Xr, d, b).array()).sum();
    cxd rhs_r = (adjoint_Br(q, d, b).adjoint() * Xr).trace();
    CHECK(std::abs(lhs_r - rhs_r) < 1e-10 * std::max(1.0, std::abs(lhs_r)));
    cxd lhs_c = (q.conjugate().array() * apply_Bc(Xc, d, b).array()).sum();
    cxd rhs_c = (adjoint_Bc(q, d, b).adjoint() * Xc).trace();
    CHECK(std::abs(lhs_c - rhs_c) < 1e-10 * std::max(1.0, std::abs(lhs_c)));
  }
}

TEST_CASE("random scenes respect separation constraints on every axis") {
  ProblemDims d{7, 5, 3, 2, 4, 3};
  SceneDraw dr;
  dr.delta_tau = 0.11;
  dr.delta_nu = 0.09;
  dr.delta_beta = 0.07;
  Scene sc = random_scene(d, 123, dr);
  REQUIRE(sc.radar.size() == d.L);
  REQUIRE(sc.comms.size() == d.Q);
  auto check_channel = [&](const Channel3D& ch) {
    for (int i = 0; i < ch.size(); ++i) {
      CHECK(std::abs(std::abs(ch.atoms[i].alpha) - 1.0) < 1e-13);
      for (int k = i + 1; k < ch.size(); ++k) {
        CHECK(wrap_dist(ch.atoms[i].tau, ch.atoms[k].tau) >= dr.delta_tau);
        CHECK(wrap_dist(ch.atoms[i].nu, ch.atoms[k].nu) >= dr.delta_nu);
        CHECK(wrap_dist(ch.atoms[i].beta, ch.atoms[k].beta) >= dr.delta_beta);
      }
    }
  };
  check_channel(sc.radar);
  check_channel(sc.comms);
  sc.validate();

  Scene sc2 = random_scene(d, 123, dr);
  CHECK(sc2.radar.atoms[0].tau == sc.radar.atoms[0].tau);  // deterministic

  SceneDraw mags;
  mags.radar_mags = {0.5, 2.0, 1.0, 0.25};
  Scene sm = random_scene(d, 9, mags);
  for (int l = 0; l < d.L; ++l)
    CHECK(std::abs(sm.radar.atoms[l].alpha) == doctest::Approx(mags.radar_mags[l]));
  mags.radar_mags = {1.0};
  CHECK_THROWS(random_scene(d, 9, mags));  // magnitude count must match L
}

TEST_CASE("infeasible separation requests are rejected") {
  ProblemDims d{5, 3, 2, 1, 2, 0};
  SceneDraw dr;
  dr.delta_tau = 0.6;  // wrap distance can never exceed 0.5
  CHECK_THROWS(random_scene(d, 1, dr));
}

TEST_CASE("error model applies per-antenna factors plus noise") {
  ProblemDims d{5, 3, 3, 2, 1, 1};
  SceneDraw dr;
  Scene sc = random_scene(d, 17, dr);
  SubspaceBases b = random_bases(d, sc.seed);
  GroundTruth gt = random_ground_truth(d, sc.radar, sc.comms, sc.seed);
  VectorXcd y = synth_observation(d, b, sc.radar, sc.comms, gt);

  ErrorModel clean;
  PerturbedObservation same = apply_error_model(y, d, clean, 4);
  CHECK((same.y - y).norm() == 0.0);
  CHECK(same.e.norm() == 0.0);
  CHECK(same.noise.norm() == 0.0);
  CHECK(same.epsilon_used == 0.0);
  CHECK(same.within_bound);

  ErrorModel em;
  em.sigma_gainphase = 0.05;
  PerturbedObservation po = apply_error_model(y, d, em, 4);
  REQUIRE(po.e.size() == d.N_r);
  const int MP = d.M * d.P;
  for (int r = 0; r < d.N_r; ++r) {
    VectorXcd expect = (1.0 + po.e(r)) * y.segment(r * MP, MP);
    CHECK((po.y.segment(r * MP, MP) - expect).norm() < 1e-13);
  }
  CHECK(po.epsilon_used == doctest::Approx(po.e_norm));  // declared 0 -> realized
  CHECK(po.within_bound);

  em.epsilon_e = 1.0;
  PerturbedObservation pd = apply_error_model(y, d, em, 4);
  CHECK(pd.epsilon_used == 1.0);
  CHECK((pd.e - po.e).norm() == 0.0);  // same seed, same draw

  PerturbedObservation p5 = apply_error_model(y, d, em, 5);
  CHECK((p5.e - pd.e).norm() > 0.0);
}

TEST_CASE("noise level hits the requested snr in expectation") {
  ProblemDims d{7, 3, 2, 1, 1, 0};
  Rng rng(31);
  VectorXcd y = random_vector(d.K(), rng);
  const double snr_db = 12.0;
  const double sigma = noise_sigma_for_snr(y, snr_db);
  CHECK(sigma == doctest::Approx(y.norm() * std::pow(10.0, -snr_db / 20.0) /
                                 std::sqrt(static_cast<double>(d.K())))
                     .epsilon(1e-12));
  CHECK(noise_sigma_for_snr(y, std::numeric_limits<double>::infinity()) == 0.0);

  // empirical check that the realized noise energy matches within 5%
  ErrorModel em;
  em.sigma_noise = sigma;
  double acc = 0.0;
  const int reps = 400;
  for (int t = 0; t < reps; ++t) acc += apply_error_model(y, d, em, 1000 + t).noise.squaredNorm();
  const double target = y.squaredNorm() * std::pow(10.0, -snr_db / 10.0);
  CHECK(acc / reps == doctest::Approx(target).epsilon(0.05));
}

TEST_CASE("dense communications basis is block diagonal") {
  ProblemDims d{5, 3, 2, 2, 0, 0};
  SubspaceBases b = random_bases(d, 2);
  MatrixXcd D = b.dense_D(d);
  REQUIRE(D.rows() == d.M * d.P);
  REQUIRE(D.cols() == d.PJ());
  for (int p = 0; p < d.P; ++p)
    CHECK((D.block(p * d.M, p * d.J, d.M, d.J) - b.D[p]).norm() == 0.0);
  double off = 0.0;
  for (int p = 0; p < d.P; ++p)
    for (int pp = 0; pp < d.P; ++pp)
      if (p != pp) off += D.block(p * d.M, pp * d.J, d.M, d.J).norm();
  CHECK(off == 0.0);
}
