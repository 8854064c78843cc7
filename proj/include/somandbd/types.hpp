#pragma once
// Scene containers: parametric channels, subspace bases, ground truth lifted
// matrices and the observation/error model.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "somandbd/dims.hpp"

namespace soman {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// One scatterer / path: continuous (delay, Doppler, direction) on the unit
// torus plus a complex amplitude. Amplitudes are the atomic-decomposition
// coefficients: X = sum_l alpha_l * u * w(r_l)^H.
struct Atom3D {
  double tau = 0.0;
  double nu = 0.0;
  double beta = 0.0;
  cxd alpha{1.0, 0.0};
};

struct Channel3D {
  std::vector<Atom3D> atoms;

  int size() const { return static_cast<int>(atoms.size()); }

  // no duplicate atoms (wrap-around metric, all axes simultaneously close)
  void validate() const {
    for (size_t i = 0; i < atoms.size(); ++i) {
      const auto& a = atoms[i];
      if (!(a.tau >= 0 && a.tau < 1 && a.nu >= 0 && a.nu < 1 && a.beta >= 0 && a.beta < 1))
        throw std::invalid_argument("channel: atom parameters must lie in [0,1)");
      for (size_t k = i + 1; k < atoms.size(); ++k) {
        const auto& b = atoms[k];
        if (wrap_dist(a.tau, b.tau) < 1e-9 && wrap_dist(a.nu, b.nu) < 1e-9 &&
            wrap_dist(a.beta, b.beta) < 1e-9)
          throw std::invalid_argument("channel: duplicate atom");
      }
    }
  }
};

// Known random subspaces. T holds the M radar basis rows (each length J);
// D holds one M x J block per pulse (the full MP x PJ matrix is block
// diagonal and never materialized unless explicitly requested).
struct SubspaceBases {
  MatrixXcd T;                 // M x J
  std::vector<MatrixXcd> D;    // P blocks, each M x J

  // largest squared entry magnitude across both bases
  double coherence_mu() const {
    double mu = T.cwiseAbs2().maxCoeff();
    for (const auto& b : D) mu = std::max(mu, b.cwiseAbs2().maxCoeff());
    return mu;
  }

  // dense MP x PJ block-diagonal communications basis (diagnostics only)
  MatrixXcd dense_D(const ProblemDims& d) const;
};

// Per-antenna gain/phase perturbation plus additive white noise.
// epsilon_e is the declared bound on ||e||_2 used by the noisy program;
// 0 means "use the realized norm".
struct ErrorModel {
  double sigma_gainphase = 0.0;  // std-dev of gain and of phase (radians)
  double sigma_noise = 0.0;      // per-complex-entry std-dev of additive noise
  double epsilon_e = 0.0;        // declared ||e||_2 bound (0 = realized)

  void validate() const {
    if (sigma_gainphase < 0 || sigma_noise < 0 || epsilon_e < 0)
      throw std::invalid_argument("error model: parameters must be >= 0");
  }
};

struct Scene {
  ProblemDims dims;
  Channel3D radar;
  Channel3D comms;
  ErrorModel errors;
  std::uint64_t seed = 0;

  void validate() const {
    dims.validate();
    radar.validate();
    comms.validate();
    errors.validate();
    if (radar.size() != dims.L || comms.size() != dims.Q)
      throw std::invalid_argument("scene: atom counts disagree with dims");
  }
};

// Unknowns of one instance: unit-norm waveform/message coordinates and their
// lifted rank-one matrices.
struct GroundTruth {
  VectorXcd u;    // J
  VectorXcd v;    // PJ (stacked per pulse)
  MatrixXcd X_r;  // J  x K
  MatrixXcd X_c;  // PJ x K
};

struct Observation {
  ProblemDims dims;
  VectorXcd y;  // length K

  void validate() const {
    dims.validate();
    if (y.size() != dims.K()) throw std::invalid_argument("observation: wrong length");
    if (!y.allFinite()) throw std::invalid_argument("observation: non-finite samples");
  }
};

// Result of pushing a clean observation through the error model.
struct PerturbedObservation {
  VectorXcd y;          // observed vector
  VectorXcd e;          // per-antenna deviation, length N_r: factor = 1 + e_m
  VectorXcd noise;      // additive component, length K
  double epsilon_used;  // declared epsilon_e, or realized ||e|| when 0
  double e_norm;        // realized ||e||_2
  bool within_bound;    // e_norm <= epsilon_used
};

}  // namespace soman
