#include <somandbd/waveforms.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include <somandbd/io.hpp>

namespace soman {

namespace {

// Least-squares solve with a conditioning gate.  on_rank_fail is invoked (to
// build a context-specific message) before throwing.
template <typename FailFn>
VectorXcd solve_gated_ls(const MatrixXcd& W, const VectorXcd& y, FailFn on_rank_fail) {
  Eigen::BDCSVD<MatrixXcd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv(0);
  double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > 1e10) throw std::runtime_error(on_rank_fail(smax, smin));
  return svd.solve(y);
}

std::string nearest_atom_pair(const Channel3D& r_hats, const Channel3D& c_hats) {
  struct Named {
    std::string name;
    const Atom3D* a;
  };
  std::vector<Named> all;
  for (int l = 0; l < r_hats.size(); ++l)
    all.push_back({"radar[" + std::to_string(l) + "]", &r_hats.atoms[l]});
  for (int q = 0; q < c_hats.size(); ++q)
    all.push_back({"comms[" + std::to_string(q) + "]", &c_hats.atoms[q]});
  double best = std::numeric_limits<double>::infinity();
  std::string who = "(single atom)";
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t k = i + 1; k < all.size(); ++k) {
      double dist = wrap_dist(all[i].a->tau, all[k].a->tau) + wrap_dist(all[i].a->nu, all[k].a->nu) +
                    wrap_dist(all[i].a->beta, all[k].a->beta);
      if (dist < best) {
        best = dist;
        who = all[i].name + " and " + all[k].name;
      }
    }
  return who;
}

// Unit-normalize with the leading nonzero entry made real-positive; returns
// the norm that was divided out (0 for the zero vector).
double normalize_with_phase(VectorXcd& v) {
  double nrm = v.norm();
  if (nrm < 1e-300) {
    v.setZero();
    return 0.0;
  }
  v /= nrm;
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      v *= std::conj(v(i)) / std::abs(v(i));
      break;
    }
  }
  return nrm;
}

// Best rank-one fit across per-atom blocks: columns of B are alpha_k * x for a
// common x; returns unit x (phase convention applied) and per-column scales.
void demix_common(const MatrixXcd& B, VectorXcd& x, VectorXcd& alphas) {
  if (B.cols() == 0) {
    x = VectorXcd::Zero(B.rows());
    alphas = VectorXcd();
    return;
  }
  if (B.cols() == 1) {
    x = B.col(0);
  } else {
    Eigen::BDCSVD<MatrixXcd> svd(B, Eigen::ComputeThinU);
    x = svd.matrixU().col(0);
  }
  normalize_with_phase(x);
  alphas.resize(B.cols());
  for (int k = 0; k < B.cols(); ++k) alphas(k) = x.dot(B.col(k));
}

RecoveredSignals demix(const VectorXcd& p, const MatrixXcd& W, const VectorXcd& y,
                       const Channel3D& r_hats, const Channel3D& c_hats,
                       const SubspaceBases& bases, const ProblemDims& dims) {
  const int L = r_hats.size(), Q = c_hats.size();
  const int J = dims.J, PJ = dims.PJ();
  RecoveredSignals rec;

  MatrixXcd Br(J, L);
  for (int l = 0; l < L; ++l) Br.col(l) = p.segment(l * J, J);
  demix_common(Br, rec.u_hat, rec.alphas_r);
  if (L == 0) rec.u_hat = VectorXcd::Zero(J);

  MatrixXcd Bc(PJ, Q);
  for (int q = 0; q < Q; ++q) Bc.col(q) = p.segment(L * J + q * PJ, PJ);
  demix_common(Bc, rec.v_hat, rec.alphas_c);
  if (Q == 0) rec.v_hat = VectorXcd::Zero(PJ);

  rec.s_hat = bases.T * rec.u_hat;
  rec.g_hat.resize(dims.P);
  for (int pu = 0; pu < dims.P; ++pu)
    rec.g_hat[pu] = bases.D[pu] * rec.v_hat.segment(pu * J, J);
  rec.residual = (W * p - y).norm();
  rec.scale_note =
      "global complex scale absorbed into amplitudes; u_hat, v_hat unit-normalized "
      "with leading entry real-positive";
  return rec;
}

// e_m(lambda) for the per-antenna error subproblem; y, z split into contiguous
// antenna segments of length M*P.
VectorXcd e_of_lambda(const VectorXcd& a, const Eigen::VectorXd& b, double lambda) {
  VectorXcd e(a.size());
  for (int m = 0; m < a.size(); ++m) e(m) = (a(m) - b(m)) / (b(m) + lambda);
  return e;
}

// Sphere-constrained e-step: find lambda > -min b_m with ||e(lambda)|| = eps_e
// (phi is strictly decreasing there).  Degenerate all-zero predictions give
// e = 0.
VectorXcd e_step(const VectorXcd& y, const VectorXcd& z, const ProblemDims& dims, double eps_e) {
  const int MP = dims.M * dims.P;
  VectorXcd a(dims.N_r);
  Eigen::VectorXd b(dims.N_r);
  double bmin_pos = std::numeric_limits<double>::infinity();
  for (int m = 0; m < dims.N_r; ++m) {
    auto zm = z.segment(m * MP, MP);
    auto ym = y.segment(m * MP, MP);
    a(m) = zm.dot(ym);
    b(m) = zm.squaredNorm();
    if (b(m) > 0) bmin_pos = std::min(bmin_pos, b(m));
  }
  if (!std::isfinite(bmin_pos)) return VectorXcd::Zero(dims.N_r);

  double lam_min = -bmin_pos;
  double lo = lam_min + std::max(1e-12 * bmin_pos, 1e-300);
  double target = eps_e * eps_e;
  auto phi = [&](double lam) { return e_of_lambda(a, b, lam).squaredNorm(); };
  for (int k = 0; k < 60 && phi(lo) < target; ++k) lo = lam_min + (lo - lam_min) * 0.5;
  if (phi(lo) < target) return e_of_lambda(a, b, lo);  // sphere unreachable, best effort
  double hi = std::max(1.0, 2.0 * std::abs(lam_min));
  while (phi(hi) > target && hi < 1e280) hi = 2.0 * hi + 1.0;
  for (int k = 0; k < 200; ++k) {
    double mid = 0.5 * (lo + hi);
    (phi(mid) > target ? lo : hi) = mid;
  }
  return e_of_lambda(a, b, 0.5 * (lo + hi));
}

VectorXcd embed_errors(const VectorXcd& e, const ProblemDims& dims) {
  const int MP = dims.M * dims.P;
  VectorXcd full(dims.K());
  for (int m = 0; m < dims.N_r; ++m) full.segment(m * MP, MP).setConstant(1.0 + e(m));
  return full;
}

nlohmann::json cvec_json(const VectorXcd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back({v(i).real(), v(i).imag()});
  return arr;
}

}  // namespace

MatrixXcd build_W(const Channel3D& r_hats, const Channel3D& c_hats, const SubspaceBases& bases,
                  const ProblemDims& dims) {
  dims.validate();
  const int L = r_hats.size(), Q = c_hats.size();
  if (L + Q == 0) throw std::invalid_argument("build_W: no estimated atoms");
  const int J = dims.J, PJ = dims.PJ();
  MatrixXcd W = MatrixXcd::Zero(dims.K(), L * J + Q * PJ);
  for (int l = 0; l < L; ++l) {
    const Atom3D& at = r_hats.atoms[l];
    VectorXcd w = steering_vector(dims, at.tau, at.nu, at.beta);
    for (int mt = 0; mt < dims.K(); ++mt) {
      SampleIdx s = sample_index(dims, mt);
      W.row(mt).segment(l * J, J) =
          std::conj(w(mt)) * bases.T.row(s.n + dims.N()).conjugate();
    }
  }
  for (int q = 0; q < Q; ++q) {
    const Atom3D& at = c_hats.atoms[q];
    VectorXcd w = steering_vector(dims, at.tau, at.nu, at.beta);
    for (int mt = 0; mt < dims.K(); ++mt) {
      SampleIdx s = sample_index(dims, mt);
      W.row(mt).segment(L * J + q * PJ + s.p * J, J) =
          std::conj(w(mt)) * bases.D[s.p].row(s.n + dims.N()).conjugate();
    }
  }
  return W;
}

RecoveredSignals recover_ls(const MatrixXcd& W, const VectorXcd& y, const Channel3D& r_hats,
                            const Channel3D& c_hats, const SubspaceBases& bases,
                            const ProblemDims& dims) {
  if (y.size() != dims.K()) throw std::invalid_argument("recover_ls: wrong observation length");
  VectorXcd p = solve_gated_ls(W, y, [&](double smax, double smin) {
    std::ostringstream os;
    os << "recover_ls: mixing matrix is rank-deficient (sigma_max=" << smax
       << ", sigma_min=" << smin << "); closest atoms: " << nearest_atom_pair(r_hats, c_hats);
    return os.str();
  });
  return demix(p, W, y, r_hats, c_hats, bases, dims);
}

AtomSelection select_atoms(const VectorXcd& y, const Channel3D& cand_r, const Channel3D& cand_c,
                           const SubspaceBases& bases, const ProblemDims& dims, double rel_cut,
                           int max_rounds) {
  dims.validate();
  if (y.size() != dims.K()) throw std::invalid_argument("select_atoms: wrong observation length");
  if (!(rel_cut >= 0.0) || rel_cut >= 1.0)
    throw std::invalid_argument("select_atoms: rel_cut must be in [0, 1)");
  if (cand_r.atoms.empty() && cand_c.atoms.empty())
    throw std::invalid_argument("select_atoms: no candidate atoms");
  const int J = dims.J, PJ = dims.PJ();

  AtomSelection out;
  out.radar.atoms = cand_r.atoms;
  out.comms.atoms = cand_c.atoms;

  // Keep the system overdetermined; candidates are strongest-first, so trim
  // from the back of whichever channel is wider.
  auto cols = [&] {
    return static_cast<int>(out.radar.atoms.size()) * J +
           static_cast<int>(out.comms.atoms.size()) * PJ;
  };
  while (cols() > dims.K() && cols() > J + PJ) {
    bool shrink_comms = out.comms.atoms.size() * PJ >= out.radar.atoms.size() * J;
    auto& ch = (shrink_comms && !out.comms.atoms.empty()) || out.radar.atoms.empty()
                   ? out.comms.atoms
                   : out.radar.atoms;
    ch.pop_back();
    (&ch == &out.comms.atoms ? out.dropped_c : out.dropped_r) += 1;
  }

  bool have_signals = false;
  int backoffs = 0;
  for (out.rounds = 1; out.rounds <= max_rounds; ++out.rounds) {
    const int L = out.radar.size(), Q = out.comms.size();
    const MatrixXcd W = build_W(out.radar, out.comms, bases, dims);
    Eigen::BDCSVD<MatrixXcd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e10) {
      // Near-duplicate candidates: drop the weakest and retry.
      if (L + Q <= 1 || ++backoffs > L + Q + 8)
        throw std::runtime_error("select_atoms: candidate system stays rank-deficient");
      bool drop_comms = Q > 0 && (L == 0 || Q >= L);
      (drop_comms ? out.comms.atoms : out.radar.atoms).pop_back();
      (drop_comms ? out.dropped_c : out.dropped_r) += 1;
      --out.rounds;
      continue;
    }
    const VectorXcd p = svd.solve(y);

    std::vector<double> norm_r(L), norm_c(Q);
    double peak = 0.0;
    for (int l = 0; l < L; ++l) peak = std::max(peak, norm_r[l] = p.segment(l * J, J).norm());
    for (int q = 0; q < Q; ++q)
      peak = std::max(peak, norm_c[q] = p.segment(L * J + q * PJ, PJ).norm());

    Channel3D keep_r, keep_c;
    for (int l = 0; l < L; ++l)
      if (norm_r[l] >= rel_cut * peak) keep_r.atoms.push_back(out.radar.atoms[l]);
    for (int q = 0; q < Q; ++q)
      if (norm_c[q] >= rel_cut * peak) keep_c.atoms.push_back(out.comms.atoms[q]);
    if (keep_r.size() == L && keep_c.size() == Q) {
      out.signals = demix(p, W, y, out.radar, out.comms, bases, dims);
      have_signals = true;
      break;
    }
    out.dropped_r += L - keep_r.size();
    out.dropped_c += Q - keep_c.size();
    out.radar.atoms = std::move(keep_r.atoms);
    out.comms.atoms = std::move(keep_c.atoms);
  }
  if (!have_signals) {  // pruning still active at the round cap: refit once
    const MatrixXcd W = build_W(out.radar, out.comms, bases, dims);
    out.signals = recover_ls(W, y, out.radar, out.comms, bases, dims);
  }
  for (int l = 0; l < out.radar.size(); ++l) out.radar.atoms[l].alpha = out.signals.alphas_r(l);
  for (int q = 0; q < out.comms.size(); ++q) out.comms.atoms[q].alpha = out.signals.alphas_c(q);
  return out;
}

AlternatingResult recover_alternating(const VectorXcd& y, const Channel3D& r_hats,
                                      const Channel3D& c_hats, const SubspaceBases& bases,
                                      const ProblemDims& dims, double eps_e, int iters) {
  if (!(eps_e > 0)) throw std::invalid_argument("recover_alternating: eps_e must be > 0");
  if (iters < 1) throw std::invalid_argument("recover_alternating: iters must be >= 1");
  MatrixXcd W = build_W(r_hats, c_hats, bases, dims);
  auto generic_fail = [&](double smax, double smin) {
    std::ostringstream os;
    os << "recover_alternating: row-scaled mixing matrix rank-deficient (sigma_max=" << smax
       << ", sigma_min=" << smin << ")";
    return os.str();
  };

  VectorXcd p = solve_gated_ls(W, y, generic_fail);
  VectorXcd e = VectorXcd::Zero(dims.N_r);
  AlternatingResult out;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    e = e_step(y, W * p, dims, eps_e);
    VectorXcd scale = embed_errors(e, dims);
    MatrixXcd We = scale.asDiagonal() * W;
    p = solve_gated_ls(We, y, generic_fail);
    double obj = (y - We * p).squaredNorm();
    if (!out.objectives.empty() && obj > prev * (1.0 + 1e-12) + 1e-15) {
      std::ostringstream os;
      os << "recover_alternating: objective increased at iteration " << it << " (" << prev
         << " -> " << obj << ")";
      throw std::runtime_error(os.str());
    }
    out.objectives.push_back(obj);
    out.iterations = it + 1;
    if (std::isfinite(prev) && std::abs(prev - obj) < 1e-8 * std::max(prev, 1e-300)) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  out.signals = demix(p, W, y, r_hats, c_hats, bases, dims);
  out.e_hat = e;
  return out;
}

std::string recovered_to_json(const RecoveredSignals& rec) {
  nlohmann::json j;
  j["u_hat"] = cvec_json(rec.u_hat);
  j["v_hat"] = cvec_json(rec.v_hat);
  j["alphas_r"] = cvec_json(rec.alphas_r);
  j["alphas_c"] = cvec_json(rec.alphas_c);
  j["s_hat"] = cvec_json(rec.s_hat);
  nlohmann::json g = nlohmann::json::array();
  for (const auto& gp : rec.g_hat) g.push_back(cvec_json(gp));
  j["g_hat"] = g;
  j["residual"] = rec.residual;
  j["scale_note"] = rec.scale_note;
  return j.dump(2);
}

void save_recovered(const std::string& prefix, const RecoveredSignals& rec) {
  write_text_file(prefix + ".json", recovered_to_json(rec));
  write_cf64(prefix + ".u.cf64", rec.u_hat);
  write_cf64(prefix + ".v.cf64", rec.v_hat);
  write_cf64(prefix + ".s.cf64", rec.s_hat);
}

}  // namespace soman
