#include "somandbd/sdp.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

namespace soman {

namespace {

// Total real parameters of the Hermitian K x K Gram variable.
int gram_param_count(int K) { return K * K; }

// Upper-triangle cells are laid out row-major; a diagonal cell holds one real
// slot, an off-diagonal cell holds (re, im). Decision slots used by rows
// 0..i-1 amount to 2*i*K - i^2.
int gram_re_var_impl(int Q_offset, int K, int i, int j) {
  int base = Q_offset + 2 * i * K - i * i;
  return (j == i) ? base : base + 2 * (j - i) - 1;
}

// S_ij += Q_ij for the whole upper triangle of the embedded Gram corner.
void append_gram_cells(PsdBlock& blk, int gram_offset, int K) {
  blk.terms.reserve(blk.terms.size() + static_cast<size_t>(gram_param_count(K)));
  for (int i = 0; i < K; ++i) {
    blk.terms.push_back({gram_re_var_at(gram_offset, K, i, i), i, i, cxd(1, 0)});
    for (int j = i + 1; j < K; ++j) {
      blk.terms.push_back({gram_re_var_at(gram_offset, K, i, j), i, j, cxd(1, 0)});
      blk.terms.push_back({gram_im_var_at(gram_offset, K, i, j), i, j, cxd(0, 1)});
    }
  }
}

// Radar lifting LMI  [[Q, R], [R^H, corner*I_J]]  with
// R[mt, jj] = conj(q_mt) * conj(T[n+N, jj]).  Q >= 0 is implied via Schur.
PsdBlock make_radar_lift(const SdpProblem::Layout& lay, int gram_offset, const MatrixXcd& T,
                         double corner, std::string label) {
  const ProblemDims& d = lay.dims;
  const int K = d.K();
  const int J = static_cast<int>(T.cols());
  if (T.rows() != d.M) throw std::invalid_argument("sdp: radar basis must have M rows");

  PsdBlock blk;
  blk.n = K + J;
  blk.label = std::move(label);
  append_gram_cells(blk, gram_offset, K);
  for (int mt = 0; mt < K; ++mt) {
    SampleIdx s = sample_index(d, mt);
    for (int jj = 0; jj < J; ++jj) {
      cxd c = std::conj(T(s.n + d.N(), jj));
      blk.terms.push_back({lay.q_offset + 2 * mt, mt, K + jj, c});
      blk.terms.push_back({lay.q_offset + 2 * mt + 1, mt, K + jj, -j1i * c});
    }
  }
  for (int jj = 0; jj < J; ++jj) blk.constants.push_back({K + jj, K + jj, cxd(corner, 0)});
  return blk;
}

// Communications lifting LMI  [[Q, R], [R^H, corner*I_{PJ}]]  where the strip
// row mt only meets the J columns of its own pulse block:
// R[mt, p*J + jj] = conj(q_mt) * conj(D_p[n+N, jj]).
PsdBlock make_comms_lift(const SdpProblem::Layout& lay, int gram_offset,
                         const std::vector<MatrixXcd>& D, double corner, std::string label) {
  const ProblemDims& d = lay.dims;
  const int K = d.K();
  if (static_cast<int>(D.size()) != d.P)
    throw std::invalid_argument("sdp: comms basis needs one block per pulse");
  const int J = static_cast<int>(D[0].cols());
  for (const auto& b : D)
    if (b.rows() != d.M || b.cols() != J)
      throw std::invalid_argument("sdp: comms blocks must share shape M x J");
  const int PJ = d.P * J;

  PsdBlock blk;
  blk.n = K + PJ;
  blk.label = std::move(label);
  append_gram_cells(blk, gram_offset, K);
  for (int mt = 0; mt < K; ++mt) {
    SampleIdx s = sample_index(d, mt);
    for (int jj = 0; jj < J; ++jj) {
      cxd c = std::conj(D[s.p](s.n + d.N(), jj));
      int col = K + s.p * J + jj;
      blk.terms.push_back({lay.q_offset + 2 * mt, mt, col, c});
      blk.terms.push_back({lay.q_offset + 2 * mt + 1, mt, col, -j1i * c});
    }
  }
  for (int c = 0; c < PJ; ++c) blk.constants.push_back({K + c, K + c, cxd(corner, 0)});
  return blk;
}

// Tr(Theta_l Q) = sum over class cells (a,b) of Q[b,a]; split into real and
// imaginary rows over the stored upper-triangle slots. rhs applies to the
// zero-lag (trace) row. One full set per Gram; tag distinguishes the rows.
void append_lag_equalities(SdpProblem& prob, const std::vector<LagClass>& classes,
                           int gram_offset, const std::string& tag, bool include_zero_lag,
                           double zero_lag_rhs) {
  const int K = prob.layout.dims.K();
  for (const auto& lc : classes) {
    if (lc.is_zero_lag()) {
      if (!include_zero_lag) continue;
      EqConstraint eq;
      eq.label = "trace" + tag;
      eq.b = zero_lag_rhs;
      for (const auto& [a, b] : lc.cells)
        eq.a.push_back({gram_re_var_at(gram_offset, K, a, a), 1.0});
      prob.eqs.push_back(std::move(eq));
      continue;
    }
    EqConstraint re_row, im_row;
    std::string stem = "lag(" + std::to_string(lc.l1) + "," + std::to_string(lc.l2) + "," +
                       std::to_string(lc.l3) + ")" + tag;
    re_row.label = stem + ".re";
    im_row.label = stem + ".im";
    for (const auto& [a, b] : lc.cells) {
      if (a < b) {
        // Q[b,a] = conj of the stored cell (a,b)
        re_row.a.push_back({gram_re_var_at(gram_offset, K, a, b), 1.0});
        im_row.a.push_back({gram_im_var_at(gram_offset, K, a, b), -1.0});
      } else {
        // Q[b,a] is the stored cell (b,a) itself
        re_row.a.push_back({gram_re_var_at(gram_offset, K, b, a), 1.0});
        im_row.a.push_back({gram_im_var_at(gram_offset, K, b, a), 1.0});
      }
    }
    prob.eqs.push_back(std::move(re_row));
    prob.eqs.push_back(std::move(im_row));
  }
}

void check_block_budget(const SdpProblem& prob, int max_block) {
  for (const auto& b : prob.blocks)
    if (b.n > max_block)
      throw std::invalid_argument("sdp: block '" + b.label + "' of size " +
                                  std::to_string(b.n) + " exceeds max_block " +
                                  std::to_string(max_block));
}

}  // namespace

int gram_re_var_at(int gram_offset, int K, int i, int j) {
  return gram_re_var_impl(gram_offset, K, i, j);
}

int gram_im_var_at(int gram_offset, int K, int i, int j) {
  return gram_re_var_impl(gram_offset, K, i, j) + 1;
}

int gram_re_var(const SdpProblem::Layout& lay, int i, int j) {
  return gram_re_var_impl(lay.Q_offset, lay.dims.K(), i, j);
}

int gram_im_var(const SdpProblem::Layout& lay, int i, int j) {
  return gram_re_var_impl(lay.Q_offset, lay.dims.K(), i, j) + 1;
}

int gramc_re_var(const SdpProblem::Layout& lay, int i, int j) {
  return gram_re_var_impl(lay.Qc_offset, lay.dims.K(), i, j);
}

int gramc_im_var(const SdpProblem::Layout& lay, int i, int j) {
  return gram_re_var_impl(lay.Qc_offset, lay.dims.K(), i, j) + 1;
}

std::vector<LagClass> enumerate_lag_classes(const ProblemDims& d) {
  const int M = d.M, P = d.P, R = d.N_r;
  std::vector<LagClass> classes;
  for (int l1 = 0; l1 < M; ++l1) {
    int l2_lo = (l1 > 0) ? -(P - 1) : 0;
    for (int l2 = l2_lo; l2 <= P - 1; ++l2) {
      int l3_lo = (l1 > 0 || l2 > 0) ? -(R - 1) : 0;
      for (int l3 = l3_lo; l3 <= R - 1; ++l3) {
        LagClass lc;
        lc.l1 = l1;
        lc.l2 = l2;
        lc.l3 = l3;
        for (int r = 0; r < R; ++r) {
          int rb = r + l3;
          if (rb < 0 || rb >= R) continue;
          for (int p = 0; p < P; ++p) {
            int pb = p + l2;
            if (pb < 0 || pb >= P) continue;
            for (int i1 = 0; i1 + l1 < M; ++i1) {
              int fa = i1 + M * (p + P * r);
              int fb = (i1 + l1) + M * (pb + P * rb);
              lc.cells.push_back({fa, fb});
            }
          }
        }
        classes.push_back(std::move(lc));
      }
    }
  }
  return classes;
}

MatrixXd build_theta(const ProblemDims& d, int l1, int l2, int l3) {
  const int K = d.K();
  MatrixXd theta = MatrixXd::Zero(K, K);
  for (int j = 0; j < K; ++j) {
    SampleIdx sj = sample_index(d, j);
    SampleIdx si{sj.n - l1, sj.p - l2, sj.r - l3};
    if (si.n < -d.N() || si.n > d.N() || si.p < 0 || si.p >= d.P || si.r < 0 || si.r >= d.N_r)
      continue;
    theta(flat_index(d, si), j) = 1.0;
  }
  return theta;
}

SdpProblem build_ntuple_dual(const Observation& obs, const std::vector<MatrixXcd>& radar_T,
                             const std::vector<std::vector<MatrixXcd>>& comms_D, int max_block) {
  obs.validate();
  if (radar_T.empty() && comms_D.empty())
    throw std::invalid_argument("sdp: need at least one emitter subspace");
  const ProblemDims& d = obs.dims;
  const int K = d.K();

  SdpProblem prob;
  prob.layout.valid = true;
  prob.layout.dims = d;
  prob.layout.q_offset = 0;
  const int n_emitters = static_cast<int>(radar_T.size() + comms_D.size());
  for (int e = 0; e < n_emitters; ++e)
    prob.layout.gram_offsets.push_back(2 * K + e * gram_param_count(K));
  prob.layout.Q_offset = radar_T.empty() ? -1 : prob.layout.gram_offsets.front();
  prob.layout.Qc_offset =
      comms_D.empty() ? -1 : prob.layout.gram_offsets[radar_T.size()];
  prob.num_vars = 2 * K + n_emitters * gram_param_count(K);
  prob.sense = Sense::Maximize;
  prob.objective = VectorXd::Zero(prob.num_vars);
  for (int mt = 0; mt < K; ++mt) {
    prob.objective[2 * mt] = obs.y[mt].real();
    prob.objective[2 * mt + 1] = obs.y[mt].imag();
  }
  prob.description = "dual atomic-norm program (noiseless)";

  const auto classes = enumerate_lag_classes(d);
  for (size_t e = 0; e < radar_T.size(); ++e) {
    std::string suffix = radar_T.size() == 1 ? "" : "_" + std::to_string(e);
    int goff = prob.layout.gram_offsets[e];
    prob.blocks.push_back(
        make_radar_lift(prob.layout, goff, radar_T[e], 1.0, "lift_radar" + suffix));
    append_lag_equalities(prob, classes, goff, ".r" + suffix, /*include_zero_lag=*/true,
                          /*zero_lag_rhs=*/1.0);
  }
  for (size_t e = 0; e < comms_D.size(); ++e) {
    std::string suffix = comms_D.size() == 1 ? "" : "_" + std::to_string(e);
    int goff = prob.layout.gram_offsets[radar_T.size() + e];
    prob.blocks.push_back(
        make_comms_lift(prob.layout, goff, comms_D[e], 1.0, "lift_comms" + suffix));
    append_lag_equalities(prob, classes, goff, ".c" + suffix, /*include_zero_lag=*/true,
                          /*zero_lag_rhs=*/1.0);
  }

  check_block_budget(prob, max_block);
  return prob;
}

SdpProblem build_noiseless_dual(const Observation& obs, const SubspaceBases& bases,
                                int max_block) {
  return build_ntuple_dual(obs, {bases.T}, {bases.D}, max_block);
}

SdpProblem build_noisy_dual(const Observation& obs, const SubspaceBases& bases, double mu_r,
                            double mu_c, double eps_e, int max_block) {
  obs.validate();
  if (!(mu_r > 0) || !(mu_c > 0))
    throw std::invalid_argument("sdp: nonpositive regularizers");
  if (eps_e < 0) throw std::invalid_argument("sdp: eps_e must be >= 0");
  const ProblemDims& d = obs.dims;
  const int K = d.K();
  const bool with_spectral = eps_e > 0;

  SdpProblem prob;
  prob.layout.valid = true;
  prob.layout.dims = d;
  prob.layout.q_offset = 0;
  prob.layout.Q_offset = 2 * K;
  prob.layout.Qc_offset = 2 * K + gram_param_count(K);
  prob.layout.gram_offsets = {prob.layout.Q_offset, prob.layout.Qc_offset};
  prob.layout.mu_r = mu_r;
  prob.layout.mu_c = mu_c;
  prob.layout.eps_e = eps_e;
  int next = 2 * K + 2 * gram_param_count(K);
  if (with_spectral) {
    prob.layout.t_var = next++;
    prob.layout.tc_var = next++;
  }
  prob.layout.s_var = next++;
  prob.num_vars = next;
  prob.sense = Sense::Minimize;
  prob.objective = VectorXd::Zero(prob.num_vars);
  prob.objective[prob.layout.s_var] = 1.0;
  prob.description = "dual atomic-norm program (noisy)";

  prob.blocks.push_back(
      make_radar_lift(prob.layout, prob.layout.Q_offset, bases.T, mu_r * mu_r, "lift_radar"));
  prob.blocks.push_back(
      make_comms_lift(prob.layout, prob.layout.Qc_offset, bases.D, mu_c * mu_c, "lift_comms"));

  // ||q - y||_2 <= s as the arrow block [[s I, q - y], [(q - y)^H, s]].
  {
    PsdBlock arrow;
    arrow.n = K + 1;
    arrow.label = "residual";
    for (int i = 0; i <= K; ++i) arrow.terms.push_back({prob.layout.s_var, i, i, cxd(1, 0)});
    for (int mt = 0; mt < K; ++mt) {
      arrow.terms.push_back({prob.layout.q_offset + 2 * mt, mt, K, cxd(1, 0)});
      arrow.terms.push_back({prob.layout.q_offset + 2 * mt + 1, mt, K, j1i});
      arrow.constants.push_back({mt, K, -obs.y[mt]});
    }
    prob.blocks.push_back(std::move(arrow));
  }

  // t_i >= ||Q_i||_2 as t_i I - Q_i >= 0, one slack per Gram.
  if (with_spectral) {
    const std::pair<int, const char*> specs[] = {{0, "spectral_r"}, {1, "spectral_c"}};
    for (auto [gi, label] : specs) {
      int goff = prob.layout.gram_offsets[gi];
      int tv = gi == 0 ? prob.layout.t_var : prob.layout.tc_var;
      PsdBlock slack;
      slack.n = K;
      slack.label = label;
      for (int i = 0; i < K; ++i) {
        slack.terms.push_back({tv, i, i, cxd(1, 0)});
        slack.terms.push_back({gram_re_var_at(goff, K, i, i), i, i, cxd(-1, 0)});
        for (int j = i + 1; j < K; ++j) {
          slack.terms.push_back({gram_re_var_at(goff, K, i, j), i, j, cxd(-1, 0)});
          slack.terms.push_back({gram_im_var_at(goff, K, i, j), i, j, cxd(0, -1)});
        }
      }
      prob.blocks.push_back(std::move(slack));
    }
  }

  // Tr(Q_i) + (eps_e + 2 sqrt(K)) eps_e t_i <= 1 as 1x1 blocks.
  {
    const std::pair<int, const char*> specs[] = {{0, "trace_budget_r"}, {1, "trace_budget_c"}};
    for (auto [gi, label] : specs) {
      int goff = prob.layout.gram_offsets[gi];
      int tv = gi == 0 ? prob.layout.t_var : prob.layout.tc_var;
      PsdBlock budget;
      budget.n = 1;
      budget.label = label;
      budget.constants.push_back({0, 0, cxd(1, 0)});
      for (int i = 0; i < K; ++i)
        budget.terms.push_back({gram_re_var_at(goff, K, i, i), 0, 0, cxd(-1, 0)});
      if (with_spectral) {
        double gamma = (eps_e + 2.0 * std::sqrt(static_cast<double>(K))) * eps_e;
        budget.terms.push_back({tv, 0, 0, cxd(-gamma, 0)});
      }
      prob.blocks.push_back(std::move(budget));
    }
  }

  const auto classes = enumerate_lag_classes(d);
  append_lag_equalities(prob, classes, prob.layout.Q_offset, ".r",
                        /*include_zero_lag=*/false, 0.0);
  append_lag_equalities(prob, classes, prob.layout.Qc_offset, ".c",
                        /*include_zero_lag=*/false, 0.0);
  check_block_budget(prob, max_block);
  return prob;
}

Regularizers compute_regularizers(const ProblemDims& d, const SubspaceBases& bases,
                                  double sigma_noise, double eps_e, double rho) {
  if (rho < 1.0) throw std::invalid_argument("sdp: regularizer scale rho must be >= 1");
  Regularizers reg;
  if (sigma_noise <= 0) return reg;
  const double K = static_cast<double>(d.K());
  const double logK = std::log(K);
  const int J = static_cast<int>(bases.T.cols());
  double T_f = bases.T.norm();
  double D_f2 = 0;
  for (const auto& b : bases.D) D_f2 += b.squaredNorm();
  reg.mu_r = rho * sigma_noise *
             (eps_e * K + T_f * std::sqrt(double(d.M) * d.P * J * d.N_r * logK));
  reg.mu_c = rho * sigma_noise *
             (eps_e * K + std::sqrt(D_f2) * std::sqrt(double(d.M) * d.P * d.P * J * d.N_r * logK));
  return reg;
}

void SdpProblem::validate() const {
  if (objective.size() != num_vars) throw std::runtime_error("sdp: objective length mismatch");
  for (const auto& blk : blocks) {
    if (blk.n <= 0) throw std::runtime_error("sdp: empty block '" + blk.label + "'");
    for (const auto& t : blk.terms) {
      if (t.var < 0 || t.var >= num_vars || t.i < 0 || t.i > t.j || t.j >= blk.n)
        throw std::runtime_error("sdp: term out of range in '" + blk.label + "'");
      if (t.i == t.j && std::abs(t.coef.imag()) > 1e-12)
        throw std::runtime_error("sdp: complex diagonal coefficient in '" + blk.label + "'");
    }
    for (const auto& c : blk.constants) {
      if (c.i < 0 || c.i > c.j || c.j >= blk.n)
        throw std::runtime_error("sdp: constant out of range in '" + blk.label + "'");
      if (c.i == c.j && std::abs(c.value.imag()) > 1e-12)
        throw std::runtime_error("sdp: complex diagonal constant in '" + blk.label + "'");
    }
  }
  for (const auto& eq : eqs)
    for (const auto& [var, coef] : eq.a) {
      if (var < 0 || var >= num_vars)
        throw std::runtime_error("sdp: equality touches unknown variable");
      if (!std::isfinite(coef)) throw std::runtime_error("sdp: non-finite equality coefficient");
    }
}

std::string SdpProblem::to_json() const {
  // Full problem dump: enough for an external solver to rebuild and cross-check.
  nlohmann::json j;
  j["num_vars"] = num_vars;
  j["sense"] = sense == Sense::Minimize ? "minimize" : "maximize";
  j["objective_const"] = objective_const;
  j["description"] = description;
  nlohmann::json obj = nlohmann::json::array();
  for (int k = 0; k < num_vars; ++k)
    if (objective[k] != 0.0) obj.push_back({k, objective[k]});
  j["objective"] = std::move(obj);
  j["blocks"] = nlohmann::json::array();
  for (const auto& blk : blocks) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : blk.terms)
      terms.push_back({t.var, t.i, t.j, t.coef.real(), t.coef.imag()});
    nlohmann::json consts = nlohmann::json::array();
    for (const auto& c : blk.constants)
      consts.push_back({c.i, c.j, c.value.real(), c.value.imag()});
    j["blocks"].push_back({{"label", blk.label},
                           {"n", blk.n},
                           {"terms", std::move(terms)},
                           {"constants", std::move(consts)}});
  }
  j["eqs"] = nlohmann::json::array();
  for (const auto& eq : eqs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [var, coef] : eq.a) a.push_back({var, coef});
    j["eqs"].push_back({{"a", std::move(a)}, {"b", eq.b}, {"label", eq.label}});
  }
  if (layout.valid) {
    j["layout"] = {{"M", layout.dims.M},     {"P", layout.dims.P}, {"N_r", layout.dims.N_r},
                   {"q_offset", layout.q_offset}, {"Q_offset", layout.Q_offset},
                   {"Qc_offset", layout.Qc_offset}, {"gram_offsets", layout.gram_offsets},
                   {"t_var", layout.t_var},  {"tc_var", layout.tc_var},
                   {"s_var", layout.s_var},  {"mu_r", layout.mu_r},
                   {"mu_c", layout.mu_c},    {"eps_e", layout.eps_e}};
  }
  return j.dump();
}

}  // namespace soman
