#include <somandbd/harness.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include <somandbd/io.hpp>
#include <somandbd/localize.hpp>
#include <somandbd/plots.hpp>
#include <somandbd/rng.hpp>
#include <somandbd/sdp.hpp>
#include <somandbd/waveforms.hpp>

namespace soman {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  dims.validate();
  solver.validate();
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (!(peak_slack > 0 && peak_slack <= 1))
    throw std::invalid_argument("config: peak_slack must be in (0, 1]");
  if (!(amp_prune >= 0 && amp_prune < 1))
    throw std::invalid_argument("config: amp_prune must be in [0, 1)");
  if (rho_reg < 1.0) throw std::invalid_argument("config: rho_reg must be >= 1");
  if (sigma_gainphase < 0 || eps_e_declared < 0)
    throw std::invalid_argument("config: error parameters must be >= 0");
  if (!(success_threshold > 0))
    throw std::invalid_argument("config: success_threshold must be > 0");
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir must be non-empty");
  for (int g : grid)
    if (g < 0) throw std::invalid_argument("config: grid sizes must be >= 0");
  for (int m : sweep_M)
    if (m < 1 || m % 2 == 0) throw std::invalid_argument("config: swept M must be odd and >= 1");
  for (int p : sweep_P)
    if (p < 1) throw std::invalid_argument("config: swept P must be >= 1");
  for (int r : sweep_N_r)
    if (r < 1) throw std::invalid_argument("config: swept N_r must be >= 1");
  for (int lq : sweep_LQ)
    if (lq < 1) throw std::invalid_argument("config: swept L=Q must be >= 1");
  for (int jv : sweep_J)
    if (jv < 1) throw std::invalid_argument("config: swept J must be >= 1");
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  if (j.contains("dims")) {
    const json& dj = j.at("dims");
    c.dims.M = dj.value("M", c.dims.M);
    c.dims.P = dj.value("P", c.dims.P);
    c.dims.N_r = dj.value("N_r", c.dims.N_r);
    c.dims.J = dj.value("J", c.dims.J);
    c.dims.L = dj.value("L", c.dims.L);
    c.dims.Q = dj.value("Q", c.dims.Q);
  }
  c.delta_tau = j.value("delta_tau", c.delta_tau);
  c.delta_nu = j.value("delta_nu", c.delta_nu);
  c.delta_beta = j.value("delta_beta", c.delta_beta);
  // absent or non-numeric ("inf") = noiseless
  if (j.contains("snr_db") && j.at("snr_db").is_number())
    c.snr_db = j.at("snr_db").get<double>();
  c.sigma_gainphase = j.value("sigma_gainphase", c.sigma_gainphase);
  c.eps_e_declared = j.value("eps_e", c.eps_e_declared);
  c.rho_reg = j.value("rho_reg", c.rho_reg);
  if (j.contains("grid")) {
    const auto g = j.at("grid").get<std::vector<int>>();
    if (g.size() != 3) throw std::invalid_argument("config: grid must have 3 entries");
    std::copy(g.begin(), g.end(), c.grid.begin());
  }
  c.peak_slack = j.value("peak_slack", c.peak_slack);
  c.amp_prune = j.value("amp_prune", c.amp_prune);
  c.sweep_M = j.value("sweep_M", c.sweep_M);
  c.sweep_P = j.value("sweep_P", c.sweep_P);
  c.sweep_N_r = j.value("sweep_N_r", c.sweep_N_r);
  c.sweep_LQ = j.value("sweep_LQ", c.sweep_LQ);
  c.sweep_J = j.value("sweep_J", c.sweep_J);
  c.sweep_snr = j.value("sweep_snr", c.sweep_snr);
  c.sweep_sigma = j.value("sweep_sigma", c.sweep_sigma);
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  c.success_threshold = j.value("success_threshold", c.success_threshold);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("solver")) {
    const json& sj = j.at("solver");
    c.solver.tol_abs = sj.value("tol_abs", c.solver.tol_abs);
    c.solver.tol_rel = sj.value("tol_rel", c.solver.tol_rel);
    c.solver.tol_gap = sj.value("tol_gap", c.solver.tol_gap);
    c.solver.max_iter = sj.value("max_iter", c.solver.max_iter);
    c.solver.rho = sj.value("rho", c.solver.rho);
    c.solver.over_relax = sj.value("over_relax", c.solver.over_relax);
    c.solver.adaptive_rho = sj.value("adaptive_rho", c.solver.adaptive_rho);
    c.solver.scaling = sj.value("scaling", c.solver.scaling);
    c.solver.check_every = sj.value("check_every", c.solver.check_every);
    c.solver.log_every = sj.value("log_every", c.solver.log_every);
    c.solver.log_path = sj.value("log_path", c.solver.log_path);
    c.solver.verbose = sj.value("verbose", c.solver.verbose);
  }
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["dims"] = {{"M", c.dims.M},   {"P", c.dims.P}, {"N_r", c.dims.N_r},
               {"J", c.dims.J},   {"L", c.dims.L}, {"Q", c.dims.Q}};
  j["delta_tau"] = c.delta_tau;
  j["delta_nu"] = c.delta_nu;
  j["delta_beta"] = c.delta_beta;
  if (std::isfinite(c.snr_db))
    j["snr_db"] = c.snr_db;
  else
    j["snr_db"] = "inf";
  j["sigma_gainphase"] = c.sigma_gainphase;
  j["eps_e"] = c.eps_e_declared;
  j["rho_reg"] = c.rho_reg;
  j["grid"] = {c.grid[0], c.grid[1], c.grid[2]};
  j["peak_slack"] = c.peak_slack;
  j["amp_prune"] = c.amp_prune;
  j["sweep_M"] = c.sweep_M;
  j["sweep_P"] = c.sweep_P;
  j["sweep_N_r"] = c.sweep_N_r;
  j["sweep_LQ"] = c.sweep_LQ;
  j["sweep_J"] = c.sweep_J;
  j["sweep_snr"] = c.sweep_snr;
  j["sweep_sigma"] = c.sweep_sigma;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["success_threshold"] = c.success_threshold;
  j["out_dir"] = c.out_dir;
  j["solver"] = {{"tol_abs", c.solver.tol_abs},
                 {"tol_rel", c.solver.tol_rel},
                 {"tol_gap", c.solver.tol_gap},
                 {"max_iter", c.solver.max_iter},
                 {"rho", c.solver.rho},
                 {"over_relax", c.solver.over_relax},
                 {"adaptive_rho", c.solver.adaptive_rho},
                 {"scaling", c.solver.scaling},
                 {"check_every", c.solver.check_every},
                 {"log_every", c.solver.log_every},
                 {"log_path", c.solver.log_path},
                 {"verbose", c.solver.verbose}};
  return j.dump(2) + "\n";
}

std::uint64_t trial_seed(std::uint64_t master, const ProblemDims& dims, double snr_db,
                         double sigma, int trial) {
  std::uint64_t cell = static_cast<std::uint64_t>(dims.M) |
                       (static_cast<std::uint64_t>(dims.P) << 10) |
                       (static_cast<std::uint64_t>(dims.N_r) << 20) |
                       (static_cast<std::uint64_t>(dims.J) << 30) |
                       (static_cast<std::uint64_t>(dims.L) << 40) |
                       (static_cast<std::uint64_t>(dims.Q) << 50);
  std::uint64_t noise = splitmix64(std::bit_cast<std::uint64_t>(snr_db)) ^
                        splitmix64(~std::bit_cast<std::uint64_t>(sigma));
  return derive_seed(derive_seed(master, cell, noise), 0x7472ce11ULL,
                     static_cast<std::uint64_t>(trial));
}

namespace {

// Degenerate axes (length 1) carry no resolvable parameter: no separation.
double default_sep(double requested, int axis_len) {
  if (requested >= 0) return requested;
  return axis_len > 1 ? 1.0 / axis_len : 0.0;
}

struct AxisErrors {
  double tau = 0, nu = 0, beta = 0;
};

// One-to-one matching of true atoms to estimates, greedy on total wrap-around
// distance; unmatched true atoms count as a worst-case 0.5 on every axis.
AxisErrors matched_axis_errors(const std::vector<Atom3D>& truth,
                               const std::vector<LocalizedAtom>& est) {
  AxisErrors e;
  std::vector<char> t_done(truth.size(), 0), e_used(est.size(), 0);
  for (std::size_t pass = 0; pass < truth.size(); ++pass) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bk = -1;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (t_done[i]) continue;
      for (std::size_t k = 0; k < est.size(); ++k) {
        if (e_used[k]) continue;
        double s = wrap_dist(truth[i].tau, est[k].tau) + wrap_dist(truth[i].nu, est[k].nu) +
                   wrap_dist(truth[i].beta, est[k].beta);
        if (s < best) {
          best = s;
          bi = static_cast<int>(i);
          bk = static_cast<int>(k);
        }
      }
    }
    if (bi < 0) break;  // estimates exhausted
    t_done[static_cast<std::size_t>(bi)] = 1;
    e_used[static_cast<std::size_t>(bk)] = 1;
    e.tau = std::max(e.tau, wrap_dist(truth[static_cast<std::size_t>(bi)].tau, est[static_cast<std::size_t>(bk)].tau));
    e.nu = std::max(e.nu, wrap_dist(truth[static_cast<std::size_t>(bi)].nu, est[static_cast<std::size_t>(bk)].nu));
    e.beta = std::max(e.beta, wrap_dist(truth[static_cast<std::size_t>(bi)].beta, est[static_cast<std::size_t>(bk)].beta));
  }
  for (char dn : t_done)
    if (!dn) {
      e.tau = std::max(e.tau, 0.5);
      e.nu = std::max(e.nu, 0.5);
      e.beta = std::max(e.beta, 0.5);
    }
  return e;
}

// All localized peaks as a parametric channel, strongest-first (unit
// placeholder amplitudes until a least-squares refit fills them in).
Channel3D as_channel(const LocalizationResult& loc) {
  Channel3D ch;
  for (const LocalizedAtom& a : loc.atoms)
    ch.atoms.push_back(Atom3D{a.tau, a.nu, a.beta, cxd{1.0, 0.0}});
  return ch;
}

std::vector<LocalizedAtom> as_localized(const Channel3D& ch) {
  std::vector<LocalizedAtom> v;
  v.reserve(ch.atoms.size());
  for (const Atom3D& a : ch.atoms) v.push_back(LocalizedAtom{a.tau, a.nu, a.beta, 0.0});
  return v;
}

}  // namespace

TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t seed, int trial_index) {
  TrialRecord rec;
  const ProblemDims d = config.dims;
  rec.M = d.M;
  rec.P = d.P;
  rec.N_r = d.N_r;
  rec.L = d.L;
  rec.Q = d.Q;
  rec.J = d.J;
  rec.snr_db = config.snr_db;
  rec.sigma = config.sigma_gainphase;
  rec.trial = trial_index;
  rec.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    d.validate();
    SceneDraw draw;
    draw.delta_tau = default_sep(config.delta_tau, d.M);
    draw.delta_nu = default_sep(config.delta_nu, d.P);
    draw.delta_beta = default_sep(config.delta_beta, d.N_r);
    const Scene scene = random_scene(d, seed, draw);
    const SubspaceBases bases = random_bases(d, seed);
    const GroundTruth gt = random_ground_truth(d, scene.radar, scene.comms, seed);
    const VectorXcd y_clean = synth_observation(d, bases, scene.radar, scene.comms, gt);

    const bool noiseless = std::isinf(config.snr_db) && config.sigma_gainphase == 0.0;
    VectorXcd y_obs = y_clean;
    double eps_used = 0.0;
    SdpProblem prob;
    if (noiseless) {
      prob = build_noiseless_dual(Observation{d, y_clean}, bases);
    } else {
      const double sigma_noise =
          std::isinf(config.snr_db) ? 0.0 : noise_sigma_for_snr(y_clean, config.snr_db);
      const ErrorModel em{config.sigma_gainphase, sigma_noise, config.eps_e_declared};
      const PerturbedObservation po = apply_error_model(y_clean, d, em, seed);
      y_obs = po.y;
      eps_used = po.epsilon_used;
      const Regularizers regs =
          compute_regularizers(d, bases, sigma_noise, eps_used, config.rho_reg);
      prob = build_noisy_dual(Observation{d, y_obs}, bases, regs.mu_r, regs.mu_c, eps_used);
    }

    const SdpSolution sol = solve_sdp(prob, config.solver);
    rec.solver_iterations = sol.stats.iterations;
    if (sol.status == SolveStatus::Infeasible)
      throw std::runtime_error("solver reported infeasibility: " + sol.stats.detail);

    double thr_r = kNoiselessPeakThreshold, thr_c = kNoiselessPeakThreshold;
    if (!noiseless) {
      const auto spec_norm = [](const MatrixXcd& G) {
        const Eigen::SelfAdjointEigenSolver<MatrixXcd> es(G, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
      };
      const NoisyThresholds nt =
          noisy_thresholds(prob.layout.mu_r, prob.layout.mu_c, eps_used, d, spec_norm(sol.Q),
                           spec_norm(sol.Qc), config.peak_slack);
      if (!nt.usable) throw std::runtime_error("noisy peak levels are not positive");
      thr_r = nt.threshold_r;
      thr_c = nt.threshold_c;
    }

    const PolynomialField field_r = eval_dual_field(sol.q, bases, d, config.grid, FieldKind::Radar);
    const PolynomialField field_c = eval_dual_field(sol.q, bases, d, config.grid, FieldKind::Comms);
    const LocalizationResult loc_r = extract_peaks(field_r, sol.q, bases, d, thr_r);
    const LocalizationResult loc_c = extract_peaks(field_c, sol.q, bases, d, thr_c);

    // Peak extraction over-reports on marginal instances (the solved dual
    // polynomial can touch the unit ball away from the true support), so the
    // reported model order comes from a joint amplitude refit over all
    // candidate peaks rather than from the peak count alone.
    Channel3D r_est, c_est;
    RecoveredSignals sig;
    bool have_sig = false;
    if (!loc_r.atoms.empty() || !loc_c.atoms.empty()) {
      const AtomSelection sel =
          select_atoms(y_obs, as_channel(loc_r), as_channel(loc_c), bases, d, config.amp_prune);
      r_est = sel.radar;
      c_est = sel.comms;
      sig = sel.signals;
      have_sig = true;
    }
    rec.atoms_r = r_est.size();
    rec.atoms_c = c_est.size();

    const AxisErrors er = matched_axis_errors(scene.radar.atoms, as_localized(r_est));
    rec.err_tau_r = er.tau;
    rec.err_nu_r = er.nu;
    rec.err_beta_r = er.beta;
    const AxisErrors ec = matched_axis_errors(scene.comms.atoms, as_localized(c_est));
    rec.err_tau_c = ec.tau;
    rec.err_nu_c = ec.nu;
    rec.err_beta_c = ec.beta;

    const bool have_r = !r_est.atoms.empty(), have_c = !c_est.atoms.empty();
    if (have_sig && (d.L == 0 || have_r) && (d.Q == 0 || have_c)) {
      if (!noiseless && eps_used > 0)
        sig = recover_alternating(y_obs, r_est, c_est, bases, d, eps_used).signals;
      for (std::size_t i = 0; i < r_est.atoms.size(); ++i)
        r_est.atoms[i].alpha = sig.alphas_r(static_cast<Eigen::Index>(i));
      for (std::size_t i = 0; i < c_est.atoms.size(); ++i)
        c_est.atoms[i].alpha = sig.alphas_c(static_cast<Eigen::Index>(i));
      if (have_r && d.L > 0) {
        const MatrixXcd Xr_hat = sig.u_hat * channel_vector(d, r_est).adjoint();
        rec.err_Xr = (Xr_hat - gt.X_r).norm() / gt.X_r.norm();
      }
      if (have_c && d.Q > 0) {
        const MatrixXcd Xc_hat = sig.v_hat * channel_vector(d, c_est).adjoint();
        rec.err_Xc = (Xc_hat - gt.X_c).norm() / gt.X_c.norm();
      }
    }
    if (d.L == 0) rec.err_Xr = 0.0;
    if (d.Q == 0) rec.err_Xc = 0.0;
    rec.success =
        rec.err_Xr < config.success_threshold && rec.err_Xc < config.success_threshold;
  } catch (const std::exception& ex) {
    rec.failure = ex.what();
    rec.success = false;
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

namespace {

std::string num_field(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string sanitized(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string cell_trial_key(const ProblemDims& d, double snr, double sigma, int trial) {
  std::ostringstream os;
  os << d.M << ',' << d.P << ',' << d.N_r << ',' << d.L << ',' << d.Q << ',' << d.J << ','
     << num_field(snr) << ',' << num_field(sigma) << ',' << trial;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string trial_csv_row(const TrialRecord& rec) {
  std::ostringstream os;
  os << rec.M << ',' << rec.P << ',' << rec.N_r << ',' << rec.L << ',' << rec.Q << ',' << rec.J
     << ',' << num_field(rec.snr_db) << ',' << num_field(rec.sigma) << ',' << rec.trial << ','
     << rec.seed << ',' << num_field(rec.err_Xr) << ',' << num_field(rec.err_Xc) << ','
     << num_field(rec.err_tau_r) << ',' << num_field(rec.err_nu_r) << ','
     << num_field(rec.err_beta_r) << ',' << num_field(rec.err_tau_c) << ','
     << num_field(rec.err_nu_c) << ',' << num_field(rec.err_beta_c) << ',' << rec.atoms_r << ','
     << rec.atoms_c << ',' << (rec.success ? 1 : 0) << ',' << rec.solver_iterations << ','
     << num_field(rec.wall_time_s) << ',' << sanitized(rec.failure);
  return os.str();
}

SweepSummary run_sweep(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const std::string csv_path = config.out_dir + "/sweep.csv";

  // Previously persisted trials: key -> success, so re-runs resume.
  std::map<std::string, bool> done;
  if (fs::exists(csv_path)) {
    std::ifstream in(csv_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("M,", 0) == 0) continue;
      const auto f = split_csv(line);
      if (f.size() < 21) continue;
      std::string key = f[0];
      for (int i = 1; i <= 8; ++i) key += "," + f[static_cast<std::size_t>(i)];
      done[key] = (f[20] == "1");
    }
  }

  const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
  std::ofstream out(csv_path, std::ios::app);
  if (!out) throw std::runtime_error("sweep: cannot open " + csv_path);
  if (fresh) out << kSweepCsvHeader << '\n' << std::flush;

  const std::vector<int> Ms = config.sweep_M.empty() ? std::vector<int>{config.dims.M} : config.sweep_M;
  const std::vector<int> Ps = config.sweep_P.empty() ? std::vector<int>{config.dims.P} : config.sweep_P;
  const std::vector<int> Rs =
      config.sweep_N_r.empty() ? std::vector<int>{config.dims.N_r} : config.sweep_N_r;
  const std::vector<int> LQs = config.sweep_LQ.empty() ? std::vector<int>{-1} : config.sweep_LQ;
  const std::vector<int> Js = config.sweep_J.empty() ? std::vector<int>{config.dims.J} : config.sweep_J;
  const std::vector<double> snrs =
      config.sweep_snr.empty() ? std::vector<double>{config.snr_db} : config.sweep_snr;
  const std::vector<double> sigmas =
      config.sweep_sigma.empty() ? std::vector<double>{config.sigma_gainphase} : config.sweep_sigma;

  SweepSummary summary;
  struct CellEntry {
    std::array<int, 7> coord;  // iM, iP, iR, iLQ, iJ, iSnr, iSigma
    double rate = 0, se = 0;
  };
  std::vector<CellEntry> entries;

  for (std::size_t iM = 0; iM < Ms.size(); ++iM)
    for (std::size_t iP = 0; iP < Ps.size(); ++iP)
      for (std::size_t iR = 0; iR < Rs.size(); ++iR)
        for (std::size_t iLQ = 0; iLQ < LQs.size(); ++iLQ)
          for (std::size_t iJ = 0; iJ < Js.size(); ++iJ)
            for (std::size_t iSnr = 0; iSnr < snrs.size(); ++iSnr)
              for (std::size_t iSig = 0; iSig < sigmas.size(); ++iSig) {
                ExperimentConfig cell = config;
                cell.dims.M = Ms[iM];
                cell.dims.P = Ps[iP];
                cell.dims.N_r = Rs[iR];
                if (LQs[iLQ] >= 0) {
                  cell.dims.L = LQs[iLQ];
                  cell.dims.Q = LQs[iLQ];
                }
                cell.dims.J = Js[iJ];
                cell.snr_db = snrs[iSnr];
                cell.sigma_gainphase = sigmas[iSig];

                int successes = 0;
                for (int t = 0; t < config.trials; ++t) {
                  const std::uint64_t s =
                      trial_seed(config.seed, cell.dims, cell.snr_db, cell.sigma_gainphase, t);
                  const std::string key =
                      cell_trial_key(cell.dims, cell.snr_db, cell.sigma_gainphase, t);
                  auto it = done.find(key);
                  if (it == done.end()) {
                    const TrialRecord rec = run_trial(cell, s, t);
                    out << trial_csv_row(rec) << '\n' << std::flush;
                    it = done.emplace(key, rec.success).first;
                    ++summary.executed_trials;
                  } else {
                    ++summary.skipped_trials;
                  }
                  if (it->second) ++successes;
                }

                CellSummary cs;
                cs.dims = cell.dims;
                cs.snr_db = cell.snr_db;
                cs.sigma = cell.sigma_gainphase;
                cs.trials = config.trials;
                cs.success_rate = static_cast<double>(successes) / config.trials;
                cs.stderr2 =
                    std::sqrt(cs.success_rate * (1.0 - cs.success_rate) / config.trials);
                summary.cells.push_back(cs);
                entries.push_back(CellEntry{{static_cast<int>(iM), static_cast<int>(iP),
                                             static_cast<int>(iR), static_cast<int>(iLQ),
                                             static_cast<int>(iJ), static_cast<int>(iSnr),
                                             static_cast<int>(iSig)},
                                            cs.success_rate, cs.stderr2});
              }

  // Monotone-within-1-SE diagnostics along the sample axes: a drop between
  // adjacent cells larger than one standard error of the difference fails.
  const std::array<std::pair<std::string, std::size_t>, 3> axes{
      {{"M", Ms.size()}, {"P", Ps.size()}, {"N_r", Rs.size()}}};
  for (int axis = 0; axis < 3; ++axis) {
    if (axes[static_cast<std::size_t>(axis)].second < 2) continue;
    std::map<std::array<int, 7>, std::vector<const CellEntry*>> grouped;
    for (const auto& e : entries) {
      std::array<int, 7> k = e.coord;
      k[static_cast<std::size_t>(axis)] = -1;
      grouped[k].push_back(&e);
    }
    bool ok = true;
    for (auto& [k, cells] : grouped) {
      std::sort(cells.begin(), cells.end(), [axis](const CellEntry* a, const CellEntry* b) {
        return a->coord[static_cast<std::size_t>(axis)] < b->coord[static_cast<std::size_t>(axis)];
      });
      for (std::size_t i = 1; i < cells.size(); ++i) {
        const double diff = cells[i]->rate - cells[i - 1]->rate;
        const double se_diff =
            std::sqrt(cells[i]->se * cells[i]->se + cells[i - 1]->se * cells[i - 1]->se);
        if (diff < -se_diff) ok = false;
      }
    }
    summary.monotone_diagnostics.emplace_back(axes[static_cast<std::size_t>(axis)].first, ok);
  }

  json js;
  js["executed_trials"] = summary.executed_trials;
  js["skipped_trials"] = summary.skipped_trials;
  js["cells"] = json::array();
  for (const auto& cs : summary.cells) {
    json cj;
    cj["dims"] = {{"M", cs.dims.M}, {"P", cs.dims.P}, {"N_r", cs.dims.N_r},
                  {"J", cs.dims.J}, {"L", cs.dims.L}, {"Q", cs.dims.Q}};
    if (std::isfinite(cs.snr_db))
      cj["snr_db"] = cs.snr_db;
    else
      cj["snr_db"] = "inf";
    cj["sigma"] = cs.sigma;
    cj["trials"] = cs.trials;
    cj["success_rate"] = cs.success_rate;
    cj["stderr"] = cs.stderr2;
    js["cells"].push_back(cj);
  }
  js["monotone_within_1se"] = json::object();
  for (const auto& [name, ok] : summary.monotone_diagnostics) js["monotone_within_1se"][name] = ok;
  write_text_file(config.out_dir + "/sweep_summary.json", js.dump(2) + "\n");
  return summary;
}

int emit_plots(const std::string& sweep_csv, const std::string& out_dir) {
  if (!fs::exists(sweep_csv)) {
    std::cerr << "plots: sweep CSV not found: " << sweep_csv << "\n";
    return 0;
  }
  struct Row {
    std::array<double, 8> axis;  // M, P, N_r, L, Q, J, snr_db, sigma
    bool success;
  };
  std::vector<Row> rows;
  {
    std::ifstream in(sweep_csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("M,", 0) == 0) continue;
      const auto f = split_csv(line);
      if (f.size() < 21) continue;
      Row r{};
      bool bad = false;
      for (int i = 0; i < 8; ++i) {
        const std::string& s = f[static_cast<std::size_t>(i)];
        if (s == "inf")
          r.axis[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
        else if (s == "-inf")
          r.axis[static_cast<std::size_t>(i)] = -std::numeric_limits<double>::infinity();
        else
          try {
            r.axis[static_cast<std::size_t>(i)] = std::stod(s);
          } catch (...) {
            bad = true;
          }
      }
      if (bad) continue;
      r.success = (f[20] == "1");
      rows.push_back(r);
    }
  }
  if (rows.empty()) {
    std::cerr << "plots: " << sweep_csv << " holds no trial rows\n";
    return 0;
  }
  fs::create_directories(out_dir);
  const std::array<std::string, 8> names{"M", "P", "N_r", "L", "Q", "J", "snr_db", "sigma"};
  int files = 0;
  for (int a = 0; a < 8; ++a) {
    std::map<double, std::pair<int, int>> agg;  // value -> (trials, successes)
    for (const auto& r : rows) {
      auto& c = agg[r.axis[static_cast<std::size_t>(a)]];
      ++c.first;
      c.second += r.success ? 1 : 0;
    }
    if (agg.size() < 2) continue;
    std::vector<CurvePoint> pts;
    std::ostringstream csv;
    csv << "x,success_rate,stderr,trials\n";
    for (const auto& [x, c] : agg) {
      const double p = static_cast<double>(c.second) / c.first;
      const double se = std::sqrt(p * (1.0 - p) / c.first);
      csv << num_field(x) << ',' << num_field(p) << ',' << num_field(se) << ',' << c.first
          << '\n';
      if (std::isfinite(x)) pts.push_back(CurvePoint{x, p, se});
    }
    const std::string stem = out_dir + "/success_vs_" + names[static_cast<std::size_t>(a)];
    write_text_file(stem + ".csv", csv.str());
    write_text_file(stem + ".svg",
                    svg_line_chart("success rate vs " + names[static_cast<std::size_t>(a)],
                                   names[static_cast<std::size_t>(a)], "success rate", pts));
    files += 2;
  }
  return files;
}

// ---- physical-unit conversion ---------------------------------------------

void PhysicalScene::validate() const {
  if (!(f_c > 0) || !(B > 0) || !(PRI > 0) || !(delta_f > 0))
    throw std::invalid_argument("physical scene: parameters must be > 0");
}

namespace {

constexpr double kLightSpeed = 299792458.0;

// [0,1) -> [-1/2, 1/2)
double centered_unit(double x) {
  const double y = wrap01(x);
  return y >= 0.5 ? y - 1.0 : y;
}

}  // namespace

PhysicalAtom to_physical(const Atom3D& atom, const PhysicalScene& ps) {
  ps.validate();
  PhysicalAtom out;
  out.range_m = wrap01(atom.tau) * kLightSpeed / (2.0 * ps.delta_f);
  out.velocity_mps = centered_unit(atom.nu) * kLightSpeed / (2.0 * ps.f_c * ps.PRI);
  out.angle_deg = std::asin(2.0 * centered_unit(atom.beta)) * 360.0 / two_pi;
  return out;
}

Atom3D from_physical(const PhysicalAtom& atom, const PhysicalScene& ps) {
  ps.validate();
  if (!(atom.angle_deg >= -90.0 && atom.angle_deg <= 90.0))
    throw std::invalid_argument("physical atom: angle must lie in [-90, 90] degrees");
  Atom3D a;
  a.tau = wrap01(ps.delta_f * 2.0 * atom.range_m / kLightSpeed);
  a.nu = wrap01(2.0 * atom.velocity_mps * ps.f_c * ps.PRI / kLightSpeed);
  a.beta = wrap01(0.5 * std::sin(atom.angle_deg * two_pi / 360.0));
  return a;
}

}  // namespace soman
