// Command-line front end: every subcommand runs the deterministic pipeline
// fragment it names, reading upstream artifacts from files when paths are
// given and regenerating them from (config, seed) otherwise.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <somandbd/certificate.hpp>
#include <somandbd/harness.hpp>
#include <somandbd/io.hpp>
#include <somandbd/localize.hpp>
#include <somandbd/plots.hpp>
#include <somandbd/sdp.hpp>
#include <somandbd/waveforms.hpp>

namespace {

using namespace soman;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

double sep_or_default(double requested, int axis_len) {
  if (requested >= 0) return requested;
  return axis_len > 1 ? 1.0 / axis_len : 0.0;
}

// Scene, bases, ground truth and the (possibly perturbed) observation for one
// deterministic instance of the configured cell.
struct Instance {
  Scene scene;
  SubspaceBases bases;
  GroundTruth gt;
  Observation obs;
  bool noiseless = true;
  double eps_used = 0.0;
};

Instance make_instance(const ExperimentConfig& cfg, const std::string& scene_path) {
  Instance ins;
  if (!scene_path.empty()) {
    ins.scene = load_scene(scene_path);
  } else {
    SceneDraw draw;
    draw.delta_tau = sep_or_default(cfg.delta_tau, cfg.dims.M);
    draw.delta_nu = sep_or_default(cfg.delta_nu, cfg.dims.P);
    draw.delta_beta = sep_or_default(cfg.delta_beta, cfg.dims.N_r);
    ins.scene = random_scene(cfg.dims, cfg.seed, draw);
  }
  const ProblemDims d = ins.scene.dims;
  ins.bases = random_bases(d, ins.scene.seed);
  ins.gt = random_ground_truth(d, ins.scene.radar, ins.scene.comms, ins.scene.seed);
  const VectorXcd y_clean = synth_observation(d, ins.bases, ins.scene.radar, ins.scene.comms, ins.gt);
  ins.noiseless = std::isinf(cfg.snr_db) && cfg.sigma_gainphase == 0.0;
  if (ins.noiseless) {
    ins.obs = Observation{d, y_clean};
  } else {
    const double sigma_noise =
        std::isinf(cfg.snr_db) ? 0.0 : noise_sigma_for_snr(y_clean, cfg.snr_db);
    const ErrorModel em{cfg.sigma_gainphase, sigma_noise, cfg.eps_e_declared};
    const PerturbedObservation po = apply_error_model(y_clean, d, em, ins.scene.seed);
    ins.obs = Observation{d, po.y};
    ins.eps_used = po.epsilon_used;
  }
  return ins;
}

SdpSolution solve_instance(const ExperimentConfig& cfg, const Instance& ins,
                           const std::string& log_path) {
  const ProblemDims d = ins.scene.dims;
  SdpProblem prob;
  if (ins.noiseless) {
    prob = build_noiseless_dual(ins.obs, ins.bases);
  } else {
    const double sigma_noise =
        std::isinf(cfg.snr_db) ? 0.0 : noise_sigma_for_snr(ins.obs.y, cfg.snr_db);
    const Regularizers regs =
        compute_regularizers(d, ins.bases, sigma_noise, ins.eps_used, cfg.rho_reg);
    prob = build_noisy_dual(ins.obs, ins.bases, regs.mu_r, regs.mu_c, ins.eps_used);
  }
  SolverConfig scfg = cfg.solver;
  if (scfg.log_path.empty()) scfg.log_path = log_path;
  const SdpSolution sol = solve_sdp(prob, scfg);
  if (sol.status == SolveStatus::Infeasible)
    throw CliError(kExitSolver, "solver reported infeasibility: " + sol.stats.detail);
  return sol;
}

json peaks_to_json(const LocalizationResult& loc) {
  json arr = json::array();
  for (const auto& a : loc.atoms)
    arr.push_back(
        {{"tau", a.tau}, {"nu", a.nu}, {"beta", a.beta}, {"peak_norm2", a.peak_norm2}});
  return json{{"threshold", loc.threshold_used}, {"refined", loc.refined}, {"atoms", arr}};
}

// All localized peaks as a parametric channel, strongest-first.
Channel3D as_channel(const LocalizationResult& loc) {
  Channel3D ch;
  for (const auto& a : loc.atoms)
    ch.atoms.push_back(Atom3D{a.tau, a.nu, a.beta, cxd{1.0, 0.0}});
  return ch;
}

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-antenna dual-blind deconvolution: synthesis, SDP solving, "
               "localization, waveform recovery and experiment sweeps"};
  app.require_subcommand(1);

  std::string config_path, out_override, scene_path, q_path, csv_path;
  std::uint64_t seed = 0;
  int threads = 1, trial_index = 0;
  bool paper_scale = false, export_fields = false;
  double threshold_override = -1.0;

  app.add_option("--config", config_path, "experiment configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--out", out_override, "output directory (overrides config)");
  app.add_option("--threads", threads, "dense linear algebra thread count")
      ->check(CLI::PositiveNumber);
  app.add_flag("--paper-scale", paper_scale,
               "use the full-scale cell M=13 P=9 N_r=5 L=4 Q=2 J=3");

  CLI::App* synth = app.add_subcommand("synth", "draw a scene and synthesize the observation");
  CLI::App* solve = app.add_subcommand("solve", "build and solve the dual SDP");
  solve->add_option("--scene", scene_path, "scene JSON (default: drawn from config)");
  CLI::App* localize = app.add_subcommand("localize", "evaluate dual polynomials, extract peaks");
  localize->add_option("--scene", scene_path, "scene JSON (default: drawn from config)");
  localize->add_option("--q", q_path, "dual vector .cf64 (default: solve first)");
  localize->add_option("--threshold", threshold_override,
                       "peak threshold override (squared-norm scale)");
  localize->add_flag("--export-fields", export_fields, "write full field grids");
  CLI::App* recover = app.add_subcommand("recover", "estimate waveforms from localized atoms");
  recover->add_option("--scene", scene_path, "scene JSON (default: drawn from config)");
  recover->add_option("--q", q_path, "dual vector .cf64 (default: solve first)");
  CLI::App* certify = app.add_subcommand("certify", "construct and validate a dual certificate");
  CLI::App* trial = app.add_subcommand("trial", "run one end-to-end trial");
  trial->add_option("--trial-index", trial_index, "trial index inside the cell");
  CLI::App* sweep = app.add_subcommand("sweep", "run the configured Monte Carlo sweep");
  CLI::App* plot = app.add_subcommand("plot", "emit success-rate curves from a sweep CSV");
  plot->add_option("--csv", csv_path, "sweep CSV (default: <out>/sweep.csv)");

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = config_from_json(read_text_file(config_path));
    if (paper_scale) cfg.dims = ProblemDims{13, 9, 5, 3, 4, 2};
    if (*seed_opt) cfg.seed = seed;
    if (!out_override.empty()) cfg.out_dir = out_override;
    cfg.validate();
  } catch (const std::exception& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  }
  Eigen::setNbThreads(threads);

  try {
    fs::create_directories(cfg.out_dir);
    const std::string out = cfg.out_dir;

    if (*synth) {
      const Instance ins = make_instance(cfg, "");
      save_scene(out + "/scene.json", ins.scene);
      save_observation(out + "/observation.json", ins.obs);
      write_cf64(out + "/y.cf64", ins.obs.y);
      std::cout << "wrote " << out << "/scene.json, observation.json, y.cf64 (K = "
                << ins.obs.y.size() << ")\n";
    }

    if (*solve) {
      const Instance ins = make_instance(cfg, scene_path);
      const SdpSolution sol = solve_instance(cfg, ins, out + "/solver_log.csv");
      write_cf64(out + "/q.cf64", sol.q);
      json j{{"status", status_name(sol.status)},
             {"objective", sol.objective_value},
             {"iterations", sol.stats.iterations},
             {"primal_residual", sol.stats.primal_residual},
             {"dual_residual", sol.stats.dual_residual},
             {"gap", sol.stats.gap},
             {"seconds", sol.stats.seconds}};
      write_text_file(out + "/solution.json", j.dump(2) + "\n");
      std::cout << "status " << status_name(sol.status) << ", objective "
                << sol.objective_value << ", " << sol.stats.iterations << " iterations\n";
    }

    if (*localize || *recover) {
      const Instance ins = make_instance(cfg, scene_path);
      const ProblemDims d = ins.scene.dims;
      VectorXcd q;
      double thr_r = threshold_override, thr_c = threshold_override;
      if (q_path.empty()) {
        const SdpSolution sol = solve_instance(cfg, ins, out + "/solver_log.csv");
        q = sol.q;
        if (thr_r < 0 && !ins.noiseless) {
          const auto spec_norm = [](const MatrixXcd& G) {
            const Eigen::SelfAdjointEigenSolver<MatrixXcd> es(G, Eigen::EigenvaluesOnly);
            return es.eigenvalues().cwiseAbs().maxCoeff();
          };
          const double sigma_noise =
              std::isinf(cfg.snr_db) ? 0.0 : noise_sigma_for_snr(ins.obs.y, cfg.snr_db);
          const Regularizers regs =
              compute_regularizers(d, ins.bases, sigma_noise, ins.eps_used, cfg.rho_reg);
          const NoisyThresholds nt =
              noisy_thresholds(regs.mu_r, regs.mu_c, ins.eps_used, d, spec_norm(sol.Q),
                               spec_norm(sol.Qc), cfg.peak_slack);
          thr_r = nt.threshold_r;
          thr_c = nt.threshold_c;
        }
      } else {
        q = read_cf64(q_path);
      }
      if (thr_r < 0) thr_r = kNoiselessPeakThreshold;
      if (thr_c < 0) thr_c = kNoiselessPeakThreshold;

      const PolynomialField field_r = eval_dual_field(q, ins.bases, d, cfg.grid, FieldKind::Radar);
      const PolynomialField field_c = eval_dual_field(q, ins.bases, d, cfg.grid, FieldKind::Comms);
      const LocalizationResult loc_r = extract_peaks(field_r, q, ins.bases, d, thr_r);
      const LocalizationResult loc_c = extract_peaks(field_c, q, ins.bases, d, thr_c);

      if (*localize) {
        json j{{"radar", peaks_to_json(loc_r)}, {"comms", peaks_to_json(loc_c)}};
        write_text_file(out + "/peaks.json", j.dump(2) + "\n");
        std::vector<double> betas_r, betas_c;
        for (const auto& a : loc_r.atoms) betas_r.push_back(a.beta);
        for (const auto& a : loc_c.atoms) betas_c.push_back(a.beta);
        int files = write_field_slices(field_r, betas_r, out + "/radar");
        files += write_field_slices(field_c, betas_c, out + "/comms");
        if (export_fields) {
          export_field(out + "/field_radar.f64", field_r);
          export_field(out + "/field_comms.f64", field_c);
          files += 2;
        }
        std::cout << "radar peaks " << loc_r.atoms.size() << ", comms peaks "
                  << loc_c.atoms.size() << ", " << files << " field files under " << out
                  << "\n";
      }

      if (*recover) {
        const Channel3D r_est = strongest(loc_r, d.L);
        const Channel3D c_est = strongest(loc_c, d.Q);
        if (r_est.atoms.empty() && c_est.atoms.empty())
          throw std::runtime_error("recover: no peaks above threshold");
        RecoveredSignals sig;
        if (!ins.noiseless && ins.eps_used > 0) {
          sig = recover_alternating(ins.obs.y, r_est, c_est, ins.bases, d, ins.eps_used).signals;
        } else {
          const MatrixXcd W = build_W(r_est, c_est, ins.bases, d);
          sig = recover_ls(W, ins.obs.y, r_est, c_est, ins.bases, d);
        }
        save_recovered(out + "/recovered", sig);
        std::cout << "recovered " << r_est.atoms.size() << " radar + " << c_est.atoms.size()
                  << " comms atoms, residual " << sig.residual << "\n";
      }
    }

    if (*certify) {
      SceneDraw draw;
      draw.delta_tau = sep_or_default(cfg.delta_tau, cfg.dims.M);
      draw.delta_nu = sep_or_default(cfg.delta_nu, cfg.dims.P);
      draw.delta_beta = sep_or_default(cfg.delta_beta, cfg.dims.N_r);
      const Scene scene = random_scene(cfg.dims, cfg.seed, draw);
      const SubspaceBases bases = random_bases(cfg.dims, cfg.seed);
      const VectorXcd q0 = construct_certificate(scene, bases, cfg.dims);
      const CertificateReport report = validate_certificate(q0, scene, bases, cfg.dims, cfg.grid);
      write_cf64(out + "/q0.cf64", q0);
      write_text_file(out + "/certificate.json", certificate_report_to_json(report) + "\n");
      std::cout << (report.passed ? "certificate PASSED" : "certificate FAILED")
                << ": interp " << report.interp_residual << ", deriv " << report.deriv_residual
                << ", off-grid max " << report.offgrid_max << "\n";
    }

    if (*trial) {
      const std::uint64_t s =
          trial_seed(cfg.seed, cfg.dims, cfg.snr_db, cfg.sigma_gainphase, trial_index);
      const TrialRecord rec = run_trial(cfg, s, trial_index);
      std::cout << kSweepCsvHeader << "\n" << trial_csv_row(rec) << "\n";
      write_text_file(out + "/trial.csv",
                      std::string(kSweepCsvHeader) + "\n" + trial_csv_row(rec) + "\n");
      if (!rec.failure.empty()) {
        std::cerr << "trial failed: " << rec.failure << "\n";
        return kExitSolver;
      }
    }

    if (*sweep) {
      const SweepSummary s = run_sweep(cfg);
      std::cout << "sweep: " << s.executed_trials << " trials executed, " << s.skipped_trials
                << " resumed from " << out << "/sweep.csv\n";
      for (const auto& c : s.cells)
        std::cout << "  cell M=" << c.dims.M << " P=" << c.dims.P << " N_r=" << c.dims.N_r
                  << " L=" << c.dims.L << " Q=" << c.dims.Q << " J=" << c.dims.J
                  << ": success " << c.success_rate << " +/- " << c.stderr2 << "\n";
      for (const auto& [axis, ok] : s.monotone_diagnostics)
        std::cout << "  monotone within 1 SE along " << axis << ": " << (ok ? "yes" : "NO")
                  << "\n";
    }

    if (*plot) {
      const std::string csv = csv_path.empty() ? out + "/sweep.csv" : csv_path;
      const int files = emit_plots(csv, out);
      std::cout << files << " plot files under " << out << "\n";
    }
  } catch (const CliError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return ex.code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return kExitOk;
}
