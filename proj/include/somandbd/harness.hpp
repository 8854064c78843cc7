#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <somandbd/model.hpp>
#include <somandbd/solver.hpp>
#include <somandbd/types.hpp>

namespace soman {

// Experiment orchestration: single end-to-end trials, Monte Carlo sweeps with
// per-trial derived seeds and idempotent CSV persistence, physical-unit
// conversion and plot-data emission.

struct ExperimentConfig {
  ProblemDims dims{7, 3, 3, 2, 1, 1};  // CI-scale cell: M=7, P=3, N_r=3, J=2, L=Q=1
  // Channel separations for scene drawing; negative selects 1/M, 1/P, 1/N_r.
  double delta_tau = -1.0, delta_nu = -1.0, delta_beta = -1.0;
  // Noise / hardware-error cell. snr_db = +inf and sigma_gainphase = 0 selects
  // the noiseless program.
  double snr_db = std::numeric_limits<double>::infinity();
  double sigma_gainphase = 0.0;
  double eps_e_declared = 0.0;  // 0 = use the realized ||e||_2
  double rho_reg = 1.0;         // scale on the theorem-style regularizers
  // Localization accuracy is limited by how flat the dual polynomial is left
  // at optimality, so trials solve tighter than the generic solver defaults.
  SolverConfig solver = [] {
    SolverConfig s;
    s.tol_abs = 1e-8;
    s.tol_rel = 1e-7;
    s.tol_gap = 1e-6;
    s.max_iter = 60000;
    return s;
  }();
  std::array<int, 3> grid{0, 0, 0};  // localization grid (0 = 8x oversampling)
  double peak_slack = 0.95;          // noisy threshold slack factor
  double amp_prune = 0.05;           // select_atoms relative amplitude cut
  // Sweep axes; empty lists mean "the single value from this config".
  std::vector<int> sweep_M, sweep_P, sweep_N_r, sweep_LQ, sweep_J;
  std::vector<double> sweep_snr, sweep_sigma;
  int trials = 1;
  std::uint64_t seed = 1;
  double success_threshold = 1e-3;
  std::string out_dir = "out";

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct TrialRecord {
  int M = 0, P = 0, N_r = 0, L = 0, Q = 0, J = 0;
  double snr_db = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double err_Xr = 1.0, err_Xc = 1.0;  // relative Frobenius errors
  // Max per-axis wrap-around parameter errors over matched atoms (0.5 = an
  // atom was not matched at all).
  double err_tau_r = 0.0, err_nu_r = 0.0, err_beta_r = 0.0;
  double err_tau_c = 0.0, err_nu_c = 0.0, err_beta_c = 0.0;
  int atoms_r = 0, atoms_c = 0;  // localized atom counts
  bool success = false;          // both relative errors < threshold
  int solver_iterations = 0;
  double wall_time_s = 0.0;
  std::string failure;  // empty for a clean run; solver failures recorded here
};

// Pure derived seed for (master, cell, trial): reordering execution never
// changes a record.
std::uint64_t trial_seed(std::uint64_t master, const ProblemDims& dims, double snr_db,
                         double sigma, int trial);

// Full pipeline on one cell: scene -> synth -> (errors) -> SDP -> solve ->
// localize -> recover -> lifted reconstruction -> errors.  Solver or builder
// failures are recorded in the record, not thrown.
TrialRecord run_trial(const ExperimentConfig& config, std::uint64_t seed, int trial_index = 0);

inline constexpr std::string_view kSweepCsvHeader =
    "M,P,N_r,L,Q,J,snr_db,sigma,trial,seed,err_Xr,err_Xc,err_tau_r,err_nu_r,err_beta_r,"
    "err_tau_c,err_nu_c,err_beta_c,atoms_r,atoms_c,success,iterations,wall_time_s,failure";

std::string trial_csv_row(const TrialRecord& rec);

struct CellSummary {
  ProblemDims dims;
  double snr_db = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
  int trials = 0;
  double success_rate = 0.0;
  double stderr2 = 0.0;  // binomial standard error
};

struct SweepSummary {
  std::vector<CellSummary> cells;
  // Axis name -> monotone-within-1-SE diagnostic for integer sweep axes.
  std::vector<std::pair<std::string, bool>> monotone_diagnostics;
  int executed_trials = 0;
  int skipped_trials = 0;  // already present in the persisted CSV
};

// Runs the Cartesian product of the sweep axes; appends one CSV row per trial
// to <out_dir>/sweep.csv (flushed per trial, resumable) and writes
// <out_dir>/sweep_summary.json.
SweepSummary run_sweep(const ExperimentConfig& config);

// Success-rate curves per swept axis from a persisted sweep CSV, as CSV + SVG
// pairs under out_dir.  Empty sweeps warn and produce no files.  Returns the
// number of files written.
int emit_plots(const std::string& sweep_csv, const std::string& out_dir);

// ---- physical-unit conversion ---------------------------------------------

struct PhysicalScene {
  double f_c = 3.0e9;      // carrier (Hz)
  double B = 50.0e6;       // occupied bandwidth (Hz)
  double PRI = 1.0e-3;     // pulse repetition interval (s)
  double delta_f = 1.0e6;  // subcarrier spacing (Hz)
  // half-wavelength element spacing is implied by beta = sin(theta)/2

  void validate() const;
};

struct PhysicalAtom {
  double range_m = 0.0;
  double velocity_mps = 0.0;
  double angle_deg = 0.0;
};

// tau = delta_f * (2 range / c); nu = PRI * (2 v f_c / c); beta = sin(theta)/2.
// nu and beta are centered to [-1/2, 1/2) before conversion.
PhysicalAtom to_physical(const Atom3D& atom, const PhysicalScene& ps);
Atom3D from_physical(const PhysicalAtom& atom, const PhysicalScene& ps);

}  // namespace soman
