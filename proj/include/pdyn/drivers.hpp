#pragma once

#include "pdyn/plateau.hpp"
#include "pdyn/spectrum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pdyn {

// Shared knob set for the experiment drivers. Every run is deterministic in
// (config, seeds): rerunning a command writes byte-identical files.
// Randomness is split into named streams derived from the seeds — all micro
// runs of one invocation share the weight stream (seeded by weight_seed)
// while each entry of `seeds` drives its own input-noise / initial-state
// stream.
struct ExperimentConfig {
  std::string spectrum_literal = "1:1";
  int K = 2;
  int M = 2;
  double eta = 0.1;
  bool freeze_second_layer = true;

  int N = 10000;             // micro input dimension
  double n_effective = 1e5;  // dimension governing macro initial spread
  double t_end = 0.0;        // 0 = per-command default
  double dt = 0.0;           // 0 = 0.05 / (eta * mu1)
  long long steps = 0;       // micro; 0 = round(t_end * N)
  int record_points = 2000;  // target trajectory records per run

  std::vector<std::uint64_t> seeds{1};
  std::uint64_t weight_seed = 1000;

  PlateauParams plateau;

  std::vector<double> grid;  // sweep values (mu1 or delta-lambda)
  double mu1 = 1.0;          // fixed eigenvalue mean for sweep-mu2
  bool micro_in_sweeps = false;

  double data_scale = 1.0;  // analyze-dataset: multiply entries first
  bool center_data = false;
  int max_distinct = 8;

  long long mc_samples = 1'000'000;  // gauss-check
  int mc_matrices = 100;

  std::string out_dir = "out";
  int jobs = 1;
  std::string init_state_path;  // macro: resume from snapshot
  std::string save_state_path;  // macro: write final snapshot
};

struct CompareReport {
  struct PerSeed {
    std::uint64_t seed = 0;
    double mean_abs_log10_gap = 0.0;
    double max_abs_log10_gap = 0.0;
  };
  std::vector<PerSeed> per_seed;
  double mean_abs_log10_gap = 0.0;  // worst per-seed mean
  double max_abs_log10_gap = 0.0;
};

struct SweepRow {
  double grid_value = 0.0;  // mu1 or delta-lambda
  double mu2 = 0.0;         // filled by sweep-mu2
  PlateauReport plateau;
};

// Microscopic runs, one trajectory CSV per seed.
void cmd_micro(const ExperimentConfig& config);

// Macroscopic run from a sampled (or resumed) initial state.
void cmd_macro(const ExperimentConfig& config);

// Runs the SGD simulator and the ODE system from the same initial weights
// (the macro state is measured from them) and reports the log10 eps_g gap
// on the macro record grid, micro interpolated linearly in alpha.
// Writes micro[_s*].csv, macro.csv and compare_report.json.
CompareReport cmd_compare(const ExperimentConfig& config);

// Single-eigenvalue spectra over the mu1 grid; writes one trajectory per
// grid point under curves/ plus plateau_table.csv. t_end scales as
// (base t_end) / mu1 so every run covers its plateau exit.
std::vector<SweepRow> cmd_sweep_mu1(const ExperimentConfig& config);

// Two-eigenvalue spectra mu1 -/+ dl/2 at equal weight over the delta-lambda
// grid, mu1 fixed. Throws InvalidDelta when dl >= 2*mu1.
std::vector<SweepRow> cmd_sweep_mu2(const ExperimentConfig& config);

struct DatasetReport {
  Eigen::Index rows = 0, cols = 0;
  std::vector<double> moments;  // mu_0..mu_4
  std::vector<double> eigenvalues;
  std::string spectrum_literal;
  std::vector<std::string> warnings;
  std::string json;  // full serialized report
};

// Moments and compressed spectrum of a headerless numeric CSV (one sample
// per row). Writes moments_report.json and prints a short summary.
DatasetReport cmd_analyze_dataset(const ExperimentConfig& config,
                                  const std::string& csv_path);

struct GaussCheckRow {
  const char* kernel = "";
  double max_ratio = 0.0;  // max |closed - MC| / SE over the matrices
  int failures = 0;        // count with ratio > 4
};

// Oracle-agreement suite: random Wishart-style PSD covariances per kernel,
// closed form vs Monte Carlo. Prints one table row per kernel; returns the
// total failure count (0 = all within 4 SE).
int cmd_gauss_check(const ExperimentConfig& config, std::ostream& out,
                    std::vector<GaussCheckRow>* rows = nullptr);

// Headerless numeric CSV loader; reports malformed cells with line numbers.
Eigen::MatrixXd read_csv_matrix(const std::string& path);

// Flat `key = value` config file ('#' comments); keys are the CLI flag names
// without the leading dashes. Applied over the defaults, before flags, so
// the resolution order is defaults < config file < explicit flags.
void apply_config_file(ExperimentConfig& config, const std::string& path);

}  // namespace pdyn
