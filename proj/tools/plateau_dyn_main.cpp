#include "pdyn/drivers.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

void add_common_flags(CLI::App* cmd, pdyn::ExperimentConfig& cfg) {
  cmd->add_option("--config", "flat key = value config file; explicit flags win")
      ->type_name("FILE");
  cmd->add_option("--spectrum", cfg.spectrum_literal,
                  "eigenvalue:fraction pairs, e.g. 0.4:0.5,1.2:0.3,1.6:0.2");
  cmd->add_option("--K", cfg.K, "student hidden units")
      ->check(CLI::Range(1, 8));
  cmd->add_option("--M", cfg.M, "teacher hidden units")
      ->check(CLI::Range(1, 8));
  cmd->add_option("--eta", cfg.eta, "learning rate scale (step is eta/N)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--N", cfg.N, "input dimension (micro)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n-effective", cfg.n_effective,
                  "dimension setting the macro initial-state spread")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--t-end", cfg.t_end, "horizon in normalized time")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--dt", cfg.dt, "integration step (0 = 0.05/(eta*mu1))")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--steps", cfg.steps, "micro SGD steps (0 = t_end*N)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--record-points", cfg.record_points,
                  "target records per trajectory")
      ->check(CLI::Range(2, 1000000));
  cmd->add_option("--seeds", cfg.seeds,
                  "input/init stream seeds, comma separated")
      ->delimiter(',');
  cmd->add_option("--weight-seed", cfg.weight_seed,
                  "seed of the shared weight stream");
  cmd->add_flag("!--no-freeze-second-layer", cfg.freeze_second_layer,
                "integrate the D/E dynamics instead of soft-committee mode");
  cmd->add_option("--window", cfg.plateau.window,
                  "records per slope-smoothing window");
  cmd->add_option("--terminal-fraction", cfg.plateau.terminal_fraction,
                  "tail share defining the terminal speed");
  cmd->add_option("--min-points", cfg.plateau.min_points,
                  "shortest admissible plateau run");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--jobs", cfg.jobs, "concurrent grid points in sweeps")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level simulator of student-teacher SGD learning: "
               "microscopic weight dynamics, the order-parameter ODE system, "
               "and plateau quantification."};
  app.set_version_flag("--version", pdyn::kVersion);
  app.require_subcommand(1);

  pdyn::ExperimentConfig cfg;
  std::string dataset_path;

  // config files layer between defaults and flags, so they are applied
  // before CLI11 parses the remaining arguments
  for (int a = 1; a + 1 < argc; ++a) {
    if (std::string(argv[a]) == "--config") {
      try {
        pdyn::apply_config_file(cfg, argv[a + 1]);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  }

  auto* micro = app.add_subcommand("micro", "run the SGD simulator");
  auto* macro = app.add_subcommand("macro", "integrate the ODE system");
  auto* compare =
      app.add_subcommand("compare", "micro vs macro from shared weights");
  auto* sweep1 = app.add_subcommand(
      "sweep-mu1", "plateau statistics over single-eigenvalue spectra");
  auto* sweep2 = app.add_subcommand(
      "sweep-mu2", "plateau statistics over two-eigenvalue spectra, mu1 fixed");
  auto* analyze =
      app.add_subcommand("analyze-dataset", "moments of a CSV dataset");
  auto* gauss =
      app.add_subcommand("gauss-check", "kernel closed forms vs Monte Carlo");

  for (CLI::App* cmd : {micro, macro, compare, sweep1, sweep2})
    add_common_flags(cmd, cfg);

  macro->add_option("--init-state", cfg.init_state_path,
                    "resume from a state snapshot JSON");
  macro->add_option("--save-state", cfg.save_state_path,
                    "write the final state snapshot JSON");
  sweep1->add_option("--grid", cfg.grid, "mu1 values")->delimiter(',');
  sweep2->add_option("--grid", cfg.grid, "delta-lambda values")
      ->delimiter(',');
  sweep2->add_option("--mu1", cfg.mu1, "fixed eigenvalue mean");
  for (CLI::App* cmd : {sweep1, sweep2})
    cmd->add_flag("--micro", cfg.micro_in_sweeps,
                  "also run a micro spot-check per grid point");

  analyze->add_option("--config", "flat key = value config file")
      ->type_name("FILE");
  gauss->add_option("--config", "flat key = value config file")
      ->type_name("FILE");
  analyze->add_option("path", dataset_path, "headerless numeric CSV")
      ->required();
  analyze->add_option("--scale", cfg.data_scale,
                      "multiply every entry first (e.g. 0.00392156862745098 "
                      "for 8-bit pixels to [0,1])");
  analyze->add_flag("--center", cfg.center_data,
                    "subtract column means before the second-moment matrix");
  analyze->add_option("--max-distinct", cfg.max_distinct,
                      "spectrum compression bins");
  analyze->add_option("--out", cfg.out_dir, "output directory");

  gauss->add_option("--samples", cfg.mc_samples, "Monte Carlo samples");
  gauss->add_option("--matrices", cfg.mc_matrices, "random PSD matrices");
  gauss->add_option("--seeds", cfg.seeds, "base seed")->delimiter(',');
  gauss->add_option("--jobs", cfg.jobs, "concurrent matrices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (micro->parsed()) {
      pdyn::cmd_micro(cfg);
    } else if (macro->parsed()) {
      pdyn::cmd_macro(cfg);
    } else if (compare->parsed()) {
      const pdyn::CompareReport r = pdyn::cmd_compare(cfg);
      std::cout << "mean |log10 gap| = " << r.mean_abs_log10_gap
                << ", max = " << r.max_abs_log10_gap << "\n";
    } else if (sweep1->parsed()) {
      pdyn::cmd_sweep_mu1(cfg);
    } else if (sweep2->parsed()) {
      pdyn::cmd_sweep_mu2(cfg);
    } else if (analyze->parsed()) {
      const pdyn::DatasetReport r = pdyn::cmd_analyze_dataset(cfg, dataset_path);
      std::cout << r.rows << " rows x " << r.cols << " cols\n";
      for (size_t m = 1; m < r.moments.size(); ++m)
        std::cout << "mu" << m << " = " << r.moments[m] << "\n";
      std::cout << "spectrum: " << r.spectrum_literal << "\n";
      for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
    } else if (gauss->parsed()) {
      if (pdyn::cmd_gauss_check(cfg, std::cout) != 0) return 2;
    }
  } catch (const pdyn::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
