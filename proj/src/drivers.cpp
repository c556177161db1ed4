#include "pdyn/drivers.hpp"

#include "pdyn/errors.hpp"
#include "pdyn/gauss.hpp"
#include "pdyn/macro.hpp"
#include "pdyn/micro.hpp"
#include "pdyn/rng.hpp"
#include "pdyn/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace pdyn {

namespace {

namespace fs = std::filesystem;

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c, const std::string& command) {
  std::string canon = command + '|' + c.spectrum_literal + '|' +
                      std::to_string(c.K) + '|' + std::to_string(c.M) + '|' +
                      shortest(c.eta) + '|' + std::to_string(c.N) + '|' +
                      shortest(c.n_effective) + '|' + shortest(c.t_end) + '|' +
                      shortest(c.dt) + '|' + std::to_string(c.steps) + '|' +
                      join_seeds(c.seeds) + '|' + std::to_string(c.weight_seed) +
                      '|' + shortest(c.mu1) + '|' +
                      std::to_string(c.freeze_second_layer);
  for (double g : c.grid) canon += '|' + shortest(g);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canon)));
  return buf;
}

std::vector<std::string> provenance(const ExperimentConfig& c,
                                    const std::string& command) {
  if (c.seeds.empty())
    throw std::invalid_argument("at least one seed is required");
  std::vector<std::string> lines;
  lines.push_back(std::string("plateau-dyn ") + kVersion);
  lines.push_back("command: " + command);
  lines.push_back("config-hash: " + config_hash(c, command));
  lines.push_back("spectrum: " + c.spectrum_literal);
  lines.push_back("seeds: " + join_seeds(c.seeds) +
                  " weight-seed: " + std::to_string(c.weight_seed));
  return lines;
}

void write_file(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open " + path.string());
  out << content;
}

void write_trajectory_file(const fs::path& path, const Trajectory& traj,
                           const std::vector<std::string>& comments) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open " + path.string());
  write_trajectory_csv(out, traj, comments);
}

SimConfig make_sim_config(const ExperimentConfig& c,
                          const EigenSpectrum& /*spec*/, double t_end,
                          std::uint64_t input_seed) {
  SimConfig sim;
  sim.N = c.N;
  sim.K = c.K;
  sim.M = c.M;
  sim.eta = c.eta;
  sim.soft_committee = c.freeze_second_layer;
  sim.steps = c.steps > 0 ? c.steps
                          : std::max<long long>(1, std::llround(t_end * c.N));
  sim.record_every = std::max<long long>(1, sim.steps / c.record_points);
  sim.weight_seed = derive_seed(c.weight_seed, "weights");
  sim.input_seed = input_seed;
  return sim;
}

MacroConfig make_macro_config(const ExperimentConfig& c,
                              const EigenSpectrum& spec, double t_end) {
  MacroConfig mc;
  mc.eta = c.eta;
  mc.spectrum = spec;
  mc.freeze_second_layer = c.freeze_second_layer;
  mc.t_end = t_end;
  mc.dt = c.dt;
  const double dt = mc.effective_dt();
  const auto steps = static_cast<long long>(std::ceil(t_end / dt - 1e-9));
  mc.record_every = std::max<long long>(1, steps / c.record_points);
  return mc;
}

// Piecewise-linear interpolation of log10(eps) in alpha.
double interp_log10(const Trajectory& traj, double alpha) {
  const auto& pts = traj.points;
  if (alpha <= pts.front().alpha) return std::log10(pts.front().eps_g);
  if (alpha >= pts.back().alpha) return std::log10(pts.back().eps_g);
  auto it = std::lower_bound(
      pts.begin(), pts.end(), alpha,
      [](const TrajectoryPoint& p, double a) { return p.alpha < a; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double f = (alpha - lo.alpha) / (hi.alpha - lo.alpha);
  return (1.0 - f) * std::log10(lo.eps_g) + f * std::log10(hi.eps_g);
}

void run_parallel(int jobs, int tasks, const std::function<void(int)>& work) {
  jobs = std::clamp(jobs, 1, tasks);
  if (jobs == 1) {
    for (int k = 0; k < tasks; ++k) work(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < tasks; k = next.fetch_add(1)) {
        try {
          work(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string sweep_table_csv(const std::vector<SweepRow>& rows,
                            const std::vector<std::string>& comments,
                            bool with_mu2) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += with_mu2 ? "delta_lambda,mu2,length,height,found\n"
                  : "mu1,length,height,found\n";
  for (const auto& r : rows) {
    out += shortest(r.grid_value);
    if (with_mu2) out += ',' + shortest(r.mu2);
    out += ',' + shortest(r.plateau.length);
    out += ',' + shortest(r.plateau.height);
    out += r.plateau.found ? ",1\n" : ",0\n";
  }
  return out;
}

// Deep post-convergence, eps_g decays to the cancellation floor of its
// closed form (~1e-16, occasionally negative). Records beyond that floor
// carry no information and break log-loss analysis, so trajectories are cut
// there before they are written or searched for plateaus.
void truncate_at_floor(Trajectory& traj, double floor = 1e-14) {
  while (traj.points.size() > 1 && traj.points.back().eps_g <= floor)
    traj.points.pop_back();
}

OrderParameterState initial_macro_state(const ExperimentConfig& c,
                                        const EigenSpectrum& spec) {
  if (!c.init_state_path.empty()) {
    std::ifstream in(c.init_state_path, std::ios::binary);
    if (!in)
      throw std::invalid_argument("cannot open state snapshot " +
                                  c.init_state_path);
    std::ostringstream text;
    text << in.rdbuf();
    return state_from_json(text.str());
  }
  return random_initial_state(spec, c.K, c.M, c.n_effective,
                              derive_seed(c.seeds.at(0), "init"));
}

}  // namespace

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::string line;
  long long lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " +
                                what);
  };
  auto to_double = [&](const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (!end || *end != '\0') fail("cannot parse number '" + v + "'");
    return x;
  };
  auto to_bool = [&](const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("cannot parse boolean '" + v + "'");
    return false;
  };
  auto split_list = [](const std::string& v) {
    std::vector<std::string> items;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(item);
    return items;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\"");
      const size_t e = s.find_last_not_of(" \t\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");

    if (key == "spectrum") config.spectrum_literal = value;
    else if (key == "K") config.K = static_cast<int>(to_double(value));
    else if (key == "M") config.M = static_cast<int>(to_double(value));
    else if (key == "eta") config.eta = to_double(value);
    else if (key == "N") config.N = static_cast<int>(to_double(value));
    else if (key == "n-effective") config.n_effective = to_double(value);
    else if (key == "t-end") config.t_end = to_double(value);
    else if (key == "dt") config.dt = to_double(value);
    else if (key == "steps") config.steps = static_cast<long long>(to_double(value));
    else if (key == "record-points") config.record_points = static_cast<int>(to_double(value));
    else if (key == "weight-seed") config.weight_seed = static_cast<std::uint64_t>(to_double(value));
    else if (key == "window") config.plateau.window = static_cast<int>(to_double(value));
    else if (key == "terminal-fraction") config.plateau.terminal_fraction = to_double(value);
    else if (key == "min-points") config.plateau.min_points = static_cast<int>(to_double(value));
    else if (key == "mu1") config.mu1 = to_double(value);
    else if (key == "scale") config.data_scale = to_double(value);
    else if (key == "max-distinct") config.max_distinct = static_cast<int>(to_double(value));
    else if (key == "out") config.out_dir = value;
    else if (key == "jobs") config.jobs = static_cast<int>(to_double(value));
    else if (key == "center") config.center_data = to_bool(value);
    else if (key == "micro") config.micro_in_sweeps = to_bool(value);
    else if (key == "freeze-second-layer") config.freeze_second_layer = to_bool(value);
    else if (key == "samples") config.mc_samples = static_cast<long long>(to_double(value));
    else if (key == "matrices") config.mc_matrices = static_cast<int>(to_double(value));
    else if (key == "init-state") config.init_state_path = value;
    else if (key == "save-state") config.save_state_path = value;
    else if (key == "seeds") {
      config.seeds.clear();
      for (const auto& item : split_list(value))
        config.seeds.push_back(static_cast<std::uint64_t>(to_double(item)));
      if (config.seeds.empty()) fail("seeds list is empty");
    } else if (key == "grid") {
      config.grid.clear();
      for (const auto& item : split_list(value))
        config.grid.push_back(to_double(item));
    } else {
      fail("unknown key '" + key + "'");
    }
  }
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long long lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (ptr != end && *ptr == ' ') ++ptr;
      double v = 0;
      auto res = std::from_chars(ptr, end, v);
      if (res.ec != std::errc{})
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": cannot parse number at column " +
                                    std::to_string(row.size() + 1));
      row.push_back(v);
      ptr = res.ptr;
      while (ptr != end && *ptr == ' ') ++ptr;
      if (ptr == end) break;
      if (*ptr != ',')
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected comma");
      ++ptr;
    }
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected " + std::to_string(width) +
                                  " columns, got " +
                                  std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return m;
}

void cmd_micro(const ExperimentConfig& config) {
  const EigenSpectrum spec = EigenSpectrum::parse(config.spectrum_literal);
  const double t_end = config.t_end != 0 ? config.t_end : 100.0;
  const auto comments = provenance(config, "micro");
  for (size_t k = 0; k < config.seeds.size(); ++k) {
    const SimConfig sim = make_sim_config(
        config, spec, t_end, derive_seed(config.seeds[k], "inputs"));
    const Trajectory traj = run_micro(sim, spec);
    const std::string name = config.seeds.size() == 1
                                 ? "micro.csv"
                                 : "micro_s" + std::to_string(config.seeds[k]) +
                                       ".csv";
    write_trajectory_file(fs::path(config.out_dir) / name, traj, comments);
  }
}

void cmd_macro(const ExperimentConfig& config) {
  const EigenSpectrum spec = EigenSpectrum::parse(config.spectrum_literal);
  const double t_end = config.t_end != 0 ? config.t_end : 100.0;
  const OrderParameterState state0 = initial_macro_state(config, spec);
  AutoIntegrateResult result =
      integrate_auto(state0, make_macro_config(config, spec, t_end));
  truncate_at_floor(result.trajectory);
  auto comments = provenance(config, "macro");
  comments.push_back("dt: " + shortest(result.dt) +
                     " halvings: " + std::to_string(result.halvings));
  write_trajectory_file(fs::path(config.out_dir) / "macro.csv",
                        result.trajectory, comments);
  if (!config.save_state_path.empty())
    write_file(config.save_state_path,
               state_to_json(*result.trajectory.points.back().state));
}

CompareReport cmd_compare(const ExperimentConfig& config) {
  const EigenSpectrum spec = EigenSpectrum::parse(config.spectrum_literal);
  const double t_end = config.t_end != 0 ? config.t_end : 250.0;
  const auto comments = provenance(config, "compare");

  const SimConfig sim0 = make_sim_config(config, spec, t_end, 0);
  const NetworkWeights weights0 = init_weights(sim0, sim0.weight_seed);
  const OrderParameterState state0 =
      measure_order_parameters(weights0, spec, spec.distinct_count() - 1);

  const AutoIntegrateResult macro =
      integrate_auto(state0, make_macro_config(config, spec, t_end));
  write_trajectory_file(fs::path(config.out_dir) / "macro.csv",
                        macro.trajectory, comments);

  CompareReport report;
  for (size_t k = 0; k < config.seeds.size(); ++k) {
    SimConfig sim = sim0;
    sim.input_seed = derive_seed(config.seeds[k], "inputs");
    const Trajectory micro = run_micro_from(weights0, sim, spec);
    const std::string name = config.seeds.size() == 1
                                 ? "micro.csv"
                                 : "micro_s" + std::to_string(config.seeds[k]) +
                                       ".csv";
    write_trajectory_file(fs::path(config.out_dir) / name, micro, comments);

    const double alpha_max =
        std::min(micro.points.back().alpha, macro.trajectory.points.back().alpha);
    double sum = 0.0, worst = 0.0;
    long long count = 0;
    for (const auto& p : macro.trajectory.points) {
      if (p.alpha > alpha_max) break;
      const double gap =
          std::abs(interp_log10(micro, p.alpha) - std::log10(p.eps_g));
      sum += gap;
      worst = std::max(worst, gap);
      ++count;
    }
    report.per_seed.push_back(
        {config.seeds[k], sum / static_cast<double>(count), worst});
  }
  for (const auto& s : report.per_seed) {
    report.mean_abs_log10_gap =
        std::max(report.mean_abs_log10_gap, s.mean_abs_log10_gap);
    report.max_abs_log10_gap =
        std::max(report.max_abs_log10_gap, s.max_abs_log10_gap);
  }

  nlohmann::json j;
  j["version"] = kVersion;
  j["config_hash"] = config_hash(config, "compare");
  j["t_end"] = t_end;
  j["dt"] = macro.dt;
  j["mean_abs_log10_gap"] = report.mean_abs_log10_gap;
  j["max_abs_log10_gap"] = report.max_abs_log10_gap;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : report.per_seed)
    per.push_back({{"seed", s.seed},
                   {"mean_abs_log10_gap", s.mean_abs_log10_gap},
                   {"max_abs_log10_gap", s.max_abs_log10_gap}});
  j["per_seed"] = std::move(per);
  write_file(fs::path(config.out_dir) / "compare_report.json", j.dump(2));
  return report;
}

namespace {

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, bool is_mu2,
                                const std::string& command) {
  const double mu1 = is_mu2 ? config.mu1 : 0.0;
  std::vector<double> grid = config.grid;
  if (grid.empty())
    grid = is_mu2 ? std::vector<double>{0.0, 0.5, 1.0, 1.5}
                  : std::vector<double>{0.5, 1.0, 2.0, 4.0};

  // Spectra built up front so argument errors surface before any work runs.
  std::vector<EigenSpectrum> spectra;
  for (double g : grid) {
    if (is_mu2) {
      if (g < 0.0 || g >= 2.0 * mu1)
        throw InvalidDelta("delta-lambda " + shortest(g) +
                           " must lie in [0, 2*mu1) with mu1 = " +
                           shortest(mu1));
      spectra.push_back(
          g == 0.0 ? EigenSpectrum::from_pairs({{mu1, 1.0}})
                   : EigenSpectrum::from_pairs(
                         {{mu1 - 0.5 * g, 0.5}, {mu1 + 0.5 * g, 0.5}}));
    } else {
      if (g <= 0.0)
        throw std::invalid_argument("mu1 grid values must be positive");
      spectra.push_back(EigenSpectrum::from_pairs({{g, 1.0}}));
    }
  }

  // default horizon covers the plateau exit of the slowest default
  // grid point (mu1 = 0.5 runs to 2 * t_base)
  const double t_base = config.t_end != 0 ? config.t_end : 6000.0;
  const std::uint64_t init_seed = derive_seed(config.seeds.at(0), "init");
  std::vector<SweepRow> rows(grid.size());

  run_parallel(config.jobs, static_cast<int>(grid.size()), [&](int k) {
    const auto idx = static_cast<size_t>(k);
    const EigenSpectrum& spec = spectra[idx];
    const double run_mu1 = spec.moment(1);
    const double t_end = t_base / run_mu1;
    ExperimentConfig local = config;
    local.spectrum_literal = spec.to_literal();
    const OrderParameterState state0 = random_initial_state(
        spec, config.K, config.M, config.n_effective, init_seed);
    AutoIntegrateResult macro =
        integrate_auto(state0, make_macro_config(local, spec, t_end));
    truncate_at_floor(macro.trajectory);

    auto comments = provenance(local, command);
    comments.push_back((is_mu2 ? "delta_lambda: " : "mu1: ") +
                       shortest(grid[idx]));
    const std::string name = (is_mu2 ? "dlam_" : "mu1_") + shortest(grid[idx]);
    write_trajectory_file(
        fs::path(config.out_dir) / "curves" / (name + ".csv"),
        macro.trajectory, comments);

    SweepRow row;
    row.grid_value = grid[idx];
    row.mu2 = spec.moment(2);
    row.plateau = detect_plateau(macro.trajectory, config.plateau);
    write_file(fs::path(config.out_dir) / "curves" / (name + "_plateau.json"),
               report_to_json(row.plateau));
    rows[idx] = std::move(row);

    if (config.micro_in_sweeps) {
      const SimConfig sim = make_sim_config(
          local, spec, t_end, derive_seed(config.seeds.at(0), "inputs"));
      write_trajectory_file(
          fs::path(config.out_dir) / "curves" / (name + "_micro.csv"),
          run_micro(sim, spec), comments);
    }
  });

  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.grid_value < b.grid_value;
                   });
  write_file(fs::path(config.out_dir) / "plateau_table.csv",
             sweep_table_csv(rows, provenance(config, command), is_mu2));
  return rows;
}

}  // namespace

std::vector<SweepRow> cmd_sweep_mu1(const ExperimentConfig& config) {
  return run_sweep(config, false, "sweep-mu1");
}

std::vector<SweepRow> cmd_sweep_mu2(const ExperimentConfig& config) {
  return run_sweep(config, true, "sweep-mu2");
}

DatasetReport cmd_analyze_dataset(const ExperimentConfig& config,
                                  const std::string& csv_path) {
  Eigen::MatrixXd data = read_csv_matrix(csv_path);
  if (config.data_scale != 1.0) data *= config.data_scale;
  const EmpiricalSpectrum emp = empirical_spectrum_from_data(
      data, config.max_distinct, config.center_data);

  DatasetReport report;
  report.rows = data.rows();
  report.cols = data.cols();
  report.moments = emp.moments;
  report.eigenvalues = emp.eigenvalues;
  report.spectrum_literal = emp.spectrum.to_literal();
  if (emp.moments.at(1) <= 0.0)
    report.warnings.push_back(
        "degenerate data: covariance is identically zero");

  nlohmann::json j;
  j["version"] = kVersion;
  j["path"] = csv_path;
  j["rows"] = report.rows;
  j["cols"] = report.cols;
  j["scale"] = config.data_scale;
  j["centered"] = config.center_data;
  for (size_t m = 1; m < emp.moments.size(); ++m)
    j["mu" + std::to_string(m)] = emp.moments[m];
  j["eigenvalues"] = {{"count", emp.eigenvalues.size()},
                      {"min", emp.eigenvalues.front()},
                      {"max", emp.eigenvalues.back()}};
  nlohmann::json hist = nlohmann::json::array();
  {
    const double lo = emp.eigenvalues.front();
    const double hi = emp.eigenvalues.back();
    const int bins = 8;
    std::vector<int> counts(bins, 0);
    for (double ev : emp.eigenvalues) {
      int b = hi > lo ? static_cast<int>((ev - lo) / (hi - lo) * bins) : 0;
      ++counts[static_cast<size_t>(std::clamp(b, 0, bins - 1))];
    }
    for (int b = 0; b < bins; ++b)
      hist.push_back({{"lo", lo + (hi - lo) * b / bins},
                      {"hi", lo + (hi - lo) * (b + 1) / bins},
                      {"count", counts[static_cast<size_t>(b)]}});
  }
  j["histogram"] = std::move(hist);
  j["spectrum"] = report.spectrum_literal;
  j["warnings"] = report.warnings;
  report.json = j.dump(2);
  write_file(fs::path(config.out_dir) / "moments_report.json", report.json);
  return report;
}

int cmd_gauss_check(const ExperimentConfig& config, std::ostream& out,
                    std::vector<GaussCheckRow>* rows_out) {
  // Wishart-style PSD draws: C = A A^T / n with A entries i.i.d. N(0,1),
  // so diagonals are O(1) like genuine order-parameter covariances.
  const auto random_cov = [](int n, std::uint64_t seed) {
    NormalSampler rng(seed);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng();
    Eigen::MatrixXd c = a * a.transpose() / static_cast<double>(n);
    return GaussianCov(((c + c.transpose()) * 0.5).eval());
  };

  struct Spec {
    Kernel kind;
    const char* name;
    int order;
  };
  const Spec kernels_to_check[] = {
      {Kernel::I2, "I2", 2}, {Kernel::I3, "I3", 3}, {Kernel::I4, "I4", 4}};

  int failures = 0;
  out << "kernel  matrices  samples   max|closed-mc|/se\n";
  for (const auto& spec : kernels_to_check) {
    double worst = 0.0;
    int kernel_failures = 0;
    std::vector<double> ratios(static_cast<size_t>(config.mc_matrices));
    run_parallel(config.jobs, config.mc_matrices, [&](int m) {
      const std::uint64_t seed =
          derive_seed(config.seeds.at(0), spec.name, static_cast<std::uint64_t>(m));
      const GaussianCov cov = random_cov(spec.order, seed);
      const double closed = spec.kind == Kernel::I2   ? i2(cov)
                            : spec.kind == Kernel::I3 ? i3(cov)
                                                      : i4(cov);
      const McEstimate mc =
          mc_expectation(spec.kind, cov, config.mc_samples,
                         derive_seed(seed, "mc"));
      ratios[static_cast<size_t>(m)] =
          std::abs(closed - mc.estimate) / mc.standard_error;
    });
    for (double r : ratios) {
      worst = std::max(worst, r);
      if (r > 4.0) ++kernel_failures;
    }
    failures += kernel_failures;
    if (rows_out) rows_out->push_back({spec.name, worst, kernel_failures});
    char line[128];
    std::snprintf(line, sizeof(line), "%-7s %8d %8lld   %.3f%s\n", spec.name,
                  config.mc_matrices,
                  static_cast<long long>(config.mc_samples), worst,
                  kernel_failures ? "  FAIL" : "");
    out << line;
  }

  // Exact spot value: I2 of the all-ones matrix is 1/3.
  const double one_third =
      i2(GaussianCov(Eigen::MatrixXd::Ones(2, 2)));
  const bool exact_ok = std::abs(one_third - 1.0 / 3.0) <= 1e-12;
  if (!exact_ok) ++failures;
  out << "I2([[1,1],[1,1]]) = " << one_third << (exact_ok ? " (ok)" : " FAIL")
      << "\n";
  return failures;
}

}  // namespace pdyn
