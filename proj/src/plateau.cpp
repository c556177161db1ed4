#include "pdyn/plateau.hpp"

#include "pdyn/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace pdyn {

namespace {

void check_trajectory(const Trajectory& traj) {
  const auto& pts = traj.points;
  if (pts.size() < 16)
    throw TooShort("plateau analysis needs >= 16 records, got " +
                   std::to_string(pts.size()));
  for (size_t k = 0; k < pts.size(); ++k) {
    if (!std::isfinite(pts[k].eps_g) || pts[k].eps_g <= 0.0)
      throw TooShort("eps_g must be finite and positive at record " +
                     std::to_string(k));
    if (k > 0 && !(pts[k].alpha > pts[k - 1].alpha))
      throw TooShort("alphas must be strictly increasing at record " +
                     std::to_string(k));
  }
}

double median(std::vector<double> v) {
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<SlopePoint> log_loss_slope(const Trajectory& traj, int window) {
  check_trajectory(traj);
  const auto n = static_cast<long long>(traj.points.size());
  if (window % 2 == 0 || window < 3 || window > n / 4)
    throw TooShort("window must be odd and within [3, points/4]");

  std::vector<double> lny(static_cast<size_t>(n));
  for (long long k = 0; k < n; ++k)
    lny[static_cast<size_t>(k)] = std::log(traj.points[static_cast<size_t>(k)].eps_g);

  const long long half = window / 2;
  std::vector<SlopePoint> out(static_cast<size_t>(n));
  for (long long k = 0; k < n; ++k) {
    const long long lo = std::max(0LL, k - half);
    const long long hi = std::min(n - 1, k + half);
    double sa = 0, sy = 0;
    const auto count = static_cast<double>(hi - lo + 1);
    for (long long m = lo; m <= hi; ++m) {
      sa += traj.points[static_cast<size_t>(m)].alpha;
      sy += lny[static_cast<size_t>(m)];
    }
    const double ma = sa / count, my = sy / count;
    double saa = 0, say = 0;
    for (long long m = lo; m <= hi; ++m) {
      const double da = traj.points[static_cast<size_t>(m)].alpha - ma;
      saa += da * da;
      say += da * (lny[static_cast<size_t>(m)] - my);
    }
    out[static_cast<size_t>(k)] = {traj.points[static_cast<size_t>(k)].alpha,
                                   saa > 0 ? say / saa : 0.0};
  }
  return out;
}

PlateauReport detect_plateau(const Trajectory& traj,
                             const PlateauParams& params) {
  if (params.terminal_fraction <= 0.0 || params.terminal_fraction > 0.5)
    throw std::invalid_argument("terminal_fraction must be in (0, 0.5]");
  if (params.min_points < 1)
    throw std::invalid_argument("min_points must be >= 1");

  PlateauReport report;
  report.params = params;

  const std::vector<SlopePoint> slopes = log_loss_slope(traj, params.window);
  const auto n = static_cast<long long>(slopes.size());
  const long long tail =
      std::max(1LL, static_cast<long long>(std::ceil(params.terminal_fraction *
                                                     static_cast<double>(n))));
  std::vector<double> tail_abs;
  tail_abs.reserve(static_cast<size_t>(tail));
  for (long long k = n - tail; k < n; ++k)
    tail_abs.push_back(std::abs(slopes[static_cast<size_t>(k)].slope));
  report.terminal_speed = median(std::move(tail_abs));

  if (report.terminal_speed < 1e-14) {
    report.diagnostic =
        "terminal converging speed below 1e-14: loss is not converging, "
        "plateau detection is undefined";
    return report;
  }

  // Candidates: after the initial transient (truncated-window slope
  // artifacts), before the terminal window.
  const double threshold = 0.5 * report.terminal_speed;
  const long long first = std::min<long long>(params.window, n);
  const long long last = n - tail;  // exclusive
  long long best_start = -1, best_end = -1;
  double best_extent = -1.0;
  long long run_start = -1;
  auto close_run = [&](long long run_end) {
    if (run_start < 0) return;
    const long long count = run_end - run_start;
    if (count >= params.min_points) {
      const double a0 = slopes[static_cast<size_t>(run_start)].alpha;
      const double a1 = slopes[static_cast<size_t>(run_end - 1)].alpha;
      report.runs.emplace_back(a0, a1);
      if (a1 - a0 > best_extent) {
        best_extent = a1 - a0;
        best_start = run_start;
        best_end = run_end;
      }
    }
    run_start = -1;
  };
  for (long long k = first; k < last; ++k) {
    if (std::abs(slopes[static_cast<size_t>(k)].slope) < threshold) {
      if (run_start < 0) run_start = k;
    } else {
      close_run(k);
    }
  }
  close_run(last);

  if (best_start < 0) {
    report.diagnostic = "no contiguous run of " +
                        std::to_string(params.min_points) +
                        "+ sub-threshold records found";
    return report;
  }

  report.found = true;
  report.start_alpha = slopes[static_cast<size_t>(best_start)].alpha;
  report.end_alpha = slopes[static_cast<size_t>(best_end - 1)].alpha;
  report.length = report.end_alpha - report.start_alpha;
  std::vector<double> eps;
  eps.reserve(static_cast<size_t>(best_end - best_start));
  for (long long k = best_start; k < best_end; ++k)
    eps.push_back(traj.points[static_cast<size_t>(k)].eps_g);
  report.height = median(std::move(eps));
  return report;
}

std::string report_to_json(const PlateauReport& r) {
  nlohmann::json j;
  j["found"] = r.found;
  j["start_alpha"] = r.start_alpha;
  j["end_alpha"] = r.end_alpha;
  j["length"] = r.length;
  j["height"] = r.height;
  j["terminal_speed"] = r.terminal_speed;
  j["params"] = {{"window", r.params.window},
                 {"terminal_fraction", r.params.terminal_fraction},
                 {"min_points", r.params.min_points}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& [a, b] : r.runs) runs.push_back({a, b});
  j["runs"] = std::move(runs);
  return j.dump(2);
}

}  // namespace pdyn
