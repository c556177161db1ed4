#pragma once

#include "pdyn/trajectory.hpp"

#include <string>
#include <utility>
#include <vector>

namespace pdyn {

struct SlopePoint {
  double alpha = 0.0;
  double slope = 0.0;  // d ln(eps_g) / d alpha, windowed least squares
};

// Centered least-squares slope of ln(eps_g) against alpha over a sliding
// window; endpoints use truncated windows. Requires an odd window with
// 3 <= window <= points/4 and at least 16 strictly increasing, positive
// points (TooShort otherwise).
std::vector<SlopePoint> log_loss_slope(const Trajectory& traj, int window);

struct PlateauParams {
  int window = 31;                // slope-smoothing window (records)
  double terminal_fraction = 0.1; // tail share defining the terminal speed
  int min_points = 8;             // shortest admissible plateau run
};

struct PlateauReport {
  bool found = false;
  double start_alpha = 0.0;
  double end_alpha = 0.0;
  double length = 0.0;          // end_alpha - start_alpha
  double height = 0.0;          // median eps_g over the plateau interval
  double terminal_speed = 0.0;  // median |slope| over the terminal window
  std::string diagnostic;       // set when found is false
  // every qualifying run (start, end), longest first entry wins the report
  std::vector<std::pair<double, double>> runs;
  PlateauParams params;
};

// A record plateaus when its |log-loss slope| is below half the terminal
// converging speed. The report covers the longest contiguous run of at
// least min_points such records that lies after the initial `window`
// records and ends before the terminal window. A terminal speed below
// 1e-14 (loss not converging) yields found = false with a diagnostic.
PlateauReport detect_plateau(const Trajectory& traj,
                             const PlateauParams& params = {});

std::string report_to_json(const PlateauReport& report);

}  // namespace pdyn
