#pragma once

#include "pdyn/order_state.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pdyn {

struct TrajectoryPoint {
  double alpha = 0.0;   // normalized time: SGD steps / N
  double eps_g = 0.0;   // generalization error at this point
  std::optional<OrderParameterState> state;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;

  std::vector<double> alphas() const;
  std::vector<double> eps() const;
};

// CSV schema: '#'-prefixed provenance comments, then a header row
// `alpha,eps_g,...` followed by one row per record. Symmetric matrices emit
// the upper triangle only, row-major; higher orders get an `_e` suffix
// (Q00 is order 0, Q00_1 order 1, ...). Doubles are shortest-round-trip
// formatted, so rewriting a parsed file reproduces it byte for byte.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::vector<std::string>& comments = {});

// Reads alpha and eps_g (state columns are ignored). Comments skipped.
// Throws std::invalid_argument with a line number on malformed input.
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace pdyn
