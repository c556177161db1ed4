#include "pdyn/trajectory.hpp"

#include "pdyn/errors.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

namespace pdyn {

namespace {

// Shortest representation that parses back to the same double; keeps
// re-serialized files byte-identical and locale-independent.
void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void append_state_header(std::string& out, const OrderParameterState& s) {
  auto col = [&](const char* base, int a, int b, int e) {
    out += ',';
    out += base;
    out += static_cast<char>('0' + a);
    out += static_cast<char>('0' + b);
    if (e > 0) {
      out += '_';
      out += std::to_string(e);
    }
  };
  const int d = s.d();
  for (int e = 0; e < d; ++e)
    for (int i = 0; i < s.K; ++i)
      for (int j = i; j < s.K; ++j) col("Q", i, j, e);
  for (int e = 0; e < d; ++e)
    for (int i = 0; i < s.K; ++i)
      for (int n = 0; n < s.M; ++n) col("R", i, n, e);
  for (int i = 0; i < s.K; ++i)
    for (int j = i; j < s.K; ++j) col("D", i, j, 0);
  for (int i = 0; i < s.K; ++i)
    for (int n = 0; n < s.M; ++n) col("E", i, n, 0);
}

void append_state_row(std::string& out, const OrderParameterState& s) {
  auto put = [&](double v) {
    out += ',';
    append_double(out, v);
  };
  const int d = s.d();
  for (int e = 0; e < d; ++e)
    for (int i = 0; i < s.K; ++i)
      for (int j = i; j < s.K; ++j) put(s.Q[static_cast<size_t>(e)](i, j));
  for (int e = 0; e < d; ++e)
    for (int i = 0; i < s.K; ++i)
      for (int n = 0; n < s.M; ++n) put(s.R[static_cast<size_t>(e)](i, n));
  for (int i = 0; i < s.K; ++i)
    for (int j = i; j < s.K; ++j) put(s.D(i, j));
  for (int i = 0; i < s.K; ++i)
    for (int n = 0; n < s.M; ++n) put(s.E(i, n));
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::vector<std::string>& comments) {
  std::string buf;
  for (const auto& c : comments) {
    buf += "# ";
    buf += c;
    buf += '\n';
  }
  buf += "alpha,eps_g";
  const bool with_state =
      !traj.points.empty() && traj.points.front().state.has_value();
  if (with_state) append_state_header(buf, *traj.points.front().state);
  buf += '\n';
  for (const auto& p : traj.points) {
    append_double(buf, p.alpha);
    buf += ',';
    append_double(buf, p.eps_g);
    if (with_state) {
      if (!p.state.has_value())
        throw std::invalid_argument(
            "trajectory mixes points with and without state snapshots");
      append_state_row(buf, *p.state);
    }
    buf += '\n';
  }
  out << buf;
}

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  long long lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("alpha,eps_g", 0) != 0)
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": expected header starting with "
                                    "'alpha,eps_g'");
      header_seen = true;
      continue;
    }
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    double vals[2];
    for (int k = 0; k < 2; ++k) {
      auto res = std::from_chars(ptr, end, vals[k]);
      if (res.ec != std::errc{})
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": cannot parse number");
      ptr = res.ptr;
      if (k == 0) {
        if (ptr == end || *ptr != ',')
          throw std::invalid_argument("line " + std::to_string(lineno) +
                                      ": expected comma after alpha");
        ++ptr;
      }
    }
    traj.points.push_back({vals[0], vals[1], std::nullopt});
  }
  if (!header_seen)
    throw std::invalid_argument("no header row found in trajectory CSV");
  return traj;
}

}  // namespace pdyn
