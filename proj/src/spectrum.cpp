#include "pdyn/spectrum.hpp"

#include "pdyn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pdyn {

namespace {

constexpr double kFractionTol = 1e-9;
constexpr double kMergeRel = 1e-8;

std::string format_double(double v) {
  char buf[32];
  int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<size_t>(n));
}

}  // namespace

EigenSpectrum::EigenSpectrum(std::vector<SpectrumEntry> entries) {
  if (entries.empty()) throw NonUnitFractions("spectrum needs at least one entry");
  double sum = 0.0;
  double max_ev = 0.0;
  for (const auto& e : entries) {
    if (!std::isfinite(e.eigenvalue) || e.eigenvalue < 0.0)
      throw NegativeEigenvalue("eigenvalue must be finite and >= 0, got " +
                               format_double(e.eigenvalue));
    if (!std::isfinite(e.fraction) || e.fraction <= 0.0)
      throw NonUnitFractions("fractions must be positive, got " +
                             format_double(e.fraction));
    sum += e.fraction;
    max_ev = std::max(max_ev, e.eigenvalue);
  }
  if (std::abs(sum - 1.0) > kFractionTol)
    throw NonUnitFractions("fractions sum to " + format_double(sum) +
                           ", expected 1 within 1e-9");

  std::sort(entries.begin(), entries.end(),
            [](const SpectrumEntry& a, const SpectrumEntry& b) {
              return a.eigenvalue < b.eigenvalue;
            });

  // Merge duplicates and near-degenerate eigenvalues (fraction-weighted mean
  // keeps mu_1 exact). Close roots would make the polynomial reduction
  // ill-conditioned.
  const double merge_tol = kMergeRel * std::max(max_ev, 1e-300);
  for (const auto& e : entries) {
    if (!entries_.empty() &&
        e.eigenvalue - entries_.back().eigenvalue < merge_tol) {
      auto& back = entries_.back();
      const double f = back.fraction + e.fraction;
      back.eigenvalue =
          (back.eigenvalue * back.fraction + e.eigenvalue * e.fraction) / f;
      back.fraction = f;
    } else {
      entries_.push_back(e);
    }
  }
  for (auto& e : entries_) e.fraction /= sum;
}

EigenSpectrum EigenSpectrum::from_pairs(
    const std::vector<std::pair<double, double>>& pairs) {
  std::vector<SpectrumEntry> entries;
  entries.reserve(pairs.size());
  for (const auto& [ev, fr] : pairs) entries.push_back({ev, fr});
  return EigenSpectrum(std::move(entries));
}

EigenSpectrum EigenSpectrum::parse(std::string_view literal) {
  std::vector<SpectrumEntry> entries;
  size_t pos = 0;
  while (pos <= literal.size()) {
    size_t comma = literal.find(',', pos);
    if (comma == std::string_view::npos) comma = literal.size();
    std::string_view item = literal.substr(pos, comma - pos);
    size_t colon = item.find(':');
    if (colon == std::string_view::npos)
      throw std::invalid_argument(
          "spectrum literal item '" + std::string(item) +
          "' is not of the form eigenvalue:fraction");
    auto to_double = [&](std::string_view s) {
      // std::from_chars for double is incomplete on some libstdc++ versions;
      // strtod on a trimmed copy is portable enough here.
      std::string tmp(s);
      char* end = nullptr;
      double v = std::strtod(tmp.c_str(), &end);
      while (end && *end == ' ') ++end;
      if (!end || *end != '\0')
        throw std::invalid_argument("cannot parse number '" + tmp +
                                    "' in spectrum literal");
      return v;
    };
    entries.push_back({to_double(item.substr(0, colon)),
                       to_double(item.substr(colon + 1))});
    pos = comma + 1;
    if (comma == literal.size()) break;
  }
  return EigenSpectrum(std::move(entries));
}

std::string EigenSpectrum::to_literal() const {
  std::string out;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += ',';
    out += format_double(entries_[i].eigenvalue);
    out += ':';
    out += format_double(entries_[i].fraction);
  }
  return out;
}

double EigenSpectrum::moment(int order) const {
  if (order < 0) throw IndexOutOfRange("moment order must be >= 0");
  if (order == 0) return 1.0;
  double mu = 0.0;
  for (const auto& e : entries_) mu += e.fraction * std::pow(e.eigenvalue, order);
  return mu;
}

std::vector<double> EigenSpectrum::moments(int max_order) const {
  std::vector<double> mu(static_cast<size_t>(max_order) + 1, 0.0);
  mu[0] = 1.0;
  // incremental powers: cheaper and more accurate than pow per order
  std::vector<double> p(entries_.size(), 1.0);
  for (int e = 1; e <= max_order; ++e) {
    double sum = 0.0;
    for (size_t i = 0; i < entries_.size(); ++i) {
      p[i] *= entries_[i].eigenvalue;
      sum += entries_[i].fraction * p[i];
    }
    mu[static_cast<size_t>(e)] = sum;
  }
  return mu;
}

std::vector<double> EigenSpectrum::reduction_coefficients() const {
  // Expand prod_i (x - lambda_i) by repeated convolution.
  std::vector<double> poly{1.0};
  for (const auto& e : entries_) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (size_t k = 0; k < poly.size(); ++k) {
      next[k + 1] += poly[k];
      next[k] -= e.eigenvalue * poly[k];
    }
    poly = std::move(next);
  }
  poly.pop_back();  // drop the leading 1
  return poly;
}

std::vector<double> EigenSpectrum::realize_covariance(int n) const {
  const int d = distinct_count();
  if (n < d)
    throw TooSmallN("dimension " + std::to_string(n) + " below " +
                    std::to_string(d) + " distinct eigenvalues");
  std::vector<int> counts(entries_.size());
  std::vector<double> remainders(entries_.size());
  int assigned = 0;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const double target = entries_[i].fraction * n;
    counts[i] = static_cast<int>(std::floor(target));
    remainders[i] = target - counts[i];
    assigned += counts[i];
  }
  // Largest remainder; ties go to the smaller eigenvalue. Entries are sorted
  // ascending, so a stable sort on remainder keeps that tie order.
  std::vector<size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return remainders[a] > remainders[b];
  });
  for (int k = 0; k < n - assigned; ++k) ++counts[order[static_cast<size_t>(k)]];

  std::vector<double> diag;
  diag.reserve(static_cast<size_t>(n));
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (counts[i] == 0)
      throw TooSmallN("multiplicity of eigenvalue " +
                      format_double(entries_[i].eigenvalue) +
                      " rounds to zero at N=" + std::to_string(n));
    diag.insert(diag.end(), static_cast<size_t>(counts[i]),
                entries_[i].eigenvalue);
  }
  return diag;
}

EmpiricalSpectrum empirical_spectrum_from_data(const Eigen::MatrixXd& rows,
                                               int max_distinct,
                                               bool center, int max_moment) {
  if (rows.rows() < 2) throw DegenerateData("need at least 2 data rows");
  if (max_distinct < 1) throw std::invalid_argument("max_distinct must be >= 1");

  const auto n = static_cast<double>(rows.rows());
  Eigen::MatrixXd second;
  if (center) {
    Eigen::RowVectorXd mean = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - mean;
    second.noalias() = centered.transpose() * centered / n;
  } else {
    second.noalias() = rows.transpose() * rows / n;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] < 0.0) ev[i] = 0.0;  // roundoff from the solver

  EmpiricalSpectrum out;
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());

  out.moments.assign(static_cast<size_t>(max_moment) + 1, 0.0);
  out.moments[0] = 1.0;
  const double dim = static_cast<double>(ev.size());
  for (int m = 1; m <= max_moment; ++m)
    out.moments[static_cast<size_t>(m)] =
        ev.array().pow(m).sum() / dim;

  // Compress to at most max_distinct entries: equal-width bins over the
  // eigenvalue range, each replaced by (mean value, count fraction). Bin
  // means keep mu_1 exact.
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  std::vector<SpectrumEntry> entries;
  if (hi - lo <= kMergeRel * std::max(std::abs(hi), 1.0)) {
    entries.push_back({std::max(ev.mean(), 0.0), 1.0});
  } else {
    const int bins = max_distinct;
    std::vector<double> sums(static_cast<size_t>(bins), 0.0);
    std::vector<int> counts(static_cast<size_t>(bins), 0);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      int b = static_cast<int>((ev[i] - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      sums[static_cast<size_t>(b)] += ev[i];
      ++counts[static_cast<size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
      if (counts[static_cast<size_t>(b)] == 0) continue;
      entries.push_back({sums[static_cast<size_t>(b)] / counts[static_cast<size_t>(b)],
                         counts[static_cast<size_t>(b)] / dim});
    }
  }
  out.spectrum = EigenSpectrum(std::move(entries));
  return out;
}

}  // namespace pdyn
