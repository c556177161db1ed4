#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pdyn {

struct SpectrumEntry {
  double eigenvalue = 0.0;
  double fraction = 0.0;  // multiplicity fraction r_i, so that count = r_i * N

  bool operator==(const SpectrumEntry&) const = default;
};

// Eigenvalue distribution of the input covariance. This is the only carrier
// of input statistics: the macroscopic dynamics depend on the covariance
// matrix solely through its spectrum, so a full N x N matrix never appears.
//
// Canonical form: entries sorted by eigenvalue, strictly increasing,
// fractions summing to 1. Construction merges near-degenerate eigenvalues
// (within 1e-8 * max eigenvalue, fraction-weighted mean) because the
// characteristic-polynomial reduction is ill-conditioned for close roots.
class EigenSpectrum {
 public:
  // Unit spectrum (identity covariance). Mainly for containers; prefer the
  // explicit constructors.
  EigenSpectrum() : entries_{{1.0, 1.0}} {}

  // Throws NonUnitFractions if |sum r - 1| > 1e-9, NegativeEigenvalue for
  // negative or non-finite eigenvalues.
  explicit EigenSpectrum(std::vector<SpectrumEntry> entries);
  static EigenSpectrum from_pairs(const std::vector<std::pair<double, double>>& pairs);

  // Literal syntax used by config files and CLI flags: "0.4:0.5,1.2:0.3,1.6:0.2"
  static EigenSpectrum parse(std::string_view literal);
  std::string to_literal() const;

  int distinct_count() const { return static_cast<int>(entries_.size()); }
  const std::vector<SpectrumEntry>& entries() const { return entries_; }

  // mu_e = sum_i r_i lambda_i^e; mu_0 is exactly 1.
  double moment(int order) const;
  std::vector<double> moments(int max_order) const;

  // Coefficients c_0..c_{d-1} of the monic polynomial with the distinct
  // eigenvalues as roots (leading c_d = 1 omitted). Because that polynomial
  // annihilates the covariance, order-d overlap matrices reduce to
  // Omega^(d) = -sum_{e<d} c_e Omega^(e).
  std::vector<double> reduction_coefficients() const;

  // Concrete diagonal covariance at dimension n: each eigenvalue repeated
  // round(r_i * n) times, rounded by largest remainder (ties toward the
  // smaller eigenvalue) so the counts sum to exactly n. Ascending order.
  // Throws TooSmallN if any multiplicity would round to zero.
  std::vector<double> realize_covariance(int n) const;

  bool operator==(const EigenSpectrum&) const = default;

 private:
  std::vector<SpectrumEntry> entries_;
};

struct EmpiricalSpectrum {
  std::vector<double> moments;      // mu_0..mu_max, from the full eigenvalue list
  std::vector<double> eigenvalues;  // ascending, tiny negatives clipped to 0
  EigenSpectrum spectrum;           // compressed to at most max_distinct entries
};

// Spectrum of the second-moment matrix (1/n) X^T X of a data matrix
// (rows = samples). `center` subtracts the column means first, giving the
// covariance proper; the default keeps raw second moments, which is what the
// mean-square input norm mu_1 of a real dataset refers to. Compression bins
// eigenvalues by value and replaces each bin with its mean, preserving mu_1
// exactly. Throws DegenerateData for fewer than 2 rows.
EmpiricalSpectrum empirical_spectrum_from_data(const Eigen::MatrixXd& rows,
                                               int max_distinct,
                                               bool center = false,
                                               int max_moment = 4);

}  // namespace pdyn
