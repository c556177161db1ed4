#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace pdyn {

// Validated symmetric positive-semidefinite covariance of a small Gaussian
// vector (order 2, 3 or 4), the argument of the expectation kernels below.
class GaussianCov {
 public:
  // Throws NonPSD when the matrix is asymmetric beyond roundoff, has a
  // negative diagonal entry, or an eigenvalue below -1e-10 (relative to the
  // largest diagonal entry; anything above that is treated as 0).
  explicit GaussianCov(Eigen::MatrixXd c);

  int order() const { return static_cast<int>(c_.rows()); }
  double operator()(int a, int b) const { return c_(a, b); }
  const Eigen::MatrixXd& matrix() const { return c_; }

 private:
  Eigen::MatrixXd c_;
};

// Gaussian expectations of erf-based factors, z ~ N(0, C) with
// g(x) = erf(x/sqrt(2)):
//
//   i2 = <g(z1) g(z2)>
//   i3 = <g'(z1) z2 g(z3)>
//   i4 = <g'(z1) g'(z2) g(z3) g(z4)>
//
// All denominators are determinants of I + (principal submatrix of C), so
// they are >= 1 for any PSD input; arcsin arguments are clamped against
// roundoff within 1e-12 and anything larger throws.
double i2(const GaussianCov& c);
double i3(const GaussianCov& c);
double i4(const GaussianCov& c);

// i3 evaluated through the two degenerate kernels <g'(z1) z1 g(z3)> and
// <g'(z1) z3 g(z3)> after projecting z2 onto span(z1, z3). Identical to i3
// for every valid input; the projection is what makes C22 irrelevant.
// Throws CollinearZ1Z3 when C11*C33 - C13^2 <= 1e-12 (use i3 directly then).
double i3_reduced(const GaussianCov& c);

enum class Kernel { I2, I3, I4 };

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo ground truth for the closed forms: plain sampling of
// z ~ N(0, C) through the symmetric matrix square root, with antithetic
// pairing (z, -z) — every integrand above is even under a global sign flip.
// `samples` counts independent base draws (>= 1e4). Deterministic per seed.
McEstimate mc_expectation(Kernel kind, const GaussianCov& c,
                          std::int64_t samples, std::uint64_t seed);

// Unvalidated closed forms for inner loops. Callers guarantee the entries
// come from a feasible covariance; the public overloads above validate.
namespace kernels {

double i2(double c11, double c12, double c22);
// c22 does not appear: the closed form never reads it.
double i3(double c11, double c12, double c13, double c23, double c33);
double i4(double c11, double c12, double c13, double c14, double c22,
          double c23, double c24, double c33, double c34, double c44);

}  // namespace kernels

}  // namespace pdyn
