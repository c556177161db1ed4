#include "pdyn/gauss.hpp"

#include "pdyn/activation.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace pdyn {

namespace {

constexpr double kClampTol = 1e-12;

double clamped_asin(double arg) {
  if (arg > 1.0 || arg < -1.0) {
    if (arg > 1.0 + kClampTol || arg < -1.0 - kClampTol)
      throw SingularDenominator("arcsin argument " + std::to_string(arg) +
                                " outside [-1,1] beyond roundoff tolerance");
    arg = arg > 0 ? 1.0 : -1.0;
  }
  return std::asin(arg);
}

}  // namespace

GaussianCov::GaussianCov(Eigen::MatrixXd c) : c_(std::move(c)) {
  if (c_.rows() != c_.cols() || c_.rows() < 2 || c_.rows() > 4)
    throw NonPSD("covariance must be square of order 2..4");
  const double scale = std::max(c_.diagonal().maxCoeff(), 1.0);
  if ((c_ - c_.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
    throw NonPSD("covariance not symmetric");
  if (c_.diagonal().minCoeff() < 0.0)
    throw NonPSD("negative diagonal entry");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw NonPSD("covariance has eigenvalue " +
                 std::to_string(es.eigenvalues().minCoeff()));
}

namespace kernels {

double i2(double c11, double c12, double c22) {
  const double arg = c12 / std::sqrt((1.0 + c11) * (1.0 + c22));
  return (2.0 / std::numbers::pi) * clamped_asin(arg);
}

double i3(double c11, double c12, double c13, double c23, double c33) {
  const double lam = (1.0 + c11) * (1.0 + c33) - c13 * c13;
  if (lam <= 0.0)
    throw SingularDenominator("i3 denominator " + std::to_string(lam) +
                              " <= 0; input cannot be a valid covariance");
  return (2.0 / std::numbers::pi) * (c23 * (1.0 + c11) - c12 * c13) /
         ((1.0 + c11) * std::sqrt(lam));
}

double i4(double c11, double c12, double c13, double c14, double c22,
          double c23, double c24, double c33, double c34, double c44) {
  const double l4 = (1.0 + c11) * (1.0 + c22) - c12 * c12;
  const double l0 = l4 * c34 - c13 * c14 * (1.0 + c22) -
                    c23 * c24 * (1.0 + c11) + c12 * c13 * c24 +
                    c12 * c14 * c23;
  const double l1 = l4 * (1.0 + c33) - c13 * c13 * (1.0 + c22) -
                    c23 * c23 * (1.0 + c11) + 2.0 * c12 * c13 * c23;
  const double l2 = l4 * (1.0 + c44) - c14 * c14 * (1.0 + c22) -
                    c24 * c24 * (1.0 + c11) + 2.0 * c12 * c14 * c24;
  if (l4 <= 0.0 || l1 <= 0.0 || l2 <= 0.0)
    throw SingularDenominator("i4 determinant factor <= 0; input cannot be a "
                              "valid covariance");
  return (4.0 / (std::numbers::pi * std::numbers::pi)) *
         clamped_asin(l0 / std::sqrt(l1 * l2)) / std::sqrt(l4);
}

}  // namespace kernels

double i2(const GaussianCov& c) {
  return kernels::i2(c(0, 0), c(0, 1), c(1, 1));
}

double i3(const GaussianCov& c) {
  return kernels::i3(c(0, 0), c(0, 1), c(0, 2), c(1, 2), c(2, 2));
}

double i4(const GaussianCov& c) {
  return kernels::i4(c(0, 0), c(0, 1), c(0, 2), c(0, 3), c(1, 1), c(1, 2),
                     c(1, 3), c(2, 2), c(2, 3), c(3, 3));
}

double i3_reduced(const GaussianCov& c) {
  const double c11 = c(0, 0), c12 = c(0, 1), c13 = c(0, 2), c23 = c(1, 2),
               c33 = c(2, 2);
  const double det = c11 * c33 - c13 * c13;
  if (det <= 1e-12)
    throw CollinearZ1Z3("z1 and z3 are (near-)collinear: C11*C33 - C13^2 = " +
                        std::to_string(det));
  // z2 = a*z1 + b*z3 + orthogonal remainder; the remainder integrates to 0.
  const double a = (c12 * c33 - c13 * c23) / det;
  const double b = (c11 * c23 - c12 * c13) / det;
  const double i3_z1 = kernels::i3(c11, c11, c13, c13, c33);  // <g'(z1) z1 g(z3)>
  const double i3_z3 = kernels::i3(c11, c13, c13, c33, c33);  // <g'(z1) z3 g(z3)>
  return a * i3_z1 + b * i3_z3;
}

McEstimate mc_expectation(Kernel kind, const GaussianCov& c,
                          std::int64_t samples, std::uint64_t seed) {
  if (samples < 10'000)
    throw std::invalid_argument("mc_expectation needs >= 1e4 samples");
  const int n = c.order();
  const int need = kind == Kernel::I2 ? 2 : kind == Kernel::I3 ? 3 : 4;
  if (n != need) throw NonPSD("covariance order does not match kernel");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.matrix());
  if (es.eigenvalues().minCoeff() <
      -1e-10 * std::max(c.matrix().diagonal().maxCoeff(), 1.0))
    throw NonPSD("matrix square root failed: negative eigenvalue");
  Eigen::MatrixXd root =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      es.eigenvectors().transpose();

  const auto eval = [&](const Eigen::Vector4d& z) {
    switch (kind) {
      case Kernel::I2:
        return activation(z[0]) * activation(z[1]);
      case Kernel::I3:
        return activation_prime(z[0]) * z[1] * activation(z[2]);
      default:
        return activation_prime(z[0]) * activation_prime(z[1]) *
               activation(z[2]) * activation(z[3]);
    }
  };

  NormalSampler rng(seed);
  double sum = 0.0, sumsq = 0.0;
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
  Eigen::Vector4d z = Eigen::Vector4d::Zero();
  for (std::int64_t k = 0; k < samples; ++k) {
    for (int j = 0; j < n; ++j) u[j] = rng();
    z.head(n).noalias() = root * u.head(n);
    // antithetic pair: integrands are even under z -> -z
    const double v = 0.5 * (eval(z) + eval(-z));
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / static_cast<double>(samples);
  const double var =
      std::max(0.0, (sumsq / static_cast<double>(samples) - mean * mean)) *
      static_cast<double>(samples) / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples))};
}

}  // namespace pdyn
