#include "pdyn/errors.hpp"
#include "pdyn/rng.hpp"
#include "pdyn/spectrum.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace pdyn;

TEST_CASE("construction canonicalizes and validates") {
  const EigenSpectrum identity = EigenSpectrum::from_pairs({{1.0, 1.0}});
  CHECK(identity.distinct_count() == 1);
  CHECK(identity.entries()[0].eigenvalue == 1.0);

  const EigenSpectrum fig3 =
      EigenSpectrum::from_pairs({{1.6, 0.2}, {0.4, 0.5}, {1.2, 0.3}});
  CHECK(fig3.distinct_count() == 3);
  CHECK(fig3.entries()[0].eigenvalue == doctest::Approx(0.4));
  CHECK(fig3.entries()[2].eigenvalue == doctest::Approx(1.6));

  const EigenSpectrum merged =
      EigenSpectrum::from_pairs({{0.5, 0.5}, {0.5, 0.5}});
  CHECK(merged.distinct_count() == 1);
  CHECK(merged.entries()[0].eigenvalue == doctest::Approx(0.5));
  CHECK(merged.entries()[0].fraction == doctest::Approx(1.0));

  CHECK_THROWS_AS(EigenSpectrum::from_pairs({{1.0, 0.7}}), NonUnitFractions);
  CHECK_THROWS_AS(EigenSpectrum::from_pairs({{-0.1, 1.0}}),
                  NegativeEigenvalue);
  CHECK_THROWS_AS(EigenSpectrum::from_pairs({{1.0, -0.2}, {2.0, 1.2}}),
                  NonUnitFractions);

  // slightly-off fractions are renormalized, not rejected
  const EigenSpectrum renorm =
      EigenSpectrum::from_pairs({{1.0, 0.5 + 2e-10}, {2.0, 0.5}});
  const double total = renorm.entries()[0].fraction + renorm.entries()[1].fraction;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("literal syntax round trip") {
  const EigenSpectrum s = EigenSpectrum::parse("0.4:0.5,1.2:0.3,1.6:0.2");
  CHECK(s.distinct_count() == 3);
  CHECK(EigenSpectrum::parse(s.to_literal()) == s);
  CHECK_THROWS_AS(EigenSpectrum::parse("0.4;0.5"), std::invalid_argument);
  CHECK_THROWS_AS(EigenSpectrum::parse("a:b"), std::invalid_argument);
}

TEST_CASE("moments") {
  const EigenSpectrum fig3 =
      EigenSpectrum::from_pairs({{0.4, 0.5}, {1.2, 0.3}, {1.6, 0.2}});
  CHECK(fig3.moment(0) == 1.0);
  CHECK(fig3.moment(1) == doctest::Approx(0.88).epsilon(1e-12));

  const EigenSpectrum two = EigenSpectrum::from_pairs({{0.3, 0.5}, {1.7, 0.5}});
  CHECK(two.moment(2) == doctest::Approx(1.49).epsilon(1e-12));

  const auto mu = fig3.moments(3);
  CHECK(mu.size() == 4);
  CHECK(mu[0] == 1.0);
  CHECK(mu[1] == doctest::Approx(0.88));
  CHECK(mu[3] == doctest::Approx(fig3.moment(3)));
}

TEST_CASE("reduction coefficients") {
  const auto single = EigenSpectrum::from_pairs({{0.7, 1.0}}).reduction_coefficients();
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(-0.7));

  const auto pair =
      EigenSpectrum::from_pairs({{0.5, 0.5}, {1.5, 0.5}}).reduction_coefficients();
  REQUIRE(pair.size() == 2);
  CHECK(pair[0] == doctest::Approx(0.75));   // l1*l2
  CHECK(pair[1] == doctest::Approx(-2.0));   // -(l1+l2)

  const auto cubic =
      EigenSpectrum::from_pairs({{1.0, 0.4}, {2.0, 0.3}, {3.0, 0.3}})
          .reduction_coefficients();
  REQUIRE(cubic.size() == 3);
  CHECK(cubic[0] == doctest::Approx(-6.0));
  CHECK(cubic[1] == doctest::Approx(11.0));
  CHECK(cubic[2] == doctest::Approx(-6.0));
}

TEST_CASE("reduction annihilates every eigenvalue") {
  NormalSampler rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 4;
    std::vector<std::pair<double, double>> pairs;
    double left = 1.0;
    for (int i = 0; i < d; ++i) {
      const double frac = i + 1 == d ? left : left * 0.5;
      pairs.emplace_back(0.1 + std::abs(rng()) * 2.0, frac);
      left -= frac;
    }
    EigenSpectrum spec = EigenSpectrum::from_pairs(pairs);
    const auto c = spec.reduction_coefficients();
    double max_coeff = 1.0;
    for (double v : c) max_coeff = std::max(max_coeff, std::abs(v));
    for (const auto& entry : spec.entries()) {
      double acc = std::pow(entry.eigenvalue, spec.distinct_count());
      for (int e = 0; e < spec.distinct_count(); ++e)
        acc += c[static_cast<size_t>(e)] * std::pow(entry.eigenvalue, e);
      CHECK(std::abs(acc) <= 1e-9 * max_coeff);
    }
  }
}

TEST_CASE("realize_covariance") {
  const auto identity = EigenSpectrum::from_pairs({{1.0, 1.0}}).realize_covariance(4);
  CHECK(identity == std::vector<double>{1, 1, 1, 1});

  const auto fig3 =
      EigenSpectrum::from_pairs({{0.4, 0.5}, {1.2, 0.3}, {1.6, 0.2}})
          .realize_covariance(10);
  CHECK(std::count(fig3.begin(), fig3.end(), 0.4) == 5);
  CHECK(std::count(fig3.begin(), fig3.end(), 1.2) == 3);
  CHECK(std::count(fig3.begin(), fig3.end(), 1.6) == 2);
  CHECK(std::is_sorted(fig3.begin(), fig3.end()));

  // remainder tie: both entries want 2.5 slots; the smaller eigenvalue wins
  const auto tie =
      EigenSpectrum::from_pairs({{0.3, 0.5}, {1.7, 0.5}}).realize_covariance(5);
  CHECK(std::count(tie.begin(), tie.end(), 0.3) == 3);
  CHECK(std::count(tie.begin(), tie.end(), 1.7) == 2);

  CHECK_THROWS_AS(
      EigenSpectrum::from_pairs({{1.0, 0.999}, {2.0, 0.001}}).realize_covariance(10),
      TooSmallN);
  CHECK_THROWS_AS(EigenSpectrum::from_pairs({{1.0, 0.5}, {2.0, 0.5}})
                      .realize_covariance(1),
                  TooSmallN);
}

TEST_CASE("realized multiplicities always sum to N and match moments") {
  NormalSampler rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<double, double>> pairs;
    const int d = 1 + trial % 3;
    double left = 1.0;
    for (int i = 0; i < d; ++i) {
      const double frac = i + 1 == d ? left : left * (0.3 + 0.1 * (trial % 4));
      pairs.emplace_back(0.2 + i + 0.01 * trial, frac);
      left -= frac;
    }
    EigenSpectrum spec = EigenSpectrum::from_pairs(pairs);
    const int n = 16 + 7 * trial;
    const auto diag = spec.realize_covariance(n);
    CHECK(static_cast<int>(diag.size()) == n);

    // moment consistency is exact whenever every r_i * n is an integer
    bool integral = true;
    for (const auto& e : spec.entries()) {
      const double c = e.fraction * n;
      if (std::abs(c - std::round(c)) > 1e-9) integral = false;
    }
    if (integral) {
      for (int order = 0; order <= 3; ++order) {
        double mean = 0;
        for (double v : diag) mean += std::pow(v, order);
        mean /= n;
        CHECK(mean == doctest::Approx(spec.moment(order)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("empirical spectrum from data") {
  SUBCASE("identical rows give zero covariance when centered") {
    Eigen::MatrixXd rows(5, 3);
    rows.setOnes();
    const auto emp = empirical_spectrum_from_data(rows, 4, /*center=*/true);
    CHECK(emp.moments[1] == doctest::Approx(0.0).epsilon(1e-12));
    for (double ev : emp.eigenvalues) CHECK(ev == doctest::Approx(0.0));
  }

  SUBCASE("fewer than two rows is degenerate") {
    Eigen::MatrixXd rows(1, 3);
    rows.setZero();
    CHECK_THROWS_AS(empirical_spectrum_from_data(rows, 4), DegenerateData);
  }

  SUBCASE("recovers mu1 of a known diagonal covariance within 3 SE") {
    const int n = 6, samples = 4000;
    const Eigen::VectorXd lambda =
        (Eigen::VectorXd(n) << 0.2, 0.5, 0.9, 1.3, 1.8, 2.3).finished();
    NormalSampler rng(2024);
    Eigen::MatrixXd rows(samples, n);
    for (int i = 0; i < samples; ++i)
      for (int j = 0; j < n; ++j) rows(i, j) = std::sqrt(lambda[j]) * rng();
    const auto emp = empirical_spectrum_from_data(rows, 4);
    const double mu1_true = lambda.mean();
    // Var[mu1_hat] = sum 2 lambda_j^2 / samples / n^2
    const double se =
        std::sqrt(2.0 * lambda.array().square().sum() / samples) / n;
    CHECK(std::abs(emp.moments[1] - mu1_true) <= 3 * se);
    // compression preserves mu1 exactly
    CHECK(emp.spectrum.moment(1) ==
          doctest::Approx(emp.moments[1]).epsilon(1e-12));
    CHECK(emp.spectrum.distinct_count() <= 4);
  }
}
