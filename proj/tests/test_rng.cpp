#include "pdyn/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace pdyn;

TEST_CASE("seed stream derivation separates labeled streams") {
  CHECK(derive_seed(1, "weights") != derive_seed(1, "inputs"));
  CHECK(derive_seed(1, "weights") != derive_seed(2, "weights"));
  CHECK(derive_seed(1, "weights") == derive_seed(1, "weights"));
  CHECK(derive_seed(1, "lane", 0) != derive_seed(1, "lane", 1));
}

TEST_CASE("normal sampler is deterministic per seed") {
  NormalSampler a(42), b(42), c(43);
  bool any_diff = false;
  for (int k = 0; k < 1000; ++k) {
    const double va = a();
    CHECK(va == b());
    if (va != c()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("ziggurat sampling matches the standard normal") {
  // one big deterministic draw feeds all the checks below
  const long n = 4'000'000;
  NormalSampler rng(20240817);
  std::vector<double> z(static_cast<size_t>(n));
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  long tail3 = 0;
  for (auto& v : z) {
    v = rng();
    m1 += v;
    m2 += v * v;
    m3 += v * v * v;
    m4 += v * v * v * v;
    if (std::abs(v) > 3.0) ++tail3;
  }
  m1 /= n; m2 /= n; m3 /= n; m4 /= n;

  // moment z-tests (4 sigma): Var[mean]=1/n, Var[m2]=2/n, Var[m3]=15/n,
  // Var[m4]=96/n for the standard normal
  CHECK(std::abs(m1) < 4.0 * std::sqrt(1.0 / n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m3) < 4.0 * std::sqrt(15.0 / n));
  CHECK(std::abs(m4 - 3.0) < 4.0 * std::sqrt(96.0 / n));

  // P(|z| > 3) = 2(1 - Phi(3)) = 0.0026998
  const double p3 = 0.002699796063;
  const double se3 = std::sqrt(p3 * (1 - p3) / n);
  CHECK(std::abs(static_cast<double>(tail3) / n - p3) < 4.0 * se3);

  // chi-square over 64 equal-width cells in [-4, 4] plus two tail cells;
  // catches any layer-level bias of the ziggurat construction
  const int cells = 64;
  std::vector<long> counts(cells + 2, 0);
  for (double v : z) {
    if (v < -4.0)
      ++counts[0];
    else if (v >= 4.0)
      ++counts[static_cast<size_t>(cells) + 1];
    else
      ++counts[static_cast<size_t>((v + 4.0) / 8.0 * cells) + 1];
  }
  auto phi = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
  double chi2 = 0.0;
  for (int c = 0; c < cells + 2; ++c) {
    const double lo = c == 0 ? -1e300 : -4.0 + 8.0 * (c - 1) / cells;
    const double hi = c == cells + 1 ? 1e300 : -4.0 + 8.0 * c / cells;
    const double expect = n * (phi(hi) - phi(lo));
    const double diff = counts[static_cast<size_t>(c)] - expect;
    chi2 += diff * diff / expect;
  }
  // 65 dof: mean 65, sd ~11.4; 120 is ~p = 2e-5
  CHECK(chi2 < 120.0);
}

TEST_CASE("xoshiro engine basics") {
  Xoshiro256pp eng(1);
  std::uint64_t x = eng();
  // uniform() stays inside (0, 1]
  for (int k = 0; k < 10000; ++k) {
    const double u = eng.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
  CHECK(x != eng());
}
