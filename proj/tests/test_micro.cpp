#include "pdyn/activation.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/macro.hpp"
#include "pdyn/micro.hpp"
#include "pdyn/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdyn;

TEST_CASE("init_weights statistics and determinism") {
  SimConfig cfg;
  cfg.N = 10000;
  cfg.K = 2;
  cfg.M = 2;

  const NetworkWeights w = init_weights(cfg, 42);
  const double mean = w.J.mean();
  const double var = w.J.array().square().mean() - mean * mean;
  const double n = static_cast<double>(cfg.N);
  // sample mean of K*N iid N(0, 1/N) entries
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(2.0 * n * n));
  CHECK(std::abs(var - 1.0 / n) <= 3.0 * std::sqrt(2.0 / (2.0 * n)) / n);

  CHECK(w.w == Eigen::VectorXd::Ones(2));  // soft committee
  CHECK(w.v == Eigen::VectorXd::Ones(2));

  const NetworkWeights w2 = init_weights(cfg, 42);
  CHECK((w.J - w2.J).cwiseAbs().maxCoeff() == 0.0);
  CHECK((w.B - w2.B).cwiseAbs().maxCoeff() == 0.0);

  cfg.soft_committee = false;
  const NetworkWeights w3 = init_weights(cfg, 42);
  CHECK(w3.w != Eigen::VectorXd::Ones(2));
}

TEST_CASE("forward pass") {
  SimConfig cfg;
  cfg.N = 4;
  cfg.K = 2;
  cfg.M = 2;
  const NetworkWeights w = init_weights(cfg, 7);

  SUBCASE("zero input gives zero outputs") {
    const ForwardPass fp = forward(w, Eigen::VectorXd::Zero(4));
    CHECK(fp.s == 0.0);
    CHECK(fp.t == 0.0);
  }
  SUBCASE("student equal to teacher reproduces it on every input") {
    NetworkWeights eq = w;
    eq.J = eq.B;
    NormalSampler rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd xi(4);
      rng.fill(xi);
      const ForwardPass fp = forward(eq, xi);
      CHECK(fp.s == doctest::Approx(fp.t).epsilon(1e-15));
    }
  }
  SUBCASE("scalar network evaluates the activation") {
    NetworkWeights one;
    one.J = Eigen::MatrixXd::Ones(1, 1);
    one.B = Eigen::MatrixXd::Ones(1, 1);
    one.w = Eigen::VectorXd::Ones(1);
    one.v = Eigen::VectorXd::Ones(1);
    const ForwardPass fp = forward(one, Eigen::VectorXd::Ones(1));
    CHECK(fp.s == doctest::Approx(0.682689492137086).epsilon(1e-12));
  }
}

TEST_CASE("sgd_step") {
  SimConfig cfg;
  cfg.N = 5;
  cfg.K = 2;
  cfg.M = 3;
  cfg.eta = 0.31;
  cfg.soft_committee = false;

  SUBCASE("zero error means zero update") {
    NetworkWeights w = init_weights(cfg, 3);
    w.J.topRows(2) = w.B.topRows(2);
    w.w = w.v.head(2);
    NetworkWeights before = w;
    // make teacher factors seen by the student identical
    SimConfig sub = cfg;
    sub.M = 3;
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(5);  // s = t = 0 trivially
    sgd_step(w, xi, sub);
    CHECK((w.J - before.J).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("update is linear in eta") {
    const NetworkWeights w0 = init_weights(cfg, 4);
    NormalSampler rng(5);
    Eigen::VectorXd xi(5);
    rng.fill(xi);

    NetworkWeights a = w0;
    sgd_step(a, xi, cfg);
    SimConfig doubled = cfg;
    doubled.eta = 2.0 * cfg.eta;
    NetworkWeights b = w0;
    sgd_step(b, xi, doubled);
    const Eigen::MatrixXd da = a.J - w0.J;
    const Eigen::MatrixXd db = b.J - w0.J;
    CHECK((db - 2.0 * da).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd dwa = a.w - w0.w;
    const Eigen::VectorXd dwb = b.w - w0.w;
    CHECK((dwb - 2.0 * dwa).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("teacher never moves") {
    NetworkWeights w = init_weights(cfg, 6);
    const Eigen::MatrixXd b0 = w.B;
    const Eigen::VectorXd v0 = w.v;
    NormalSampler rng(7);
    Eigen::VectorXd xi(5);
    for (int step = 0; step < 50; ++step) {
      rng.fill(xi);
      sgd_step(w, xi, cfg);
    }
    CHECK((w.B - b0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((w.v - v0).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("matches the finite-difference gradient of the squared loss") {
    const NetworkWeights w0 = init_weights(cfg, 8);
    NormalSampler rng(9);
    Eigen::VectorXd xi(5);
    rng.fill(xi);

    NetworkWeights stepped = w0;
    sgd_step(stepped, xi, cfg);
    const double rate = cfg.eta / cfg.N;
    const double h = 1e-6;

    auto loss = [&](const NetworkWeights& w) {
      const ForwardPass fp = forward(w, xi);
      return 0.5 * (fp.s - fp.t) * (fp.s - fp.t);
    };
    for (int i = 0; i < cfg.K; ++i)
      for (int k = 0; k < cfg.N; ++k) {
        NetworkWeights plus = w0, minus = w0;
        plus.J(i, k) += h;
        minus.J(i, k) -= h;
        const double grad = (loss(plus) - loss(minus)) / (2.0 * h);
        const double applied = stepped.J(i, k) - w0.J(i, k);
        CHECK(applied ==
              doctest::Approx(-rate * grad).epsilon(1e-5));
      }
    for (int i = 0; i < cfg.K; ++i) {
      NetworkWeights plus = w0, minus = w0;
      plus.w[i] += h;
      minus.w[i] -= h;
      const double grad = (loss(plus) - loss(minus)) / (2.0 * h);
      CHECK(stepped.w[i] - w0.w[i] ==
            doctest::Approx(-rate * grad).epsilon(1e-5));
    }
  }
}

TEST_CASE("measure_order_parameters") {
  SUBCASE("orthonormal rows under identity covariance give identity Q") {
    NetworkWeights w;
    w.J = Eigen::MatrixXd::Zero(2, 6);
    w.J(0, 0) = 1.0;
    w.J(1, 1) = 1.0;
    w.B = Eigen::MatrixXd::Zero(2, 6);
    w.B(0, 2) = 1.0;
    w.B(1, 3) = 1.0;
    w.w = w.v = Eigen::VectorXd::Ones(2);
    const EigenSpectrum unit = EigenSpectrum::from_pairs({{1.0, 1.0}});
    const OrderParameterState s = measure_order_parameters(w, unit, 0);
    CHECK((s.Q[0] - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(s.R[0].cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("scalar covariance: order 1 is sigma times order 0") {
    SimConfig cfg;
    cfg.N = 48;
    cfg.K = 2;
    cfg.M = 2;
    const NetworkWeights w = init_weights(cfg, 11);
    const EigenSpectrum spec = EigenSpectrum::from_pairs({{1.3, 1.0}});
    const OrderParameterState s = measure_order_parameters(w, spec, 1);
    CHECK((s.Q[1] - 1.3 * s.Q[0]).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("two-eigenvalue closure holds exactly") {
    SimConfig cfg;
    cfg.N = 64;
    cfg.K = 3;
    cfg.M = 2;
    const NetworkWeights w = init_weights(cfg, 12);
    const EigenSpectrum spec =
        EigenSpectrum::from_pairs({{0.5, 0.5}, {1.5, 0.5}});
    const OrderParameterState s = measure_order_parameters(w, spec, 2);
    const Eigen::MatrixXd closure = 2.0 * s.Q[1] - 0.75 * s.Q[0];
    CHECK((s.Q[2] - closure).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("run_micro") {
  const EigenSpectrum spec =
      EigenSpectrum::from_pairs({{0.4, 0.5}, {1.2, 0.3}, {1.6, 0.2}});

  SUBCASE("eta = 0 keeps eps_g constant") {
    SimConfig cfg;
    cfg.N = 128;
    cfg.K = 2;
    cfg.M = 2;
    cfg.eta = 0.0;
    cfg.steps = 500;
    cfg.record_every = 100;
    const Trajectory traj = run_micro(cfg, spec);
    for (const auto& p : traj.points)
      CHECK(p.eps_g == doctest::Approx(traj.points[0].eps_g).epsilon(1e-15));
  }

  SUBCASE("student initialized at the teacher stays at zero loss") {
    SimConfig cfg;
    cfg.N = 128;
    cfg.K = 2;
    cfg.M = 2;
    cfg.eta = 0.2;
    cfg.steps = 300;
    cfg.record_every = 50;
    NetworkWeights w = init_weights(cfg, 21);
    w.J = w.B;
    const Trajectory traj = run_micro_from(std::move(w), cfg, spec);
    for (const auto& p : traj.points)
      CHECK(std::abs(p.eps_g) < 1e-13);
  }

  SUBCASE("deterministic per seed pair, input stream matters") {
    SimConfig cfg;
    cfg.N = 96;
    cfg.K = 2;
    cfg.M = 2;
    cfg.eta = 0.3;
    cfg.steps = 400;
    cfg.record_every = 100;
    cfg.weight_seed = 5;
    cfg.input_seed = 6;
    const Trajectory a = run_micro(cfg, spec);
    const Trajectory b = run_micro(cfg, spec);
    REQUIRE(a.points.size() == b.points.size());
    for (size_t k = 0; k < a.points.size(); ++k)
      CHECK(a.points[k].eps_g == b.points[k].eps_g);

    cfg.input_seed = 7;
    const Trajectory c = run_micro(cfg, spec);
    CHECK(c.points.back().eps_g != a.points.back().eps_g);
    CHECK(c.points[0].eps_g == a.points[0].eps_g);  // same weights at alpha 0
  }

  SUBCASE("teacher constants measured along the run never drift") {
    SimConfig cfg;
    cfg.N = 64;
    cfg.K = 2;
    cfg.M = 2;
    cfg.eta = 0.5;
    cfg.steps = 600;
    cfg.record_every = 200;
    const Trajectory traj = run_micro(cfg, spec);
    const auto& t0 = traj.points.front().state->T;
    const auto& f0 = traj.points.front().state->F;
    for (const auto& p : traj.points) {
      for (size_t e = 0; e < t0.size(); ++e)
        CHECK((p.state->T[e] - t0[e]).cwiseAbs().maxCoeff() == 0.0);
      CHECK((p.state->F - f0).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

namespace {

// Empirical mean and SE of N * (one-step change) of Q^(e)_ij and R^(e)_in at
// fixed weights, against the macroscopic right-hand side.
struct BridgeStats {
  Eigen::MatrixXd mean, se;
};

BridgeStats empirical_dq(const NetworkWeights& weights,
                         const EigenSpectrum& spec, int order_e, double eta,
                         long long draws, std::uint64_t seed) {
  const auto n = static_cast<int>(weights.J.cols());
  const int k = static_cast<int>(weights.J.rows());
  const int m = static_cast<int>(weights.B.rows());
  const std::vector<double> diag = spec.realize_covariance(n);
  Eigen::ArrayXd sd(n), sig_e(n);
  for (int c = 0; c < n; ++c) {
    sd[c] = std::sqrt(diag[static_cast<size_t>(c)]);
    sig_e[c] = std::pow(diag[static_cast<size_t>(c)], order_e);
  }
  // rows of J Sigma^e for the projections x^(e)
  Eigen::MatrixXd je = weights.J;
  je.array().rowwise() *= sig_e.transpose();

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(k, k);
  NormalSampler rng(seed);
  Eigen::VectorXd xi(n), x(k), xe(k), y(m);
  for (long long t = 0; t < draws; ++t) {
    rng.fill(xi);
    xi.array() *= sd;
    x.noalias() = weights.J * xi;
    xe.noalias() = je * xi;
    y.noalias() = weights.B * xi;
    double s = 0.0, tt = 0.0;
    for (int i = 0; i < k; ++i) s += weights.w[i] * activation(x[i]);
    for (int p = 0; p < m; ++p) tt += weights.v[p] * activation(y[p]);
    const double err = (tt - s) * eta / n;
    const double quad = (xi.array().square() * sig_e).sum();
    for (int i = 0; i < k; ++i) {
      const double ci = err * weights.w[i] * activation_prime(x[i]);
      for (int j = i; j < k; ++j) {
        const double cj = err * weights.w[j] * activation_prime(x[j]);
        const double dq = n * (ci * xe[j] + cj * xe[i] + ci * cj * quad);
        sum(i, j) += dq;
        sumsq(i, j) += dq * dq;
      }
    }
  }
  BridgeStats out;
  out.mean = Eigen::MatrixXd::Zero(k, k);
  out.se = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      const double mu = sum(i, j) / static_cast<double>(draws);
      const double var =
          sumsq(i, j) / static_cast<double>(draws) - mu * mu;
      out.mean(i, j) = out.mean(j, i) = mu;
      out.se(i, j) = out.se(j, i) =
          std::sqrt(std::max(0.0, var) / static_cast<double>(draws));
    }
  return out;
}

}  // namespace

TEST_CASE("one-step mean of N*dQ matches the macroscopic right-hand side") {
  const EigenSpectrum spec = EigenSpectrum::from_pairs({{0.5, 0.5}, {1.5, 0.5}});
  SimConfig cfg;
  cfg.N = 512;
  cfg.K = 2;
  cfg.M = 2;
  cfg.eta = 0.4;
  const NetworkWeights weights = init_weights(cfg, 99);
  const OrderParameterState state = measure_order_parameters(weights, spec, 1);

  MacroConfig mc;
  mc.eta = cfg.eta;
  mc.spectrum = spec;
  const OrderParameterState rhs = derivative(state, mc);

  for (int e = 0; e < 2; ++e) {
    const BridgeStats stats =
        empirical_dq(weights, spec, e, cfg.eta, 40'000, 1234 + e);
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        const double gap =
            std::abs(stats.mean(i, j) - rhs.Q[static_cast<size_t>(e)](i, j));
        CHECK(gap <= 5.0 * stats.se(i, j));
      }
  }
}
