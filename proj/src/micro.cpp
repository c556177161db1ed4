#include "pdyn/micro.hpp"

#include "pdyn/activation.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/macro.hpp"
#include "pdyn/rng.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <utility>

namespace pdyn {

namespace {

void check_config(const SimConfig& c) {
  if (c.N < std::max(c.K, c.M) || c.K < 1 || c.M < 1)
    throw std::invalid_argument("need N >= max(K, M) >= 1");
  if (c.eta < 0.0) throw std::invalid_argument("eta must be >= 0");
  if (c.steps < 1) throw std::invalid_argument("steps must be >= 1");
}

}  // namespace

NetworkWeights init_weights(const SimConfig& config, std::uint64_t seed) {
  check_config(config);
  NetworkWeights weights;
  weights.J.resize(config.K, config.N);
  weights.B.resize(config.M, config.N);
  NormalSampler rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(config.N));
  for (Eigen::Index i = 0; i < weights.J.rows(); ++i)
    for (Eigen::Index k = 0; k < weights.J.cols(); ++k)
      weights.J(i, k) = sd * rng();
  for (Eigen::Index n = 0; n < weights.B.rows(); ++n)
    for (Eigen::Index k = 0; k < weights.B.cols(); ++k)
      weights.B(n, k) = sd * rng();
  if (config.soft_committee) {
    weights.w = Eigen::VectorXd::Ones(config.K);
    weights.v = Eigen::VectorXd::Ones(config.M);
  } else {
    weights.w.resize(config.K);
    weights.v.resize(config.M);
    for (Eigen::Index i = 0; i < weights.w.size(); ++i) weights.w[i] = rng();
    for (Eigen::Index n = 0; n < weights.v.size(); ++n) weights.v[n] = rng();
  }
  return weights;
}

ForwardPass forward(const NetworkWeights& weights, const Eigen::VectorXd& xi) {
  ForwardPass fp;
  fp.x.noalias() = weights.J * xi;
  fp.y.noalias() = weights.B * xi;
  fp.s = weights.w.dot(fp.x.unaryExpr([](double a) { return activation(a); }));
  fp.t = weights.v.dot(fp.y.unaryExpr([](double a) { return activation(a); }));
  return fp;
}

void sgd_step(NetworkWeights& weights, const Eigen::VectorXd& xi,
              const SimConfig& config) {
  const ForwardPass fp = forward(weights, xi);
  const double err = (fp.t - fp.s) * config.eta / config.N;
  for (int i = 0; i < config.K; ++i)
    weights.J.row(i) += err * weights.w[i] * activation_prime(fp.x[i]) *
                        xi.transpose();
  if (!config.soft_committee)
    for (int i = 0; i < config.K; ++i)
      weights.w[i] += err * activation(fp.x[i]);
}

OrderParameterState measure_order_parameters(const NetworkWeights& weights,
                                             const EigenSpectrum& spectrum,
                                             int emax) {
  const auto n = static_cast<int>(weights.J.cols());
  const std::vector<double> diag = spectrum.realize_covariance(n);
  Eigen::Map<const Eigen::ArrayXd> sigma(diag.data(), n);

  OrderParameterState s;
  s.spectrum = spectrum;
  s.K = static_cast<int>(weights.J.rows());
  s.M = static_cast<int>(weights.B.rows());
  s.D.noalias() = weights.w * weights.w.transpose();
  s.E.noalias() = weights.w * weights.v.transpose();
  s.F.noalias() = weights.v * weights.v.transpose();

  // js = J Sigma^e, bs = B Sigma^e, updated in place order by order.
  Eigen::MatrixXd js = weights.J;
  Eigen::MatrixXd bs = weights.B;
  for (int e = 0; e <= emax; ++e) {
    if (e > 0) {
      js.array().rowwise() *= sigma.transpose();
      bs.array().rowwise() *= sigma.transpose();
    }
    Eigen::MatrixXd q = js * weights.J.transpose();
    s.Q.push_back(((q + q.transpose()) * 0.5).eval());
    s.R.push_back(js * weights.B.transpose());
    Eigen::MatrixXd t = bs * weights.B.transpose();
    s.T.push_back(((t + t.transpose()) * 0.5).eval());
  }
  return s;
}

Trajectory run_micro(const SimConfig& config, const EigenSpectrum& spectrum) {
  return run_micro_from(init_weights(config, config.weight_seed), config,
                        spectrum);
}

namespace {

// Barrier for the two simulator lanes; spins briefly, then yields so a
// single-core host still makes progress.
class SpinBarrier {
 public:
  explicit SpinBarrier(int parties) : parties_(parties) {}

  void arrive_and_wait() {
    const int gen = generation_.load(std::memory_order_acquire);
    if (arrived_.fetch_add(1, std::memory_order_acq_rel) + 1 == parties_) {
      arrived_.store(0, std::memory_order_relaxed);
      generation_.store(gen + 1, std::memory_order_release);
    } else {
      int spins = 0;
      while (generation_.load(std::memory_order_acquire) == gen)
        if (++spins > 4096) std::this_thread::yield();
    }
  }

 private:
  std::atomic<int> arrived_{0};
  std::atomic<int> generation_{0};
  const int parties_;
};

}  // namespace

Trajectory run_micro_from(NetworkWeights weights, const SimConfig& config,
                          const EigenSpectrum& spectrum) {
  check_config(config);
  const int n = config.N;
  const int K = config.K, M = config.M;
  if (weights.J.cols() != n)
    throw std::invalid_argument("weights dimension does not match config.N");
  const std::vector<double> diag = spectrum.realize_covariance(n);

  // The SGD path runs in single precision: at N in the 1e4 range the state
  // fits in L2 and float rounding (~1e-7 relative) sits far below the
  // intrinsic O(1/sqrt(N)) SGD fluctuations. Measurements are taken from the
  // same float-quantized weights in double, so every recorded identity
  // (teacher constants, closure) refers to one consistent weight state.
  // Layout is input-major (N x K) so dot products and rank-1 updates run
  // over contiguous memory.
  Eigen::MatrixXf jt = weights.J.transpose().cast<float>();
  const Eigen::MatrixXf bt = weights.B.transpose().cast<float>();
  Eigen::VectorXf wf = weights.w.cast<float>();
  const Eigen::VectorXf vf = weights.v.cast<float>();
  weights.B = bt.transpose().cast<double>();
  weights.v = vf.cast<double>();

  Eigen::ArrayXf noise_sd(n);
  for (int k = 0; k < n; ++k)
    noise_sd[k] = static_cast<float>(std::sqrt(diag[static_cast<size_t>(k)]));

  const int emax = spectrum.distinct_count() - 1;
  const long long every = config.effective_record_every();

  Trajectory traj;
  auto record = [&](long long step) {
    weights.J = jt.transpose().cast<double>();
    weights.w = wf.cast<double>();
    OrderParameterState state =
        measure_order_parameters(weights, spectrum, emax);
    traj.points.push_back({static_cast<double>(step) / n,
                           generalization_error(state), std::move(state)});
  };
  record(0);

  // The input vector is split into two fixed lanes with independent seed
  // streams and disjoint row ranges. The decomposition is part of the
  // algorithm, not of the execution: one worker running both lanes and two
  // workers running one each produce bit-identical trajectories.
  constexpr int kLanes = 2;
  const int split = n / 2;
  const int lane_begin[kLanes] = {0, split};
  const int lane_size[kLanes] = {split, n - split};
  Xoshiro256pp engines[kLanes] = {
      Xoshiro256pp(derive_seed(config.input_seed, "lane", 0)),
      Xoshiro256pp(derive_seed(config.input_seed, "lane", 1))};
  const ZigguratTables& zig = ZigguratTables::instance();

  Eigen::VectorXf xi(n);
  Eigen::VectorXf coeff(K);
  Eigen::MatrixXd partial_x(kLanes, K), partial_y(kLanes, M);
  const double rate = config.eta / n;

  auto fill_lane = [&](int lane) {
    auto& eng = engines[lane];
    const int b = lane_begin[lane], e = lane_begin[lane] + lane_size[lane];
    for (int k = b; k < e; ++k)
      xi[k] = static_cast<float>(zig.sample(eng)) * noise_sd[k];
    for (int i = 0; i < K; ++i)
      partial_x(lane, i) =
          jt.col(i).segment(b, e - b).dot(xi.segment(b, e - b));
    for (int m2 = 0; m2 < M; ++m2)
      partial_y(lane, m2) =
          bt.col(m2).segment(b, e - b).dot(xi.segment(b, e - b));
  };
  auto combine = [&]() {
    double s = 0.0, t = 0.0;
    for (int i = 0; i < K; ++i)
      s += wf[i] * activation(partial_x(0, i) + partial_x(1, i));
    for (int m2 = 0; m2 < M; ++m2)
      t += vf[m2] * activation(partial_y(0, m2) + partial_y(1, m2));
    const double err = (t - s) * rate;
    for (int i = 0; i < K; ++i) {
      const double x_i = partial_x(0, i) + partial_x(1, i);
      coeff[i] = static_cast<float>(err * wf[i] * activation_prime(x_i));
      if (!config.soft_committee)
        wf[i] += static_cast<float>(err * activation(x_i));
    }
  };
  auto update_lane = [&](int lane) {
    const int b = lane_begin[lane], len = lane_size[lane];
    for (int i = 0; i < K; ++i)
      jt.col(i).segment(b, len) += coeff[i] * xi.segment(b, len);
  };

  // Spin-barrier handoffs are only profitable on dedicated physical cores;
  // oversubscribed or virtualized hosts run faster single-threaded, so that
  // is the default. Results are identical either way.
  int workers = config.threads <= 0 ? 1 : std::min(config.threads, kLanes);

  if (workers == 1) {
    for (long long step = 1; step <= config.steps; ++step) {
      fill_lane(0);
      fill_lane(1);
      combine();
      update_lane(0);
      update_lane(1);
      if (step % every == 0 || step == config.steps) record(step);
    }
    return traj;
  }

  SpinBarrier barrier(kLanes);
  auto lane_loop = [&](int lane) {
    for (long long step = 1; step <= config.steps; ++step) {
      fill_lane(lane);
      barrier.arrive_and_wait();
      if (lane == 0) combine();
      barrier.arrive_and_wait();
      update_lane(lane);
      if (step % every == 0 || step == config.steps) {
        barrier.arrive_and_wait();
        if (lane == 0) record(step);
        barrier.arrive_and_wait();
      }
    }
  };
  std::thread second(lane_loop, 1);
  lane_loop(0);
  second.join();
  return traj;
}

}  // namespace pdyn
