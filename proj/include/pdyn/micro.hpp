#pragma once

#include "pdyn/order_state.hpp"
#include "pdyn/spectrum.hpp"
#include "pdyn/trajectory.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace pdyn {

struct SimConfig {
  int N = 1000;  // input dimension
  int K = 2;     // student hidden units
  int M = 2;     // teacher hidden units
  double eta = 0.1;
  bool soft_committee = true;  // second layers pinned to 1
  long long steps = 1;
  long long record_every = 0;  // 0 selects max(1, steps / 2000)
  std::uint64_t weight_seed = 1;
  std::uint64_t input_seed = 2;
  int threads = 0;  // simulator worker threads; 0 = auto, result-identical

  long long effective_record_every() const {
    return record_every > 0 ? record_every : std::max(1LL, steps / 2000);
  }
};

// Microscopic state. The teacher (B, v) is frozen: no update touches it.
struct NetworkWeights {
  Eigen::MatrixXd J;  // K x N, student first layer
  Eigen::VectorXd w;  // K, student second layer
  Eigen::MatrixXd B;  // M x N, teacher first layer
  Eigen::VectorXd v;  // M, teacher second layer
};

// First layers i.i.d. N(0, 1/N); second layers all-ones in soft-committee
// mode, i.i.d. N(0, 1) otherwise.
NetworkWeights init_weights(const SimConfig& config, std::uint64_t seed);

struct ForwardPass {
  double s = 0.0;     // student output
  double t = 0.0;     // teacher output
  Eigen::VectorXd x;  // student pre-activations J xi
  Eigen::VectorXd y;  // teacher pre-activations B xi
};

ForwardPass forward(const NetworkWeights& weights, const Eigen::VectorXd& xi);

// One online SGD update at learning rate eta/N:
//   dJ_i = (eta/N) (t - s) w_i g'(x_i) xi
//   dw_i = (eta/N) (t - s) g(x_i)        (skipped in soft-committee mode)
void sgd_step(NetworkWeights& weights, const Eigen::VectorXd& xi,
              const SimConfig& config);

// Exact overlap matrices of orders 0..emax from the weights, with the
// covariance realized diagonally from the spectrum at the weights' dimension.
// Cost O((K+M) N) per order: vectors are rescaled by the diagonal
// eigenvalues instead of forming covariance powers.
OrderParameterState measure_order_parameters(const NetworkWeights& weights,
                                             const EigenSpectrum& spectrum,
                                             int emax);

// Online SGD with fresh inputs xi ~ N(0, diag realization of the spectrum).
// Records alpha = step/N, eps_g (from measured order parameters and the
// closed-form kernel — no test-set sampling), and the order-parameter
// snapshot at step 0, every record_every steps, and the final step.
//
// A diagonal covariance loses no generality: every observable depends on
// the weights only through bilinear forms J Sigma^e J^T, J Sigma^e B^T,
// B Sigma^e B^T, which are invariant under rotating Sigma -> U Sigma U^T
// together with the weights, and the isotropic N(0, 1/N) initialization is
// rotation-invariant in distribution. So simulating in the eigenbasis of
// the covariance is exact, and no N x N matrix square root is needed.
Trajectory run_micro(const SimConfig& config, const EigenSpectrum& spectrum);

// Same, but starting from externally prepared weights (the compare driver
// reuses one weight draw across several input-noise streams).
Trajectory run_micro_from(NetworkWeights weights, const SimConfig& config,
                          const EigenSpectrum& spectrum);

}  // namespace pdyn
