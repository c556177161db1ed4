#pragma once

#include "pdyn/gauss.hpp"
#include "pdyn/order_state.hpp"
#include "pdyn/spectrum.hpp"
#include "pdyn/trajectory.hpp"

#include <cstdint>
#include <functional>

namespace pdyn {

struct MacroConfig {
  double eta = 0.1;
  EigenSpectrum spectrum;
  bool freeze_second_layer = true;  // soft-committee mode: D, E pinned
  double t_end = 100.0;             // horizon in normalized time
  double dt = 0.0;                  // step; 0 selects 0.05 / (eta * mu_1)
  long long record_every = 1;       // steps between trajectory records

  double effective_dt() const;
};

struct LiftedOrder {
  Eigen::MatrixXd q, r, t;
};

// Overlap matrices at an arbitrary order, reducing orders >= d through
// Omega^(d) = -sum_{e<d} c_e Omega^(e) as often as needed.
LiftedOrder lift_order(const OrderParameterState& state, int order);

// Which groups the second and third kernel arguments belong to, for
// I3(x_i, b^(e), c): XY means b = x_j, c = y_p, and so on.
enum class I3Kind { XX, XY, YX, YY };

// 3x3 covariance of (x_i, b^(e), c). The (2,2) entry is mathematically
// irrelevant (the i3 closed form drops it) and is filled with the smallest
// PSD-feasible value, the squared projection of z2 onto span(z1, z3).
GaussianCov assemble_i3_cov(const OrderParameterState& state, I3Kind kind,
                            int i, int second, int p, int order_e);

// Right-hand side of the order-parameter ODEs in normalized time. The
// returned object has the same shape as `state`; T and F slots are zero
// (constants), and D/E slots are zero when freeze_second_layer is set.
OrderParameterState derivative(const OrderParameterState& state,
                               const MacroConfig& config);

// eps_g = (1/2) [ sum F_pq I2(y_p,y_q) + sum D_ij I2(x_i,x_j)
//                 - 2 sum E_in I2(x_i,y_n) ], order-1 covariances.
double generalization_error(const OrderParameterState& state);

using MacroRecorder =
    std::function<void(double alpha, const OrderParameterState&)>;

// Classical fixed-step RK4 from 0 to t_end. Q and D are re-symmetrized after
// every step; a non-finite entry aborts with NonFinite naming the alpha at
// which it appeared. Records (and calls `recorder`, when given) at step 0,
// every record_every steps, and the final step.
Trajectory integrate(const OrderParameterState& initial,
                     const MacroConfig& config,
                     const MacroRecorder& recorder = {});

struct AutoIntegrateResult {
  Trajectory trajectory;
  double dt = 0.0;   // accepted step
  int halvings = 0;  // times the step was halved before acceptance
};

// Integrates at dt and dt/2 and accepts the finer run once eps_g(t_end)
// agrees to 1e-6 relative; otherwise keeps halving (at most 12 times, then
// throws NonFinite). Recording density is kept fixed in alpha across
// halvings. This is the step-size policy used by all experiment drivers.
AutoIntegrateResult integrate_auto(const OrderParameterState& initial,
                                   MacroConfig config);

// Draws an initial state with the statistics induced by microscopic i.i.d.
// N(0, 1/N) first-layer weights at dimension n_effective:
//   diagonal Q,T: mean mu_e, variance 3*mu_{2e}/N;
//   off-diagonal Q,T and all of R: mean 0, variance mu_{2e}/N.
// The per-order stacked Gram blocks are eigenvalue-clipped to PSD afterwards
// (a no-op for all but pathological draws). Second layers are soft-committee:
// D = E = F = all-ones. Standard normals are consumed in order-major layout,
// so spectra sharing a prefix of orders share their low-order draws.
OrderParameterState random_initial_state(const EigenSpectrum& spectrum, int K,
                                         int M, double n_effective,
                                         std::uint64_t seed);

// State snapshot with exact decimal round-trip, for checkpoint/resume.
std::string state_to_json(const OrderParameterState& state);
OrderParameterState state_from_json(const std::string& text);

}  // namespace pdyn
