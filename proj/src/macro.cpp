#include "pdyn/macro.hpp"

#include "pdyn/activation.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/rng.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <utility>

namespace pdyn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw IndexOutOfRange(what);
}

// Eigenvalue-clip a symmetric matrix to PSD in place; no-op when already PSD.
void clip_psd(Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() >= 0.0) return;
  m = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
      es.eigenvectors().transpose();
  m = ((m + m.transpose()) * 0.5).eval();
}

struct StateArith {
  // y += a * k over the dynamic variables; T and F stay untouched (their
  // derivative slots are zero anyway, this just skips dead work).
  static void add_scaled(OrderParameterState& y, double a,
                         const OrderParameterState& k) {
    for (size_t e = 0; e < y.Q.size(); ++e) {
      y.Q[e] += a * k.Q[e];
      y.R[e] += a * k.R[e];
    }
    y.D += a * k.D;
    y.E += a * k.E;
  }
};

}  // namespace

bool OrderParameterState::all_finite() const {
  for (const auto& m : Q)
    if (!m.allFinite()) return false;
  for (const auto& m : R)
    if (!m.allFinite()) return false;
  for (const auto& m : T)
    if (!m.allFinite()) return false;
  return D.allFinite() && E.allFinite() && F.allFinite();
}

void validate_state(const OrderParameterState& state) {
  const int d = state.d();
  require(state.K > 0 && state.M > 0, "state needs K, M >= 1");
  require(static_cast<int>(state.Q.size()) == d &&
              static_cast<int>(state.R.size()) == d &&
              static_cast<int>(state.T.size()) == d,
          "state must store exactly d orders");
  for (int e = 0; e < d; ++e) {
    require(state.Q[e].rows() == state.K && state.Q[e].cols() == state.K,
            "Q shape mismatch");
    require(state.R[e].rows() == state.K && state.R[e].cols() == state.M,
            "R shape mismatch");
    require(state.T[e].rows() == state.M && state.T[e].cols() == state.M,
            "T shape mismatch");
  }
  if (!state.all_finite()) throw NonFinite("state contains NaN/Inf");

  auto check_sym = [](const Eigen::MatrixXd& m, const char* name) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw NonPSD(std::string(name) + " not symmetric within 1e-10");
  };
  for (int e = 0; e < d; ++e) {
    check_sym(state.Q[e], "Q");
    check_sym(state.T[e], "T");
  }
  check_sym(state.D, "D");
  check_sym(state.F, "F");

  const LiftedOrder ord1 = lift_order(state, 1);
  Eigen::MatrixXd gram(state.K + state.M, state.K + state.M);
  gram << ord1.q, ord1.r, ord1.r.transpose(), ord1.t;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram,
                                                    Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, gram.diagonal().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw NonPSD("order-1 Gram block is not PSD");
}

double MacroConfig::effective_dt() const {
  if (dt > 0.0) return dt;
  const double mu1 = spectrum.moment(1);
  if (eta <= 0.0 || mu1 <= 0.0) return t_end / 100.0;
  return 0.05 / (eta * mu1);
}

LiftedOrder lift_order(const OrderParameterState& state, int order) {
  require(order >= 0, "order must be >= 0");
  const int d = state.d();
  if (order < d) return {state.Q[order], state.R[order], state.T[order]};

  const std::vector<double> c = state.spectrum.reduction_coefficients();
  std::vector<Eigen::MatrixXd> q(state.Q.begin(), state.Q.end());
  std::vector<Eigen::MatrixXd> r(state.R.begin(), state.R.end());
  std::vector<Eigen::MatrixXd> t(state.T.begin(), state.T.end());
  for (int k = d; k <= order; ++k) {
    Eigen::MatrixXd qk = Eigen::MatrixXd::Zero(state.K, state.K);
    Eigen::MatrixXd rk = Eigen::MatrixXd::Zero(state.K, state.M);
    Eigen::MatrixXd tk = Eigen::MatrixXd::Zero(state.M, state.M);
    for (int f = 0; f < d; ++f) {
      qk -= c[static_cast<size_t>(f)] * q[static_cast<size_t>(k - d + f)];
      rk -= c[static_cast<size_t>(f)] * r[static_cast<size_t>(k - d + f)];
      tk -= c[static_cast<size_t>(f)] * t[static_cast<size_t>(k - d + f)];
    }
    q.push_back(std::move(qk));
    r.push_back(std::move(rk));
    t.push_back(std::move(tk));
  }
  return {q.back(), r.back(), t.back()};
}

GaussianCov assemble_i3_cov(const OrderParameterState& state, I3Kind kind,
                            int i, int second, int p, int order_e) {
  const int d = state.d();
  require(order_e >= 0 && order_e < d, "order_e must be in [0, d)");
  require(i >= 0 && i < state.K, "index i out of range");
  const bool b_is_x = kind == I3Kind::XX || kind == I3Kind::XY;
  const bool c_is_x = kind == I3Kind::XX || kind == I3Kind::YX;
  require(second >= 0 && second < (b_is_x ? state.K : state.M),
          "second index out of range");
  require(p >= 0 && p < (c_is_x ? state.K : state.M), "index p out of range");

  const LiftedOrder ord1 = lift_order(state, 1);
  const LiftedOrder orde = lift_order(state, order_e + 1);

  const double c11 = ord1.q(i, i);
  const double c12 = b_is_x ? orde.q(i, second) : orde.r(i, second);
  const double c13 = c_is_x ? ord1.q(i, p) : ord1.r(i, p);
  double c23;
  switch (kind) {
    case I3Kind::XX: c23 = orde.q(second, p); break;
    case I3Kind::XY: c23 = orde.r(second, p); break;
    case I3Kind::YX: c23 = orde.r(p, second); break;
    default:         c23 = orde.t(second, p); break;
  }
  const double c33 = c_is_x ? ord1.q(p, p) : ord1.t(p, p);

  // Never consumed by i3; fill with the smallest PSD-feasible value (squared
  // norm of the projection of z2 onto span(z1, z3)).
  const double det = c11 * c33 - c13 * c13;
  double c22;
  if (det > 1e-14 * std::max(1.0, c11 * c33)) {
    c22 = (c12 * (c12 * c33 - c13 * c23) + c23 * (c11 * c23 - c12 * c13)) / det;
  } else {
    // z1, z3 nearly collinear: take the true self-overlap instead.
    const LiftedOrder self = lift_order(state, 2 * order_e + 1);
    c22 = b_is_x ? self.q(second, second) : self.t(second, second);
  }

  Eigen::Matrix3d c;
  c << c11, c12, c13, c12, c22, c23, c13, c23, c33;
  return GaussianCov(c);
}

namespace {

// eta^2 bracket of dQ_ij: the four I4 double sums. Depends only on order-1
// overlaps, so it is shared by every order e (only mu_{e+1} differs).
double i4_bracket(const OrderParameterState& s, const LiftedOrder& o1, int i,
                  int j) {
  const auto& q = o1.q;
  const auto& r = o1.r;
  const auto& t = o1.t;
  double acc = 0.0;
  for (int p = 0; p < s.K; ++p)
    for (int v = 0; v < s.K; ++v)
      acc += s.D(i, p) * s.D(j, v) *
             kernels::i4(q(i, i), q(i, j), q(i, p), q(i, v), q(j, j), q(j, p),
                         q(j, v), q(p, p), q(p, v), q(v, v));
  for (int p = 0; p < s.M; ++p)
    for (int v = 0; v < s.M; ++v)
      acc += s.E(i, p) * s.E(j, v) *
             kernels::i4(q(i, i), q(i, j), r(i, p), r(i, v), q(j, j), r(j, p),
                         r(j, v), t(p, p), t(p, v), t(v, v));
  for (int p = 0; p < s.K; ++p)
    for (int v = 0; v < s.M; ++v)
      acc -= s.D(i, p) * s.E(j, v) *
             kernels::i4(q(i, i), q(i, j), q(i, p), r(i, v), q(j, j), q(j, p),
                         r(j, v), q(p, p), r(p, v), t(v, v));
  for (int p = 0; p < s.M; ++p)
    for (int v = 0; v < s.K; ++v)
      acc -= s.E(i, p) * s.D(j, v) *
             kernels::i4(q(i, i), q(i, j), r(i, p), q(i, v), q(j, j), r(j, p),
                         q(j, v), t(p, p), r(v, p), q(v, v));
  return acc;
}

}  // namespace

OrderParameterState derivative(const OrderParameterState& state,
                               const MacroConfig& config) {
  const int d = state.d();
  const int K = state.K, M = state.M;
  const double eta = config.eta;

  OrderParameterState out;
  out.spectrum = state.spectrum;
  out.K = K;
  out.M = M;
  out.Q.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(K, K));
  out.R.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(K, M));
  out.T.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(M, M));
  out.D = Eigen::MatrixXd::Zero(K, K);
  out.E = Eigen::MatrixXd::Zero(K, M);
  out.F = Eigen::MatrixXd::Zero(M, M);

  const LiftedOrder o1 = lift_order(state, 1);
  std::vector<LiftedOrder> oe(static_cast<size_t>(d));
  for (int e = 0; e < d; ++e) oe[static_cast<size_t>(e)] = lift_order(state, e + 1);
  const std::vector<double> mu = state.spectrum.moments(d);

  Eigen::MatrixXd bracket;
  if (eta != 0.0) {
    bracket.resize(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = i; j < K; ++j) {
        bracket(i, j) = i4_bracket(state, o1, i, j);
        bracket(j, i) = bracket(i, j);
      }
  }

  // <g'(x_a) b^(e) g(c_p)> given the index of the order-(e+1) cross overlaps.
  const auto& q1 = o1.q;
  const auto& r1 = o1.r;
  const auto& t1 = o1.t;

  for (int e = 0; e < d; ++e) {
    const auto& qe = oe[static_cast<size_t>(e)].q;
    const auto& re = oe[static_cast<size_t>(e)].r;
    const auto& te = oe[static_cast<size_t>(e)].t;
    const double mu_e1 = mu[static_cast<size_t>(e) + 1];

    for (int i = 0; i < K; ++i) {
      for (int j = i; j < K; ++j) {
        double lin = 0.0;
        for (int p = 0; p < M; ++p)
          lin += state.E(i, p) *
                 kernels::i3(q1(i, i), qe(i, j), r1(i, p), re(j, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          lin -= state.D(i, p) *
                 kernels::i3(q1(i, i), qe(i, j), q1(i, p), qe(j, p), q1(p, p));
        for (int p = 0; p < M; ++p)
          lin += state.E(j, p) *
                 kernels::i3(q1(j, j), qe(j, i), r1(j, p), re(i, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          lin -= state.D(j, p) *
                 kernels::i3(q1(j, j), qe(j, i), q1(j, p), qe(i, p), q1(p, p));
        const double val =
            eta * lin +
            (eta != 0.0 ? eta * eta * mu_e1 * bracket(i, j) : 0.0);
        out.Q[static_cast<size_t>(e)](i, j) = val;
        out.Q[static_cast<size_t>(e)](j, i) = val;
      }
      for (int n = 0; n < M; ++n) {
        double lin = 0.0;
        for (int p = 0; p < M; ++p)
          lin += state.E(i, p) *
                 kernels::i3(q1(i, i), re(i, n), r1(i, p), te(n, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          lin -= state.D(i, p) *
                 kernels::i3(q1(i, i), re(i, n), q1(i, p), re(p, n), q1(p, p));
        out.R[static_cast<size_t>(e)](i, n) = eta * lin;
      }
    }
  }

  if (!config.freeze_second_layer) {
    for (int i = 0; i < K; ++i) {
      for (int j = i; j < K; ++j) {
        double acc = 0.0;
        for (int p = 0; p < M; ++p)
          acc += state.E(i, p) * kernels::i2(q1(j, j), r1(j, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          acc -= state.D(i, p) * kernels::i2(q1(j, j), q1(j, p), q1(p, p));
        for (int p = 0; p < M; ++p)
          acc += state.E(j, p) * kernels::i2(q1(i, i), r1(i, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          acc -= state.D(j, p) * kernels::i2(q1(i, i), q1(i, p), q1(p, p));
        out.D(i, j) = eta * acc;
        out.D(j, i) = out.D(i, j);
      }
      for (int n = 0; n < M; ++n) {
        double acc = 0.0;
        for (int p = 0; p < M; ++p)
          acc += state.F(p, n) * kernels::i2(q1(i, i), r1(i, p), t1(p, p));
        for (int p = 0; p < K; ++p)
          acc -= state.E(p, n) * kernels::i2(q1(i, i), q1(i, p), q1(p, p));
        out.E(i, n) = eta * acc;
      }
    }
  }
  return out;
}

double generalization_error(const OrderParameterState& state) {
  const LiftedOrder o1 = lift_order(state, 1);
  double acc = 0.0;
  for (int p = 0; p < state.M; ++p)
    for (int v = 0; v < state.M; ++v)
      acc += state.F(p, v) * kernels::i2(o1.t(p, p), o1.t(p, v), o1.t(v, v));
  for (int i = 0; i < state.K; ++i)
    for (int j = 0; j < state.K; ++j)
      acc += state.D(i, j) * kernels::i2(o1.q(i, i), o1.q(i, j), o1.q(j, j));
  for (int i = 0; i < state.K; ++i)
    for (int n = 0; n < state.M; ++n)
      acc -= 2.0 * state.E(i, n) * kernels::i2(o1.q(i, i), o1.r(i, n), o1.t(n, n));
  return 0.5 * acc;
}

Trajectory integrate(const OrderParameterState& initial,
                     const MacroConfig& config, const MacroRecorder& recorder) {
  if (config.t_end <= 0.0)
    throw std::invalid_argument("t_end must be positive");
  if (config.dt < 0.0) throw std::invalid_argument("dt must be >= 0");
  OrderParameterState y = initial;
  const double dt_req = config.effective_dt();
  const long long nsteps = std::max<long long>(
      1, static_cast<long long>(std::ceil(config.t_end / dt_req - 1e-9)));
  const double dt = config.t_end / static_cast<double>(nsteps);
  const long long every = std::max<long long>(1, config.record_every);

  Trajectory traj;
  auto record = [&](long long step) {
    const double alpha = static_cast<double>(step) * dt;
    traj.points.push_back({alpha, generalization_error(y), y});
    if (recorder) recorder(alpha, y);
  };
  record(0);

  OrderParameterState stage = y;
  for (long long step = 1; step <= nsteps; ++step) {
    try {
      const OrderParameterState k1 = derivative(y, config);
      stage = y;
      StateArith::add_scaled(stage, 0.5 * dt, k1);
      const OrderParameterState k2 = derivative(stage, config);
      stage = y;
      StateArith::add_scaled(stage, 0.5 * dt, k2);
      const OrderParameterState k3 = derivative(stage, config);
      stage = y;
      StateArith::add_scaled(stage, dt, k3);
      const OrderParameterState k4 = derivative(stage, config);

      StateArith::add_scaled(y, dt / 6.0, k1);
      StateArith::add_scaled(y, dt / 3.0, k2);
      StateArith::add_scaled(y, dt / 3.0, k3);
      StateArith::add_scaled(y, dt / 6.0, k4);
    } catch (const SingularDenominator& e) {
      // a kernel-infeasible state is divergence in practice
      throw NonFinite("state left the feasible region at alpha = " +
                      std::to_string(static_cast<double>(step) * dt) + ": " +
                      e.what());
    }

    for (auto& m : y.Q) m = ((m + m.transpose()) * 0.5).eval();
    y.D = ((y.D + y.D.transpose()) * 0.5).eval();

    if (!y.all_finite())
      throw NonFinite("state became non-finite at alpha = " +
                      std::to_string(static_cast<double>(step) * dt));
    if (step % every == 0 || step == nsteps) record(step);
  }
  return traj;
}

AutoIntegrateResult integrate_auto(const OrderParameterState& initial,
                                   MacroConfig config) {
  const double dt0 = config.effective_dt();
  const double record_interval =
      dt0 * static_cast<double>(std::max<long long>(1, config.record_every));
  constexpr int kMaxHalvings = 12;
  constexpr double kRelTol = 1e-6;
  // eps_g is an O(1) quantity evaluated through arcsin chains; differences
  // below kAbsTol are roundoff, not truncation error, and must not block
  // acceptance once the loss has decayed to that scale.
  constexpr double kAbsTol = 1e-12;

  config.dt = dt0;
  config.record_every = std::max<long long>(
      1, static_cast<long long>(std::llround(record_interval / config.dt)));
  Trajectory prev = integrate(initial, config);
  for (int h = 1; h <= kMaxHalvings; ++h) {
    config.dt = dt0 / static_cast<double>(1LL << h);
    config.record_every = std::max<long long>(
        1, static_cast<long long>(std::llround(record_interval / config.dt)));
    Trajectory cur = integrate(initial, config);
    const double a = prev.points.back().eps_g;
    const double b = cur.points.back().eps_g;
    if (std::abs(a - b) <= std::max(kRelTol * std::abs(b), kAbsTol))
      return {std::move(cur), config.dt, h};
    prev = std::move(cur);
  }
  throw NonFinite("integrator step refinement did not converge after " +
                  std::to_string(kMaxHalvings) + " halvings");
}

OrderParameterState random_initial_state(const EigenSpectrum& spectrum, int K,
                                         int M, double n_effective,
                                         std::uint64_t seed) {
  if (n_effective < 1.0)
    throw std::invalid_argument("n_effective must be >= 1");
  const int d = spectrum.distinct_count();
  const std::vector<double> mu = spectrum.moments(2 * (d - 1) >= 1 ? 2 * (d - 1) : 1);

  OrderParameterState s;
  s.spectrum = spectrum;
  s.K = K;
  s.M = M;
  s.Q.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(K, K));
  s.R.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(K, M));
  s.T.assign(static_cast<size_t>(d), Eigen::MatrixXd::Zero(M, M));
  s.D = Eigen::MatrixXd::Ones(K, K);
  s.E = Eigen::MatrixXd::Ones(K, M);
  s.F = Eigen::MatrixXd::Ones(M, M);

  NormalSampler rng(seed);
  // Order-major draw layout: a d=1 state consumes a prefix of the draws a
  // d=2 state would, so shrinking a spectrum to one eigenvalue keeps the
  // e=0 initial condition bit-identical.
  for (int e = 0; e < d; ++e) {
    const double mean = mu[static_cast<size_t>(e)];
    const double var2e = mu[static_cast<size_t>(2 * e)];
    const double sd_diag = std::sqrt(3.0 * var2e / n_effective);
    const double sd_off = std::sqrt(var2e / n_effective);
    auto& q = s.Q[static_cast<size_t>(e)];
    auto& r = s.R[static_cast<size_t>(e)];
    auto& t = s.T[static_cast<size_t>(e)];
    for (int i = 0; i < K; ++i) q(i, i) = mean + sd_diag * rng();
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j) q(i, j) = q(j, i) = sd_off * rng();
    for (int i = 0; i < K; ++i)
      for (int n = 0; n < M; ++n) r(i, n) = sd_off * rng();
    for (int n = 0; n < M; ++n) t(n, n) = mean + sd_diag * rng();
    for (int n = 0; n < M; ++n)
      for (int m2 = n + 1; m2 < M; ++m2) t(n, m2) = t(m2, n) = sd_off * rng();

    Eigen::MatrixXd gram(K + M, K + M);
    gram << q, r, r.transpose(), t;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < 0.0) {
      clip_psd(gram);
      q = gram.topLeftCorner(K, K);
      r = gram.topRightCorner(K, M);
      t = gram.bottomRightCorner(M, M);
    }
  }
  return s;
}

std::vector<double> Trajectory::alphas() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.alpha);
  return out;
}

std::vector<double> Trajectory::eps() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.eps_g);
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = nr > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nc; ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)]
                    .get<double>();
  return m;
}

}  // namespace

std::string state_to_json(const OrderParameterState& state) {
  nlohmann::json j;
  j["format"] = "pdyn-state-v1";
  nlohmann::json spec = nlohmann::json::array();
  for (const auto& e : state.spectrum.entries())
    spec.push_back({e.eigenvalue, e.fraction});
  j["spectrum"] = std::move(spec);
  j["K"] = state.K;
  j["M"] = state.M;
  auto dump = [](const std::vector<Eigen::MatrixXd>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : v) arr.push_back(matrix_to_json(m));
    return arr;
  };
  j["Q"] = dump(state.Q);
  j["R"] = dump(state.R);
  j["T"] = dump(state.T);
  j["D"] = matrix_to_json(state.D);
  j["E"] = matrix_to_json(state.E);
  j["F"] = matrix_to_json(state.F);
  return j.dump(2);
}

OrderParameterState state_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "pdyn-state-v1")
    throw std::invalid_argument("unrecognized state snapshot format");
  std::vector<SpectrumEntry> entries;
  for (const auto& pair : j.at("spectrum"))
    entries.push_back({pair[0].get<double>(), pair[1].get<double>()});
  OrderParameterState s;
  s.spectrum = EigenSpectrum(std::move(entries));
  s.K = j.at("K").get<int>();
  s.M = j.at("M").get<int>();
  auto load = [](const nlohmann::json& arr) {
    std::vector<Eigen::MatrixXd> v;
    for (const auto& m : arr) v.push_back(matrix_from_json(m));
    return v;
  };
  s.Q = load(j.at("Q"));
  s.R = load(j.at("R"));
  s.T = load(j.at("T"));
  s.D = matrix_from_json(j.at("D"));
  s.E = matrix_from_json(j.at("E"));
  s.F = matrix_from_json(j.at("F"));
  validate_state(s);
  return s;
}

}  // namespace pdyn
