#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hawkesq/cov_analytics.hpp"
#include "hawkesq/errors.hpp"
#include "hawkesq/kernels.hpp"
#include "hawkesq/rng.hpp"
#include "hawkesq/service.hpp"

namespace hawkesq {

inline constexpr double kWeightCutoff = 1e-12;

namespace detail {

// Uniform trapezoid nodes on [lo, hi] with spacing close to `step`; aligned
// with the global grid k*step whenever lo and hi are.
struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
  double h = 0.0;
};

inline Nodes trapezoid_nodes(double lo, double hi, double step) {
  Nodes out;
  if (!(hi > lo)) {
    out.x = {hi};
    out.w = {0.0};
    return out;
  }
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / step - 1e-9)));
  const double h = (hi - lo) / static_cast<double>(n);
  out.h = h;
  out.x.resize(n + 1);
  out.w.assign(n + 1, h);
  for (std::size_t k = 0; k <= n; ++k) out.x[k] = lo + h * static_cast<double>(k);
  out.x[n] = hi;
  out.w[0] = out.w[n] = 0.5 * h;
  return out;
}

inline bool on_grid(double x, double step) { return std::abs(x / step - std::round(x / step)) < 1e-9; }

/// int_{u in [0,t]} int_{v in [0,s]} wt(t-u) ws(s-v) Phi_ij(u-v) dv du by
/// iterated trapezoid; u-nodes with wt below the cutoff are dropped beyond
/// lag `reach_t` (and likewise for v).
template <class Wt, class Ws>
double phi_double_integral(const CovarianceDensity& phi, std::size_t i, std::size_t j, double t, Wt&& wt,
                           double reach_t, double s, Ws&& ws, double reach_s) {
  if (t <= 0.0 || s <= 0.0) return 0.0;
  const double step = phi.step;
  double u_lo = std::max(0.0, t - reach_t), v_lo = std::max(0.0, s - reach_s);
  if (u_lo > 0.0) u_lo = std::floor(u_lo / step) * step;
  if (v_lo > 0.0) v_lo = std::floor(v_lo / step) * step;
  const Nodes un = trapezoid_nodes(u_lo, t, step), vn = trapezoid_nodes(v_lo, s, step);
  const double max_lag = std::max(t - v_lo, s - u_lo);
  if (!phi.closed_form && max_lag > phi.t_max() * (1.0 + 1e-12))
    throw RangeError("limit covariance: lag beyond the covariance-density grid");
  const bool aligned = !phi.closed_form && on_grid(u_lo, step) && on_grid(t, step) && on_grid(v_lo, step) &&
                       on_grid(s, step) && std::abs(un.h - step) < 1e-9 * step && std::abs(vn.h - step) < 1e-9 * step;
  std::vector<double> wv(vn.x.size());
  for (std::size_t m = 0; m < vn.x.size(); ++m) wv[m] = vn.w[m] * ws(s - vn.x[m]);
  // Phi_ij may jump at lag 0 (Phi_ij(0+) != Phi_ji(0+)); the trapezoid takes the midpoint there
  const double diagonal = 0.5 * (phi.at(i, j, 0.0) + phi.at(j, i, 0.0));
  double acc = 0.0;
  for (std::size_t k = 0; k < un.x.size(); ++k) {
    const double wu = un.w[k] * wt(t - un.x[k]);
    if (wu == 0.0) continue;
    double row = 0.0;
    if (aligned) {
      const auto ku = static_cast<std::ptrdiff_t>(std::llround(un.x[k] / step));
      const auto kv0 = static_cast<std::ptrdiff_t>(std::llround(vn.x[0] / step));
      for (std::size_t m = 0; m < vn.x.size(); ++m) {
        const std::ptrdiff_t lag = ku - kv0 - static_cast<std::ptrdiff_t>(m);
        row += wv[m] * (lag > 0    ? phi.node(static_cast<std::size_t>(lag), i, j)
                        : lag < 0 ? phi.node(static_cast<std::size_t>(-lag), j, i)
                                  : diagonal);
      }
    } else {
      for (std::size_t m = 0; m < vn.x.size(); ++m) {
        const double lag = un.x[k] - vn.x[m];
        row += wv[m] * (lag == 0.0 ? diagonal : phi.at(i, j, lag));
      }
    }
    acc += wu * row;
  }
  return acc;
}

inline double exp_reach(double rate) { return -std::log(kWeightCutoff) / rate; }

}  // namespace detail

/// Cov(X(s), X(t)) of the general-service limit for 0 <= s <= t (either order
/// accepted): q0 F0(s)(1-F0(t)) + a int_0^s (1-F(t-u)) du
///   + int_0^s int_0^t (1-F(t-u)) (1-F(s-v)) phi(v-u) du dv.
inline double cov_X_general(const ServiceDistribution& f0, const ServiceDistribution& f, double q0,
                            const CovarianceDensity& phi, double s, double t) {
  if (s < 0.0 || t < 0.0) throw RangeError("cov_X_general: times must be >= 0");
  if (s > t) std::swap(s, t);
  if (phi.dim != 1) throw ArgumentError("cov_X_general: univariate covariance density required");
  const double a = phi.unit_rates(0);
  const double first = q0 * f0.cdf(s) * f0.survival(t);
  const double second = a * (f.integrated_survival(t) - f.integrated_survival(t - s));
  const double reach = f.tail_point(kWeightCutoff);
  auto w = [&](double x) { return f.survival_node(x); };
  return first + second + detail::phi_double_integral(phi, 0, 0, t, w, reach, s, w, reach);
}

struct BoundedValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Var(X(inf)) = a E[eta] + 2 int_0^inf phi(w) R(w) dw, R(w) = int (1-F(u))(1-F(u+w)) du.
inline BoundedValue var_X_infty_bounded(const ServiceDistribution& f, const CovarianceDensity& phi) {
  if (phi.dim != 1) throw ArgumentError("var_X_infty: univariate covariance density required");
  const double mean = f.mean();
  if (!std::isfinite(mean)) throw ConfigError("var_X_infty: service mean must be finite");
  double acc = 0.0;
  for (std::size_t k = 0; k < phi.nodes; ++k) {
    const double w = (k == 0 || k + 1 == phi.nodes) ? 0.5 : 1.0;
    const double x = phi.step * static_cast<double>(k);
    const double r = f.survival_autocorrelation(x);
    acc += w * phi.node(k) * r;
    if (r == 0.0 && x > 0.0) break;
  }
  const double tail = 2.0 * std::abs(phi.node(phi.nodes - 1)) * mean *
                      std::max(0.0, mean - f.integrated_survival(phi.t_max()));
  return {phi.unit_rates(0) * mean + 2.0 * phi.step * acc, tail};
}

inline double var_X_infty(const ServiceDistribution& f, const CovarianceDensity& phi) {
  return var_X_infty_bounded(f, phi).value;
}

/// Cov(X_e(s), X_e(t)) with unit-rate exponential service and X_e(0) = x0:
/// a (e^{-|t-s|} - e^{-(t+s)}) + int_0^t int_0^s e^{-(t-u)} e^{-(s-v)} phi(u-v) dv du.
inline double cov_Xe(const CovarianceDensity& phi, double s, double t) {
  if (s < 0.0 || t < 0.0) throw RangeError("cov_Xe: times must be >= 0");
  if (phi.dim != 1) throw ArgumentError("cov_Xe: univariate covariance density required");
  const double a = phi.unit_rates(0);
  auto w = [](double x) { return std::exp(-x); };
  const double reach = detail::exp_reach(1.0);
  return a * (std::exp(-std::abs(t - s)) - std::exp(-(t + s))) +
         detail::phi_double_integral(phi, 0, 0, t, w, reach, s, w, reach);
}

/// E[X_e(t) | X_e(0) = x0].
inline double mean_Xe(double x0, double t) { return x0 * std::exp(-t); }

/// Var(X_e(inf)) for h = alpha e^{-beta t}.
inline double var1_closed_form(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha < beta)) throw StabilityError("VAR1 requires 0 <= alpha < beta");
  const double c = beta - alpha;
  return alpha * beta * (2.0 * beta - alpha) / (2.0 * c * c * (1.0 + c)) + beta / c;
}

/// a + int_0^T e^{-t} phi(t) dt on the grid.
inline double var_Xe_infty(const CovarianceDensity& phi) { return phi.unit_rates(0) + laplace_of_grid(phi, 1.0); }

/// Var(X_e(inf)) = phi~(1) + 1/(1-||h||): closed form for a single exponential,
/// the transform pipeline for sums of exponentials, the grid otherwise.
inline double var_Xe_infty(const Kernel& h) {
  const double norm = h.l1_norm();
  if (!(norm < 1.0)) throw StabilityError("var_Xe_infty requires ||h|| < 1");
  if (h.is_zero()) return 1.0;
  if (const auto* s = h.as_sum_exp()) {
    if (s->terms.size() == 1) return var1_closed_form(s->terms[0].alpha, s->terms[0].beta);
    return laplace_pipeline(h).phi_tilde(1.0) + 1.0 / (1.0 - norm);
  }
  return var_Xe_infty(solve_phi_grid(h));
}

/// Normal approximation of the stationary Hawkes/M/inf queue length (unit-rate
/// service): mean lambda-bar, variance mu Var(X_e(inf)).
struct GaussianQueueApprox {
  double mean = 0.0;
  double sigma = 1.0;

  double pmf(double i) const {
    const double z = (i - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
  }

  std::vector<double> pmf_table(std::size_t max_q) const {
    std::vector<double> out(max_q + 1);
    for (std::size_t q = 0; q <= max_q; ++q) out[q] = pmf(static_cast<double>(q));
    return out;
  }
};

inline GaussianQueueApprox gaussian_queue_approx(double mu, const Kernel& h) {
  if (!(mu > 0.0)) throw ConfigError("mu must be > 0");
  return {mu / (1.0 - h.l1_norm()), std::sqrt(mu * var_Xe_infty(h))};
}

inline double gaussian_queue_pmf(double mu, const Kernel& h, double i) { return gaussian_queue_approx(mu, h).pmf(i); }

/// Cov(X_i(t), X_j(s)) of the multivariate Gaussian-driven OU limit with
/// service rates r: 1{i=j} (a_i/r_i)(e^{-r_i|t-s|} - e^{-r_i(t+s)})
///   + int_0^t int_0^s e^{-r_i(t-u)} e^{-r_j(s-v)} Phi_ij(u-v) dv du.
inline double cov_multi_OU(const CovarianceDensity& phi, const Eigen::VectorXd& r, std::size_t i, std::size_t j,
                           double s, double t) {
  if (s < 0.0 || t < 0.0) throw RangeError("cov_multi_OU: times must be >= 0");
  if (static_cast<std::size_t>(r.size()) != phi.dim) throw ArgumentError("cov_multi_OU: need one rate per class");
  if (i >= phi.dim || j >= phi.dim) throw ArgumentError("cov_multi_OU: class index out of range");
  for (Eigen::Index k = 0; k < r.size(); ++k)
    if (!(r(k) > 0.0)) throw ConfigError("service rates must be > 0");
  const double diag =
      i == j ? phi.unit_rates(i) / r(i) * (std::exp(-r(i) * std::abs(t - s)) - std::exp(-r(i) * (t + s))) : 0.0;
  const double ri = r(i), rj = r(j);
  return diag + detail::phi_double_integral(
                    phi, i, j, t, [ri](double x) { return std::exp(-ri * x); }, detail::exp_reach(ri), s,
                    [rj](double x) { return std::exp(-rj * x); }, detail::exp_reach(rj));
}

/// Throws unless `m` is symmetric and numerically PSD.
inline void assert_psd(const Eigen::MatrixXd& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.isApprox(m.transpose(), 1e-10)) throw NumericalError(std::string(what) + ": matrix not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
    throw NumericalError(std::string(what) + ": matrix not positive semidefinite");
}

/// Stationary covariance 1{i=j} a_i/r_i + int_0^inf int_0^inf e^{-r_i u} e^{-r_j v} Phi_ij(v-u) du dv,
/// reduced to one-dimensional transforms of Phi_ij and Phi_ji.
inline Eigen::MatrixXd steady_state_cov_multi(const CovarianceDensity& phi, const Eigen::VectorXd& r,
                                              double tail_tolerance = 1e-6) {
  const auto k = phi.dim;
  if (static_cast<std::size_t>(r.size()) != k) throw ArgumentError("steady_state_cov_multi: need one rate per class");
  Eigen::MatrixXd out(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (!(r(i) > 0.0)) throw ConfigError("service rates must be > 0");
      const double tij = laplace_of_grid(phi, r(j), i, j), tji = laplace_of_grid(phi, r(i), j, i);
      const double tail = (std::abs(phi.node(phi.nodes - 1, i, j)) * std::exp(-r(j) * phi.t_max()) / r(j) +
                           std::abs(phi.node(phi.nodes - 1, j, i)) * std::exp(-r(i) * phi.t_max()) / r(i)) /
                          (r(i) + r(j));
      if (tail > tail_tolerance) throw NumericalError("steady_state_cov_multi: truncation tail exceeds tolerance");
      out(i, j) = (i == j ? phi.unit_rates(i) / r(i) : 0.0) + (tij + tji) / (r(i) + r(j));
    }
  assert_psd(out, "steady_state_cov_multi");
  return out;
}

enum class LimitKind { G, MultiG, XGeneral, Xe, MultiOU };

/// A Gaussian limit process with mean and covariance evaluators.
class LimitModel {
 public:
  static LimitModel G(const CovarianceDensity& phi) {
    LimitModel m(LimitKind::G, phi);
    if (phi.dim != 1) throw ArgumentError("G model needs a univariate density");
    return m;
  }
  static LimitModel multi_G(const CovarianceDensity& phi) { return LimitModel(LimitKind::MultiG, phi); }
  static LimitModel X_general(const CovarianceDensity& phi, ServiceDistribution f0, ServiceDistribution f, double q0,
                              double x0) {
    LimitModel m(LimitKind::XGeneral, phi);
    if (phi.dim != 1) throw ArgumentError("X model needs a univariate density");
    m.f0_ = std::move(f0);
    m.f_ = std::move(f);
    m.q0_ = q0;
    m.x0_ = Eigen::VectorXd::Constant(1, x0);
    return m;
  }
  static LimitModel X_e(const CovarianceDensity& phi, double x0) {
    LimitModel m(LimitKind::Xe, phi);
    if (phi.dim != 1) throw ArgumentError("X_e model needs a univariate density");
    m.x0_ = Eigen::VectorXd::Constant(1, x0);
    return m;
  }
  static LimitModel multi_OU(const CovarianceDensity& phi, Eigen::VectorXd r, Eigen::VectorXd x0) {
    LimitModel m(LimitKind::MultiOU, phi);
    if (static_cast<std::size_t>(r.size()) != phi.dim || static_cast<std::size_t>(x0.size()) != phi.dim)
      throw ArgumentError("multi_OU: need one rate and one initial value per class");
    m.r_ = std::move(r);
    m.x0_ = std::move(x0);
    return m;
  }

  LimitKind kind() const noexcept { return kind_; }
  std::size_t components() const noexcept { return phi_->dim; }
  const CovarianceDensity& density() const noexcept { return *phi_; }

  double mean(std::size_t i, double t) const {
    switch (kind_) {
      case LimitKind::G:
      case LimitKind::MultiG:
        return 0.0;
      case LimitKind::XGeneral:
        return f0_.survival(t) * x0_(0);
      case LimitKind::Xe:
        return mean_Xe(x0_(0), t);
      case LimitKind::MultiOU:
        return x0_(i) * std::exp(-r_(i) * t);
    }
    return 0.0;
  }

  /// Cov(Z_i(s), Z_j(t)).
  double covariance(std::size_t i, double s, std::size_t j, double t) const {
    switch (kind_) {
      case LimitKind::G:
      case LimitKind::MultiG:
        return vf_->cov(i, s, j, t);
      case LimitKind::XGeneral:
        return cov_X_general(f0_, f_, q0_, *phi_, s, t);
      case LimitKind::Xe:
        return cov_Xe(*phi_, s, t);
      case LimitKind::MultiOU:
        return cov_multi_OU(*phi_, r_, i, j, t, s);
    }
    return 0.0;
  }

  /// Stationary covariance matrix (variance for univariate kinds). G has none.
  Eigen::MatrixXd steady_state_covariance() const {
    switch (kind_) {
      case LimitKind::G:
      case LimitKind::MultiG:
        throw ArgumentError("G has stationary increments but no stationary distribution");
      case LimitKind::XGeneral:
        return Eigen::MatrixXd::Constant(1, 1, var_X_infty(f_, *phi_));
      case LimitKind::Xe:
        return Eigen::MatrixXd::Constant(1, 1, var_Xe_infty(*phi_));
      case LimitKind::MultiOU:
        return steady_state_cov_multi(*phi_, r_);
    }
    return {};
  }

  const ServiceDistribution& arrival_service() const noexcept { return f_; }

 private:
  LimitModel(LimitKind kind, const CovarianceDensity& phi)
      : kind_(kind),
        phi_(std::make_shared<const CovarianceDensity>(phi)),
        vf_(std::make_shared<const VarianceFunction>(variance_function(phi))) {}

  LimitKind kind_;
  std::shared_ptr<const CovarianceDensity> phi_;
  std::shared_ptr<const VarianceFunction> vf_;
  ServiceDistribution f0_;
  ServiceDistribution f_;
  double q0_ = 0.0;
  Eigen::VectorXd r_;
  Eigen::VectorXd x0_;
};

/// Finite-dimensional Gaussian sampler for a limit model on a time grid.
/// Rows of a draw are components, columns are times.
class LimitPathSampler {
 public:
  LimitPathSampler(const LimitModel& model, std::span<const double> t_grid)
      : k_(model.components()), n_(t_grid.size()) {
    if (model.kind() == LimitKind::XGeneral && !model.arrival_service().is_continuous())
      throw ConfigError("X path sampling is limited to continuous service distributions");
    const std::size_t dim = k_ * n_;
    mean_.resize(dim);
    Eigen::MatrixXd cov(dim, dim);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t a = 0; a < n_; ++a) {
        mean_(i * n_ + a) = model.mean(i, t_grid[a]);
        for (std::size_t j = 0; j < k_; ++j)
          for (std::size_t b = 0; b < n_; ++b)
            if (i * n_ + a <= j * n_ + b) {
              const double c = model.covariance(i, t_grid[a], j, t_grid[b]);
              cov(i * n_ + a, j * n_ + b) = cov(j * n_ + b, i * n_ + a) = c;
            }
      }
    factor(cov);
  }

  Eigen::MatrixXd draw(Stream& rng) const {
    Eigen::VectorXd z(mean_.size());
    for (Eigen::Index m = 0; m < z.size(); ++m) z(m) = rng.normal();
    const Eigen::VectorXd x = mean_ + lower_ * z;
    Eigen::MatrixXd out(k_, n_);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t a = 0; a < n_; ++a) out(i, a) = x(i * n_ + a);
    return out;
  }

  double jitter() const noexcept { return jitter_; }

 private:
  void factor(const Eigen::MatrixXd& cov) {
    const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
    const auto dim = cov.rows();
    for (double jitter = 0.0; jitter <= 1e-8 * scale * (1.0 + 1e-9);
         jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0) {
      const Eigen::LLT<Eigen::MatrixXd> llt(cov + jitter * Eigen::MatrixXd::Identity(dim, dim));
      if (llt.info() == Eigen::Success) {
        lower_ = llt.matrixL();
        jitter_ = jitter;
        return;
      }
    }
    throw NumericalError("limit path: covariance matrix indefinite beyond the jitter limit");
  }

  std::size_t k_;
  std::size_t n_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

/// `count` independent draws of the limit model on t_grid from stream (seed, 0).
inline std::vector<Eigen::MatrixXd> sample_limit_path(const LimitModel& model, std::span<const double> t_grid,
                                                      std::uint64_t seed, std::size_t count = 1) {
  const LimitPathSampler sampler(model, t_grid);
  Stream rng(seed, 0, substream::kGaussian);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) out.push_back(sampler.draw(rng));
  return out;
}

/// Covariance dump (s, t, value) of component pair (i, j) over the given times.
inline void write_covariance_csv(std::ostream& os, const LimitModel& model, std::span<const double> times,
                                 std::size_t i = 0, std::size_t j = 0) {
  os.precision(17);
  os << "s,t,cov\n";
  for (double s : times)
    for (double t : times) os << s << ',' << t << ',' << model.covariance(i, s, j, t) << '\n';
}

}  // namespace hawkesq
