#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hawkesq/errors.hpp"
#include "hawkesq/gmres.hpp"
#include "hawkesq/kernels.hpp"

namespace hawkesq {

enum class PhiSolver { Gmres, Dense, Picard };

/// Discretisation of the covariance-density equation.
struct PhiGrid {
  double step = 0.01;
  std::optional<double> t_max;  // default_t_max when empty
  PhiSolver solver = PhiSolver::Gmres;
};

struct ExponentialClosedForm {
  double prefactor = 0.0;
  double decay = 1.0;
};

/// Covariance density on the grid t_k = k step, k = 0..nodes-1. Values are
/// stored row-major per node: values[(k d + i) d + j] = Phi_ij(t_k).
struct CovarianceDensity {
  double step = 0.01;
  std::size_t nodes = 0;
  std::size_t dim = 1;
  std::vector<double> values;
  Eigen::VectorXd unit_rates;  // a; 1/(1-||h||) in the univariate case
  double residual = 0.0;       // sup-norm residual of the discretised equation
  int iterations = 0;
  std::optional<ExponentialClosedForm> closed_form;

  double t_max() const noexcept { return step * static_cast<double>(nodes - 1); }
  double node(std::size_t k, std::size_t i = 0, std::size_t j = 0) const { return values[(k * dim + i) * dim + j]; }

  /// Phi_ij(t) for any real t, using Phi_ij(-t) = Phi_ji(t) and linear interpolation.
  double at(std::size_t i, std::size_t j, double t) const {
    if (t < 0.0) return at(j, i, -t);
    if (closed_form) return closed_form->prefactor * std::exp(-closed_form->decay * t);
    const double pos = t / step;
    if (pos > static_cast<double>(nodes - 1) * (1.0 + 1e-12)) throw RangeError("covariance density: t beyond grid");
    const auto k = std::min(static_cast<std::size_t>(pos), nodes - 2);
    const double frac = std::min(pos - static_cast<double>(k), 1.0);
    return node(k, i, j) + frac * (node(k + 1, i, j) - node(k, i, j));
  }

  double operator()(double t) const { return at(0, 0, t); }

  Eigen::MatrixXd matrix(double t) const {
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) m(i, j) = at(i, j, t);
    return m;
  }

  /// Trapezoid integral of |phi| over the whole line (univariate entry i, j).
  double l1_norm(std::size_t i = 0, std::size_t j = 0) const {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < nodes; ++k)
      acc += 0.5 * step * (std::abs(node(k, i, j)) + std::abs(node(k + 1, i, j)) + std::abs(node(k, j, i)) +
                           std::abs(node(k + 1, j, i)));
    return acc;
  }

  double min_value() const { return *std::min_element(values.begin(), values.end()); }
};

/// max(40, 20 x slowest decay scale), doubled until every tail mass is below 1e-8.
inline double default_t_max(const MultiKernel& kern, double step) {
  const auto d = kern.dimension();
  double scale = 0.0;
  auto tail = [&](double t) {
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const Kernel& h = kern.entry(i, j);
        if (const auto* s = h.as_sum_exp()) {
          double acc = 0.0;
          for (const auto& term : s->terms) acc += std::abs(term.alpha) / term.beta * std::exp(-term.beta * t);
          worst = std::max(worst, acc);
        } else {
          worst = std::max(worst, std::abs(h.tail_mass(t)));
        }
      }
    return worst;
  };
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const Kernel& h = kern.entry(i, j);
      if (h.is_zero()) continue;
      if (const auto* s = h.as_sum_exp()) {
        for (const auto& term : s->terms)
          if (term.alpha != 0.0) scale = std::max(scale, 1.0 / term.beta);
      } else if (std::isfinite(h.decay_scale())) {
        scale = std::max(scale, h.decay_scale());
      }
    }
  double t = std::max(40.0, 20.0 * scale);
  while (tail(t) >= 1e-8) {
    t *= 2.0;
    if (t > 1e5) throw ConfigError("kernel tail too heavy for an automatic truncation; set t_max explicitly");
  }
  return std::ceil(t / step - 1e-9) * step;
}

namespace detail {

// Discretised operators of Phi = f + V Phi + H Phi with trapezoid weights:
// V is the Volterra part int_0^t h(t-u) Phi(u) du, H the Hankel part
// int_0^T h(t+u) Phi(u)^T du.
class PhiSystem {
 public:
  PhiSystem(const MultiKernel& kern, const Eigen::VectorXd& a, double step, std::size_t n)
      : d_(kern.dimension()), n_(n), step_(step), h_((2 * n + 1) * d_ * d_) {
    const std::size_t dd = d_ * d_;
    for (std::size_t m = 0; m <= 2 * n; ++m)
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j) h_[m * dd + i * d_ + j] = kern.entry(i, j)(step * m);
    f_.resize((n + 1) * dd);
    for (std::size_t k = 0; k <= n; ++k)
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j) f_[k * dd + i * d_ + j] = h_[k * dd + i * d_ + j] * a(j);
    Eigen::MatrixXd diag(d_, d_);
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = 0; j < d_; ++j) diag(i, j) = (i == j ? 1.0 : 0.0) - 0.5 * step * h_[i * d_ + j];
    diag_inv_ = diag.inverse();
  }

  std::size_t size() const noexcept { return f_.size(); }
  const Eigen::VectorXd& rhs() const noexcept { return f_; }

  // y = V x
  void volterra(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero(x.size());
    for (std::size_t k = 1; k <= n_; ++k) volterra_row(x, k, y, true);
  }

  // y = H x
  void hankel(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero(x.size());
    const std::size_t dd = d_ * d_;
    for (std::size_t k = 0; k <= n_; ++k) {
      double* out = y.data() + k * dd;
      for (std::size_t m = 0; m <= n_; ++m) {
        const double w = (m == 0 || m == n_) ? 0.5 * step_ : step_;
        const double* h = h_.data() + (k + m) * dd;
        const double* xm = x.data() + m * dd;
        if (d_ == 1) {
          out[0] += w * h[0] * xm[0];
          continue;
        }
        for (std::size_t i = 0; i < d_; ++i)
          for (std::size_t j = 0; j < d_; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < d_; ++l) acc += h[i * d_ + l] * xm[j * d_ + l];
            out[i * d_ + j] += w * acc;
          }
      }
    }
  }

  // Solves (I - V) y = r by forward substitution.
  void forward(const Eigen::VectorXd& r, Eigen::VectorXd& y) const {
    const std::size_t dd = d_ * d_;
    y = r;
    Eigen::MatrixXd block(d_, d_);
    for (std::size_t k = 1; k <= n_; ++k) {
      volterra_row(y, k, y, false);
      double* yk = y.data() + k * dd;
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j) block(i, j) = yk[i * d_ + j];
      block = diag_inv_ * block;
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j) yk[i * d_ + j] = block(i, j);
    }
  }

  // sup |f - (x - V x - H x)|
  double residual(const Eigen::VectorXd& x) const {
    Eigen::VectorXd vx, hx;
    volterra(x, vx);
    hankel(x, hx);
    return (f_ - x + vx + hx).cwiseAbs().maxCoeff();
  }

  Eigen::MatrixXd dense() const {
    const std::size_t dd = d_ * d_, size = f_.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(size, size);
    for (std::size_t k = 0; k <= n_; ++k)
      for (std::size_t mm = 0; mm <= n_; ++mm)
        for (std::size_t i = 0; i < d_; ++i)
          for (std::size_t j = 0; j < d_; ++j)
            for (std::size_t l = 0; l < d_; ++l) {
              const std::size_t row = k * dd + i * d_ + j;
              const double wh = (mm == 0 || mm == n_) ? 0.5 * step_ : step_;
              m(row, mm * dd + j * d_ + l) -= wh * h_[(k + mm) * dd + i * d_ + l];
              if (k >= 1 && mm <= k) {
                const double wv = (mm == 0 || mm == k) ? 0.5 * step_ : step_;
                m(row, mm * dd + l * d_ + j) -= wv * h_[(k - mm) * dd + i * d_ + l];
              }
            }
    return m;
  }

 private:
  // include_diag: accumulate the full row sum into y_k (y = V x). Otherwise add
  // the strictly lower part into y_k in place, for forward substitution.
  void volterra_row(const Eigen::VectorXd& x, std::size_t k, Eigen::VectorXd& y, bool include_diag) const {
    const std::size_t dd = d_ * d_;
    const std::size_t last = include_diag ? k : k - 1;
    double* out = y.data() + k * dd;
    if (d_ == 1) {
      const double* h = h_.data();
      const double* xv = x.data();
      double acc = 0.5 * h[k] * xv[0];
      for (std::size_t m = 1; m < k; ++m) acc += h[k - m] * xv[m];
      acc *= step_;
      if (include_diag) acc += 0.5 * step_ * h[0] * xv[k];
      out[0] += acc;
      return;
    }
    for (std::size_t m = 0; m <= last; ++m) {
      const double w = (m == 0 || m == k) ? 0.5 * step_ : step_;
      const double* h = h_.data() + (k - m) * dd;
      const double* xm = x.data() + m * dd;
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j < d_; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < d_; ++l) acc += h[i * d_ + l] * xm[l * d_ + j];
          out[i * d_ + j] += w * acc;
        }
    }
  }

  std::size_t d_;
  std::size_t n_;
  double step_;
  std::vector<double> h_;
  Eigen::VectorXd f_;
  Eigen::MatrixXd diag_inv_;
};

inline std::size_t grid_intervals(double step, double t_max) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("grid step must be > 0");
  if (!(t_max >= step)) throw ConfigError("grid t_max must be >= step");
  const double ratio = t_max / step;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-6) throw ConfigError("grid t_max must be a multiple of step");
  if (n > 400000) throw ConfigError("grid too fine: more than 400000 intervals");
  return static_cast<std::size_t>(n);
}

/// Label permutations sigma with h_{sigma(i) sigma(j)} = h_ij and p_{sigma(i)} = p_i.
inline std::vector<std::vector<std::size_t>> kernel_automorphisms(const MultiKernel& kern) {
  const auto d = kern.dimension();
  std::vector<std::size_t> sigma(d);
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> out;
  if (d > 8) return {sigma};
  do {
    bool keeps = true;
    for (std::size_t i = 0; i < d && keeps; ++i) {
      keeps = kern.baseline_weights()[sigma[i]] == kern.baseline_weights()[i];
      for (std::size_t j = 0; j < d && keeps; ++j) keeps = kern.entry(sigma[i], sigma[j]) == kern.entry(i, j);
    }
    if (keeps) out.push_back(sigma);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return out;
}

/// Replaces each Phi_ij by its mean over the orbit {(sigma i, sigma j)}, so the
/// solution carries the symmetries of the configuration exactly.
inline void average_over_automorphisms(Eigen::VectorXd& x, const MultiKernel& kern, std::size_t nodes) {
  const auto d = kern.dimension();
  const auto group = kernel_automorphisms(kern);
  if (group.size() < 2) return;
  std::vector<char> seen(d * d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (seen[i * d + j]) continue;
      std::vector<std::size_t> orbit;
      for (const auto& sigma : group) {
        const std::size_t e = sigma[i] * d + sigma[j];
        if (!seen[e]) {
          seen[e] = 1;
          orbit.push_back(e);
        }
      }
      if (orbit.size() < 2) continue;
      for (std::size_t k = 0; k < nodes; ++k) {
        double acc = 0.0;
        for (std::size_t e : orbit) acc += x(static_cast<Eigen::Index>(k * d * d + e));
        acc /= static_cast<double>(orbit.size());
        for (std::size_t e : orbit) x(static_cast<Eigen::Index>(k * d * d + e)) = acc;
      }
    }
}

inline CovarianceDensity solve_phi(const HawkesConfig& cfg, const PhiGrid& grid) {
  const MultiKernel& kern = cfg.kernel();
  const auto d = kern.dimension();
  const double t_max = grid.t_max ? *grid.t_max : default_t_max(kern, grid.step);
  const std::size_t n = grid_intervals(grid.step, t_max);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (std::abs(kern.entry(i, j).tail_mass(t_max)) >= 1e-8)
        throw ConfigError("t_max too small: kernel tail mass beyond t_max must be < 1e-8");

  PhiSystem sys(kern, cfg.unit_rates(), grid.step, n);
  CovarianceDensity out;
  out.step = grid.step;
  out.nodes = n + 1;
  out.dim = d;
  out.unit_rates = cfg.unit_rates();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.size());

  switch (grid.solver) {
    case PhiSolver::Gmres: {
      Eigen::VectorXd b;
      sys.forward(sys.rhs(), b);
      Eigen::VectorXd hx, lhx;
      auto apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& y) {
        sys.hankel(v, hx);
        sys.forward(hx, lhx);
        y = v - lhx;
      };
      x = b;
      const GmresResult res = gmres(apply, b, x, 1e-13, 300);
      if (!res.converged && res.relative_residual > 1e-9)
        throw NumericalError("covariance density: GMRES did not converge (relative residual " +
                             std::to_string(res.relative_residual) + ")");
      out.iterations = res.iterations;
      break;
    }
    case PhiSolver::Dense: {
      if (sys.size() > 4000) throw ConfigError("dense covariance solver limited to 4000 unknowns");
      const Eigen::MatrixXd a = sys.dense();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (!lu.isInvertible()) throw NumericalError("covariance density: singular discretised system");
      x = lu.solve(sys.rhs());
      break;
    }
    case PhiSolver::Picard: {
      if (!(2.0 * cfg.spectral_radius() < 1.0))
        throw ConfigError("Picard iteration requires 2 x spectral radius < 1; use the GMRES solver");
      Eigen::VectorXd vx, hx;
      for (int it = 1;; ++it) {
        sys.volterra(x, vx);
        sys.hankel(x, hx);
        Eigen::VectorXd next = sys.rhs() + vx + hx;
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        out.iterations = it;
        if (change <= 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
        if (it >= 20000) throw NumericalError("covariance density: Picard iteration did not converge");
      }
      break;
    }
  }
  average_over_automorphisms(x, kern, out.nodes);
  out.residual = sys.residual(x);
  if (!(out.residual < 1e-6))
    throw NumericalError("covariance density: residual " + std::to_string(out.residual) + " exceeds 1e-6");
  out.values.assign(x.data(), x.data() + x.size());
  return out;
}

}  // namespace detail

/// Grid solution of the univariate covariance-density equation
/// phi(t) = h(t)/(1-||h||) + int_0^inf h(t+v) phi(v) dv + int_0^t h(t-v) phi(v) dv.
inline CovarianceDensity solve_phi_grid(const Kernel& h, const PhiGrid& grid = {}) {
  return detail::solve_phi(HawkesConfig(1.0, h), grid);
}

/// Matrix covariance density Phi for unit baseline mu = 1.
inline CovarianceDensity solve_multivariate_phi(const MultiKernel& kern, const PhiGrid& grid = {}) {
  return detail::solve_phi(HawkesConfig(1.0, kern), grid);
}

/// phi(t) = alpha beta (2 beta - alpha) / (2 (beta - alpha)^2) exp(-(beta - alpha) t).
inline CovarianceDensity phi_exponential_closed_form(double alpha, double beta, const PhiGrid& grid = {}) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(alpha < beta)) throw StabilityError("stationarity requires alpha < beta");
  const ExponentialClosedForm cf{alpha * beta * (2.0 * beta - alpha) / (2.0 * (beta - alpha) * (beta - alpha)),
                                 beta - alpha};
  const double t_max =
      grid.t_max ? *grid.t_max : default_t_max(MultiKernel::univariate(Kernel::exponential(alpha, beta)), grid.step);
  const std::size_t n = detail::grid_intervals(grid.step, t_max);
  CovarianceDensity out;
  out.step = grid.step;
  out.nodes = n + 1;
  out.unit_rates = Eigen::VectorXd::Constant(1, 1.0 / (1.0 - alpha / beta));
  out.values.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.values[k] = cf.prefactor * std::exp(-cf.decay * grid.step * k);
  out.closed_form = cf;
  return out;
}

/// Trapezoid int_0^T exp(-omega t) phi_ij(t) dt over the grid.
inline double laplace_of_grid(const CovarianceDensity& phi, double omega, std::size_t i = 0, std::size_t j = 0) {
  double acc = 0.0;
  for (std::size_t k = 0; k < phi.nodes; ++k) {
    const double w = (k == 0 || k + 1 == phi.nodes) ? 0.5 : 1.0;
    acc += w * std::exp(-omega * phi.step * k) * phi.node(k, i, j);
  }
  return acc * phi.step;
}

/// Iterated integrals of Phi on the grid: I_ij(t) = int_0^t Phi_ij and
/// J_ij(t) = int_0^t I_ij, both by cumulative trapezoid. Everything else
/// (K, KK, Cov G) is assembled from J.
struct VarianceFunction {
  double step = 0.01;
  std::size_t nodes = 0;
  std::size_t dim = 1;
  Eigen::VectorXd unit_rates;
  std::vector<double> first;
  std::vector<double> second;
  double slope = 0.0;   // grid estimate a + 2 int_0^T phi (univariate)
  double offset = 0.0;  // grid estimate -2 int_0^T u phi(u) du (univariate)

  double t_max() const noexcept { return step * static_cast<double>(nodes - 1); }

  /// J_ij(t) by cubic Hermite interpolation (J' = I).
  double J(std::size_t i, std::size_t j, double t) const {
    if (t < 0.0 || t > t_max() * (1.0 + 1e-12)) throw RangeError("variance function: t outside grid");
    const double pos = t / step;
    const auto k = std::min(static_cast<std::size_t>(pos), nodes - 2);
    const double u = std::min(pos - static_cast<double>(k), 1.0);
    const std::size_t a = (k * dim + i) * dim + j, b = ((k + 1) * dim + i) * dim + j;
    if (u == 0.0) return second[a];
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    return h00 * second[a] + h10 * step * first[a] + h01 * second[b] + h11 * step * first[b];
  }

  /// Univariate K(t) = a t + 2 J(t).
  double K(double t) const { return unit_rates(0) * t + 2.0 * J(0, 0, t); }

  /// KK_ij(t) = a_i delta_ij t + J_ij(t) + J_ji(t).
  Eigen::MatrixXd K_matrix(double t) const {
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) m(i, j) = (i == j ? unit_rates(i) * t : 0.0) + J(i, j, t) + J(j, i, t);
    return m;
  }

  /// Cov(G_i(t), G_j(s)) for t >= s >= 0.
  double cov_ordered(std::size_t i, std::size_t j, double t, double s) const {
    return (i == j ? unit_rates(i) * s : 0.0) + J(i, j, t) + J(j, i, s) - J(i, j, t - s);
  }

  /// Cov(G_i(s), G_j(t)) for any s, t >= 0.
  double cov(std::size_t i, double s, std::size_t j, double t) const {
    if (s < 0.0 || t < 0.0) throw RangeError("limit covariance: times must be >= 0");
    return s >= t ? cov_ordered(i, j, s, t) : cov_ordered(j, i, t, s);
  }
};

inline VarianceFunction variance_function(const CovarianceDensity& phi) {
  if (phi.nodes < 2) throw ArgumentError("variance function: covariance density grid too short");
  VarianceFunction v;
  v.step = phi.step;
  v.nodes = phi.nodes;
  v.dim = phi.dim;
  v.unit_rates = phi.unit_rates;
  const std::size_t dd = phi.dim * phi.dim;
  v.first.assign(phi.values.size(), 0.0);
  v.second.assign(phi.values.size(), 0.0);
  for (std::size_t k = 1; k < phi.nodes; ++k)
    for (std::size_t e = 0; e < dd; ++e) {
      const std::size_t cur = k * dd + e, prev = cur - dd;
      v.first[cur] = v.first[prev] + 0.5 * phi.step * (phi.values[prev] + phi.values[cur]);
      v.second[cur] = v.second[prev] + 0.5 * phi.step * (v.first[prev] + v.first[cur]);
    }
  const std::size_t last = (phi.nodes - 1) * dd;
  const double t_max = phi.t_max();
  v.slope = v.unit_rates(0) + 2.0 * v.first[last];
  v.offset = 2.0 * (v.second[last] - t_max * v.first[last]);
  return v;
}

/// KK(t) matrix.
inline Eigen::MatrixXd multivariate_variance(const VarianceFunction& v, double t) { return v.K_matrix(t); }
inline Eigen::MatrixXd multivariate_variance(const CovarianceDensity& phi, double t) {
  return variance_function(phi).K_matrix(t);
}

/// Cov(G(t), G(s)) of the univariate FCLT limit.
inline double limit_covariance_G(const VarianceFunction& v, double s, double t) { return v.cov(0, s, 0, t); }

/// Matrix with entries Cov(G_i(t), G_j(s)).
inline Eigen::MatrixXd limit_covariance_multi(const VarianceFunction& v, double s, double t) {
  Eigen::MatrixXd m(v.dim, v.dim);
  for (std::size_t i = 0; i < v.dim; ++i)
    for (std::size_t j = 0; j < v.dim; ++j) m(i, j) = v.cov(i, t, j, s);
  return m;
}

/// lim K(t)/t = 1/(1-||h||)^3.
inline double asymptotic_slope(const Kernel& h) {
  const double a = 1.0 - h.l1_norm();
  if (!(a > 0.0)) throw StabilityError("asymptotic slope requires ||h|| < 1");
  return 1.0 / (a * a * a);
}

/// lim K(t) - t/(1-||h||)^3 from the Bartlett spectrum:
/// (1/(pi a^3)) int_R [a^2 - |1-hhat|^2] / (w^2 |1-hhat|^2) dw, a = 1-||h||.
inline double asymptotic_offset(const Kernel& h) {
  const double norm = h.l1_norm();
  const double a = 1.0 - norm;
  if (!(a > 0.0)) throw StabilityError("asymptotic offset requires ||h|| < 1");
  if (h.is_zero()) return 0.0;
  const double m1 = h.moment(1), m2 = h.moment(2);
  if (!std::isfinite(m2)) throw IntegrabilityError("asymptotic offset requires a finite second moment of h");

  auto g = [&](double w) {
    const Complex eps = h.transform_gap(w);
    const double mod2 = std::norm(a + eps);
    return -(2.0 * a * eps.real() + std::norm(eps)) / (w * w * mod2);
  };
  const double g0 = -(a * m2 + m1 * m1) / (a * a);

  constexpr double kLo = 1e-4, kHi = 1e4;
  auto simpson_log = [&](int per_decade) {
    const int n = 8 * per_decade;
    const double hl = (std::log(kHi) - std::log(kLo)) / n;
    double acc = 0.0;
    for (int m = 0; m <= n; ++m) {
      const double w = kLo * std::exp(hl * m);
      const double c = (m == 0 || m == n) ? 1.0 : (m % 2 ? 4.0 : 2.0);
      acc += c * g(w) * w;
    }
    return acc * hl / 3.0;
  };
  const double fine = simpson_log(400);
  const double coarse = simpson_log(200);
  if (!(std::abs(fine - coarse) <= 1e-7 * std::max(1.0, std::abs(fine))))
    throw NumericalError("asymptotic offset: Bartlett quadrature did not converge");
  const double head = g0 * kLo;
  const double tail = (a * a - 1.0) / kHi;
  return 2.0 * (head + fine + tail) / (M_PI * a * a * a);
}

/// Transform-domain solution for sum-of-exponential kernels.
struct LaplacePipelineResult {
  std::vector<ExpTerm> terms;
  double norm = 0.0;
  Eigen::VectorXd R;
  Eigen::MatrixXd M;
  Eigen::VectorXd X;  // phi-tilde(beta_i)
  double residual = 0.0;
  double condition_number = 1.0;

  /// phi-tilde(omega) = [htilde(w)/(1-||h||) + sum_j alpha_j X_j/(beta_j + w)] / (1 - htilde(w)).
  double phi_tilde(double omega) const {
    if (!(omega >= 0.0)) throw ArgumentError("phi_tilde requires omega >= 0");
    double ht = 0.0, hankel = 0.0;
    for (std::size_t j = 0; j < terms.size(); ++j) {
      ht += terms[j].alpha / (terms[j].beta + omega);
      hankel += terms[j].alpha * X(j) / (terms[j].beta + omega);
    }
    return (ht / (1.0 - norm) + hankel) / (1.0 - ht);
  }
};

inline LaplacePipelineResult laplace_pipeline(const Kernel& h) {
  const auto* s = h.as_sum_exp();
  if (!s) throw ArgumentError("laplace pipeline requires a sum-of-exponentials kernel");
  LaplacePipelineResult out;
  out.norm = h.l1_norm();
  if (!(out.norm < 1.0)) throw StabilityError("laplace pipeline requires ||h|| < 1");
  out.terms = s->terms;
  const auto d = static_cast<Eigen::Index>(out.terms.size());
  out.R.resize(d);
  out.M.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double bi = out.terms[i].beta;
    const double ht = h.laplace(bi);
    out.R(i) = ht / ((1.0 - ht) * (1.0 - out.norm));
    for (Eigen::Index j = 0; j < d; ++j) out.M(i, j) = out.terms[j].alpha / ((out.terms[j].beta + bi) * (1.0 - ht));
  }
  if (d == 0) {
    out.X.resize(0);
    return out;
  }
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - out.M;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto sv = svd.singularValues();
  out.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(out.condition_number < 1e14))
    throw NumericalError("laplace pipeline: I - M is singular (condition number " +
                         std::to_string(out.condition_number) + ")");
  out.X = A.fullPivLu().solve(out.R);
  out.residual = (A * out.X - out.R).cwiseAbs().maxCoeff();
  if (!(out.residual < 1e-10))
    throw NumericalError("laplace pipeline: residual " + std::to_string(out.residual) + " exceeds 1e-10");
  return out;
}

// CSV emitters.

inline void write_phi_csv(std::ostream& os, const CovarianceDensity& phi) {
  os.precision(17);
  if (phi.dim == 1) {
    os << "t,phi\n";
    for (std::size_t k = 0; k < phi.nodes; ++k) os << phi.step * k << ',' << phi.node(k) << '\n';
    return;
  }
  os << "t,i,j,phi\n";
  for (std::size_t k = 0; k < phi.nodes; ++k)
    for (std::size_t i = 0; i < phi.dim; ++i)
      for (std::size_t j = 0; j < phi.dim; ++j) os << phi.step * k << ',' << i << ',' << j << ',' << phi.node(k, i, j) << '\n';
}

inline void write_variance_csv(std::ostream& os, const VarianceFunction& v, std::size_t stride = 1) {
  os.precision(17);
  stride = std::max<std::size_t>(stride, 1);
  if (v.dim == 1) {
    os << "t,K\n";
    for (std::size_t k = 0; k < v.nodes; k += stride) os << v.step * k << ',' << v.K(v.step * k) << '\n';
    return;
  }
  os << "t,i,j,K\n";
  for (std::size_t k = 0; k < v.nodes; k += stride) {
    const Eigen::MatrixXd m = v.K_matrix(v.step * k);
    for (std::size_t i = 0; i < v.dim; ++i)
      for (std::size_t j = 0; j < v.dim; ++j) os << v.step * k << ',' << i << ',' << j << ',' << m(i, j) << '\n';
  }
}

/// Triangular (s <= t) dump of Cov(G(t), G(s)) over the given times.
inline void write_cov_G_csv(std::ostream& os, const VarianceFunction& v, std::span<const double> times) {
  os.precision(17);
  os << "s,t,cov\n";
  for (std::size_t a = 0; a < times.size(); ++a)
    for (std::size_t b = a; b < times.size(); ++b) {
      const double s = std::min(times[a], times[b]), t = std::max(times[a], times[b]);
      os << s << ',' << t << ',' << limit_covariance_G(v, s, t) << '\n';
    }
}

}  // namespace hawkesq
