#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "hawkesq/errors.hpp"
#include "hawkesq/rng.hpp"

namespace hawkesq {

using Complex = std::complex<double>;

/// One term alpha * exp(-beta t) of a sum-of-exponentials kernel.
struct ExpTerm {
  double alpha = 0.0;
  double beta = 1.0;

  bool operator==(const ExpTerm&) const = default;
};

/// h(t) = sum_i alpha_i exp(-beta_i t). Mixed-sign alphas are admitted as long
/// as h stays nonnegative.
struct SumOfExponentials {
  std::vector<ExpTerm> terms;

  bool operator==(const SumOfExponentials&) const = default;
};

/// h(t) = amplitude / (1 + scale t)^exponent.
struct PowerLaw {
  double scale = 1.0;
  double exponent = 2.0;
  double amplitude = 1.0;

  bool operator==(const PowerLaw&) const = default;
};

/// Samples h(k step), k = 0..n-1, linearly interpolated; zero beyond the last node.
struct Tabulated {
  double step = 0.01;
  std::vector<double> values;

  bool operator==(const Tabulated&) const = default;
};

namespace detail {

/// Exact integral of exp(z t) times the linear interpolant of (t0,y0)-(t1,y1).
inline Complex linear_segment_transform(double t0, double t1, double y0, double y1, Complex z) {
  const double width = t1 - t0;
  const Complex x = z * width;
  Complex e1;
  Complex e2;
  if (std::abs(x) < 1e-3) {
    e1 = 1.0 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720.0))));
    e2 = 0.5 + x * (1.0 / 3 + x * (1.0 / 8 + x * (1.0 / 30 + x * (1.0 / 144 + x / 840.0))));
  } else {
    const Complex ex = std::exp(x);
    e1 = (ex - 1.0) / x;
    e2 = (ex * (x - 1.0) + 1.0) / (x * x);
  }
  return std::exp(z * t0) * width * (y0 * e1 + (y1 - y0) * e2);
}

/// int_{t0}^{t1} (1 - exp(i omega t)) y(t) dt for the linear interpolant y.
inline Complex linear_segment_gap(double t0, double t1, double y0, double y1, double omega) {
  const double width = t1 - t0;
  const Complex x(0.0, omega * width);
  Complex e1m1;  // e1 - 1
  Complex e2mh;  // e2 - 1/2
  if (std::abs(x) < 1e-3) {
    e1m1 = x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720.0))));
    e2mh = x * (1.0 / 3 + x * (1.0 / 8 + x * (1.0 / 30 + x * (1.0 / 144 + x / 840.0))));
  } else {
    const Complex ex = std::exp(x);
    e1m1 = (ex - 1.0) / x - 1.0;
    e2mh = (ex * (x - 1.0) + 1.0) / (x * x) - 0.5;
  }
  const double b = omega * t0;
  const double sh = std::sin(0.5 * b);
  const Complex shift_m1(-2.0 * sh * sh, std::sin(b));  // exp(i b) - 1
  // (1 - shift e1) = -(shift_m1 e1 + (e1 - 1)) with e1 = 1 + e1m1, likewise for e2
  const Complex g1 = -(shift_m1 * (1.0 + e1m1) + e1m1);
  const Complex g2 = -(shift_m1 * (0.5 + e2mh) + e2mh);
  return width * (y0 * g1 + (y1 - y0) * g2);
}

/// Exact transform sum over a piecewise-linear function on arbitrary nodes.
inline Complex piecewise_linear_transform(std::span<const double> nodes, std::span<const double> values,
                                          Complex z) {
  Complex acc = 0.0;
  for (std::size_t m = 0; m + 1 < nodes.size(); ++m)
    acc += linear_segment_transform(nodes[m], nodes[m + 1], values[m], values[m + 1], z);
  return acc;
}

}  // namespace detail

/// Exciting function of a Hawkes process. Immutable once constructed.
class Kernel {
 public:
  using Variant = std::variant<SumOfExponentials, PowerLaw, Tabulated>;

  Kernel() : Kernel(SumOfExponentials{}) {}

  explicit Kernel(Variant v) : v_(std::move(v)) { validate(); }

  static Kernel zero() { return Kernel(SumOfExponentials{}); }
  static Kernel exponential(double alpha, double beta) { return Kernel(SumOfExponentials{{{alpha, beta}}}); }
  static Kernel sum_of_exponentials(std::vector<ExpTerm> terms) { return Kernel(SumOfExponentials{std::move(terms)}); }
  static Kernel power_law(double scale, double exponent, double amplitude) {
    return Kernel(PowerLaw{scale, exponent, amplitude});
  }
  static Kernel tabulated(double step, std::vector<double> values) { return Kernel(Tabulated{step, std::move(values)}); }

  const Variant& variant() const noexcept { return v_; }
  /// Same representation and parameters.
  bool operator==(const Kernel& other) const { return v_ == other.v_; }

  const SumOfExponentials* as_sum_exp() const noexcept { return std::get_if<SumOfExponentials>(&v_); }
  const PowerLaw* as_power_law() const noexcept { return std::get_if<PowerLaw>(&v_); }
  const Tabulated* as_tabulated() const noexcept { return std::get_if<Tabulated>(&v_); }

  /// True when h vanishes identically.
  bool is_zero() const noexcept { return zero_; }

  double operator()(double t) const {
    if (t < 0.0) return 0.0;
    return std::visit([t](const auto& k) { return eval(k, t); }, v_);
  }

  /// ||h||_L1. Closed form for parametric kernels, trapezoid for tabulated ones.
  double l1_norm() const {
    if (const auto* p = as_power_law(); p && p->amplitude > 0.0 && p->exponent <= 1.0)
      throw IntegrabilityError("power-law kernel with exponent <= 1 is not integrable");
    return norm_;
  }

  /// Laplace transform at omega > 0.
  double laplace(double omega) const {
    if (!(omega > 0.0)) throw ArgumentError("laplace transform requires omega > 0");
    if (zero_) return 0.0;
    if (const auto* s = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : s->terms) acc += term.alpha / (term.beta + omega);
      return acc;
    }
    if (const auto* p = as_power_law()) {
      boost::math::quadrature::exp_sinh<double> integrator;
      const double a = p->amplitude, d = p->scale, g = p->exponent;
      return integrator.integrate([=](double t) { return a * std::exp(-omega * t) / std::pow(1.0 + d * t, g); },
                                  0.0, std::numeric_limits<double>::infinity(), 1e-12);
    }
    return detail::piecewise_linear_transform(nodes_, samples_, Complex(-omega, 0.0)).real();
  }

  /// hat h(omega) = int_0^inf exp(i omega t) h(t) dt.
  Complex fourier(double omega) const {
    if (zero_) return 0.0;
    if (omega == 0.0) return l1_norm();
    if (const auto* s = as_sum_exp()) {
      Complex acc = 0.0;
      for (const auto& term : s->terms) acc += term.alpha / Complex(term.beta, -omega);
      return acc;
    }
    Complex acc = detail::piecewise_linear_transform(nodes_, samples_, Complex(0.0, omega));
    if (as_power_law()) {
      // leading term of the asymptotic expansion of the neglected tail
      const double tc = nodes_.back();
      acc += -std::exp(Complex(0.0, omega * tc)) * samples_.back() / Complex(0.0, omega);
    }
    return acc;
  }

  /// int_0^inf (1 - exp(i omega t)) h(t) dt = ||h|| - hat h(omega), evaluated
  /// without cancellation at small omega. Non-exponential kernels use their
  /// piecewise-linear representation consistently for both terms.
  Complex transform_gap(double omega) const {
    if (zero_ || omega == 0.0) return 0.0;
    if (const auto* s = as_sum_exp()) {
      Complex acc = 0.0;
      for (const auto& term : s->terms) acc += term.alpha * Complex(0.0, -omega) / (term.beta * Complex(term.beta, -omega));
      return acc;
    }
    Complex acc = 0.0;
    for (std::size_t m = 0; m + 1 < nodes_.size(); ++m)
      acc += detail::linear_segment_gap(nodes_[m], nodes_[m + 1], samples_[m], samples_[m + 1], omega);
    return acc;
  }

  /// int_0^inf exp(theta t) h(t) dt for theta >= 0; +inf when divergent.
  double tilted_mass(double theta) const {
    if (zero_) return 0.0;
    if (theta == 0.0) return l1_norm();
    if (const auto* k = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : k->terms) {
        if (term.alpha == 0.0) continue;
        if (theta >= term.beta) return std::numeric_limits<double>::infinity();
        acc += term.alpha / (term.beta - theta);
      }
      return acc;
    }
    if (as_power_law()) return std::numeric_limits<double>::infinity();
    return detail::piecewise_linear_transform(nodes_, samples_, Complex(theta, 0.0)).real();
  }

  /// H(s) = int_s^inf h.
  double tail_mass(double s) const {
    if (zero_) return 0.0;
    s = std::max(s, 0.0);
    if (const auto* k = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : k->terms) acc += term.alpha / term.beta * std::exp(-term.beta * s);
      return acc;
    }
    if (const auto* p = as_power_law()) {
      (void)l1_norm();
      return p->amplitude / (p->scale * (p->exponent - 1.0)) * std::pow(1.0 + p->scale * s, 1.0 - p->exponent);
    }
    return tabulated_tail(s, 0);
  }

  /// int_s^inf H(x) dx = int_s^inf (x - s) h(x) dx; +inf when divergent.
  double integrated_tail(double s) const {
    if (zero_) return 0.0;
    s = std::max(s, 0.0);
    if (const auto* k = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : k->terms) acc += term.alpha / (term.beta * term.beta) * std::exp(-term.beta * s);
      return acc;
    }
    if (const auto* p = as_power_law()) {
      if (p->exponent <= 2.0) return std::numeric_limits<double>::infinity();
      const double d = p->scale, g = p->exponent;
      return p->amplitude / (d * d * (g - 1.0) * (g - 2.0)) * std::pow(1.0 + d * s, 2.0 - g);
    }
    return tabulated_tail(s, 1);
  }

  /// int_0^inf t^order h(t) dt for order in {0, 1, 2}; +inf when divergent.
  double moment(int order) const {
    if (order < 0 || order > 2) throw ArgumentError("moment order must be 0, 1 or 2");
    if (zero_) return 0.0;
    if (order == 0) return l1_norm();
    if (const auto* k = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : k->terms)
        acc += term.alpha * (order == 1 ? 1.0 : 2.0) / std::pow(term.beta, order + 1);
      return acc;
    }
    if (const auto* p = as_power_law()) {
      const double d = p->scale, g = p->exponent, c = p->amplitude;
      if (order == 1) return g > 2.0 ? c / (d * d * (g - 1.0) * (g - 2.0)) : std::numeric_limits<double>::infinity();
      return g > 3.0 ? 2.0 * c / (d * d * d * (g - 1.0) * (g - 2.0) * (g - 3.0))
                     : std::numeric_limits<double>::infinity();
    }
    const auto& tab = std::get<Tabulated>(v_);
    const double w = tab.step;
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < tab.values.size(); ++m) {
      const double t0 = m * w, y0 = tab.values[m], y1 = tab.values[m + 1], dy = y1 - y0;
      if (order == 1)
        acc += w * (t0 * (y0 + y1) / 2.0 + w * (y0 + 2.0 * y1) / 6.0);
      else
        acc += w * (t0 * t0 * (y0 + dy / 2.0) + 2.0 * t0 * w * (y0 / 2.0 + dy / 3.0) + w * w * (y0 / 3.0 + dy / 4.0));
    }
    return acc;
  }

  /// Mean offspring delay int t h / ||h||; zero for the zero kernel.
  double decay_scale() const {
    if (zero_) return 0.0;
    const double m1 = moment(1);
    return std::isfinite(m1) ? m1 / l1_norm() : std::numeric_limits<double>::infinity();
  }

  /// Upper bound of h on [a, b] (0 <= a <= b) used by thinning.
  double sup_on(double a, double b) const {
    if (zero_ || b < 0.0) return 0.0;
    a = std::max(a, 0.0);
    if (const auto* k = as_sum_exp()) {
      double acc = 0.0;
      for (const auto& term : k->terms)
        if (term.alpha > 0.0) acc += term.alpha * std::exp(-term.beta * a);
      return acc;
    }
    if (as_power_law()) return (*this)(a);
    const auto& tab = std::get<Tabulated>(v_);
    double best = std::max((*this)(a), (*this)(b));
    const auto first = static_cast<std::size_t>(std::ceil(a / tab.step));
    for (std::size_t m = first; m < tab.values.size() && m * tab.step <= b; ++m) best = std::max(best, tab.values[m]);
    return best;
  }

  /// Length of the look-ahead window over which sup_on gives a valid majorant.
  double majorant_window() const {
    if (const auto* tab = as_tabulated()) return tab->step;
    return std::numeric_limits<double>::infinity();
  }

  /// Time beyond which h is treated as zero for history pruning.
  double support_end() const {
    if (zero_) return 0.0;
    if (const auto* tab = as_tabulated()) return tab->step * static_cast<double>(tab->values.size() - 1);
    if (const auto* k = as_sum_exp()) {
      double end = 0.0;
      for (const auto& term : k->terms)
        if (term.alpha != 0.0) end = std::max(end, 745.0 / term.beta);
      return end;
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Draws a birth delay from the density h / ||h||.
  double sample_delay(Stream& rng) const {
    if (zero_) throw ArgumentError("cannot sample a delay from the zero kernel");
    if (const auto* k = as_sum_exp()) {
      for (;;) {
        double u = rng.uniform() * positive_mass_;
        const ExpTerm* pick = nullptr;
        for (const auto& term : k->terms) {
          if (term.alpha <= 0.0) continue;
          pick = &term;
          u -= term.alpha / term.beta;
          if (u <= 0.0) break;
        }
        const double t = rng.exponential(pick->beta);
        if (!mixed_sign_) return t;
        double envelope = 0.0;
        for (const auto& term : k->terms)
          if (term.alpha > 0.0) envelope += term.alpha * std::exp(-term.beta * t);
        if (rng.uniform() * envelope <= (*this)(t)) return t;
      }
    }
    if (const auto* p = as_power_law()) {
      (void)l1_norm();
      return (std::pow(rng.uniform(), 1.0 / (1.0 - p->exponent)) - 1.0) / p->scale;
    }
    const auto& tab = std::get<Tabulated>(v_);
    const double target = rng.uniform() * norm_;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                                cumulative_.size() - 1) - 1;
    const double rest = target - cumulative_[m];
    const double y0 = tab.values[m], y1 = tab.values[m + 1];
    const double slope = (y1 - y0) / tab.step;
    const double disc = std::max(y0 * y0 + 2.0 * slope * rest, 0.0);
    const double denom = y0 + std::sqrt(disc);
    const double x = denom > 0.0 ? 2.0 * rest / denom : 0.0;
    return m * tab.step + std::clamp(x, 0.0, tab.step);
  }

 private:
  static double eval(const SumOfExponentials& k, double t) {
    double acc = 0.0;
    for (const auto& term : k.terms) acc += term.alpha * std::exp(-term.beta * t);
    return acc;
  }
  static double eval(const PowerLaw& k, double t) { return k.amplitude / std::pow(1.0 + k.scale * t, k.exponent); }
  static double eval(const Tabulated& k, double t) {
    const double pos = t / k.step;
    const auto m = static_cast<std::size_t>(pos);
    if (m + 1 >= k.values.size()) return (m + 1 == k.values.size() && pos == double(m)) ? k.values[m] : 0.0;
    const double frac = pos - static_cast<double>(m);
    return k.values[m] + frac * (k.values[m + 1] - k.values[m]);
  }

  // order 0: int_s^inf h ; order 1: int_s^inf (x - s) h(x) dx, for the interpolant.
  double tabulated_tail(double s, int order) const {
    const auto& tab = std::get<Tabulated>(v_);
    const double w = tab.step;
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < tab.values.size(); ++m) {
      double t0 = m * w, t1 = t0 + w;
      if (t1 <= s) continue;
      double y0 = tab.values[m], y1 = tab.values[m + 1];
      if (t0 < s) {
        y0 = (*this)(s);
        t0 = s;
      }
      const double width = t1 - t0;
      if (order == 0)
        acc += width * (y0 + y1) / 2.0;
      else
        acc += width * ((t0 - s) * (y0 + y1) / 2.0 + width * (y0 + 2.0 * y1) / 6.0);
    }
    return acc;
  }

  void validate() {
    if (auto* k = std::get_if<SumOfExponentials>(&v_)) {
      double min_beta = std::numeric_limits<double>::infinity();
      double abs_sum = 0.0;
      for (const auto& term : k->terms) {
        if (!(term.beta > 0.0) || !std::isfinite(term.beta)) throw ConfigError("sum_exp: beta must be > 0");
        if (!std::isfinite(term.alpha)) throw ConfigError("sum_exp: alpha must be finite");
        if (term.alpha < 0.0) mixed_sign_ = true;
        if (term.alpha > 0.0) positive_mass_ += term.alpha / term.beta;
        if (term.alpha != 0.0) min_beta = std::min(min_beta, term.beta);
        abs_sum += std::abs(term.alpha);
        norm_ += term.alpha / term.beta;
      }
      zero_ = abs_sum == 0.0;
      if (mixed_sign_) {
        constexpr int kProbes = 10000;
        const double end = 20.0 / min_beta;
        for (int i = 0; i <= kProbes; ++i) {
          const double t = end * i / kProbes;
          if (eval(*k, t) < -1e-12 * abs_sum)
            throw ConfigError("sum_exp: mixed-sign kernel is negative at t = " + std::to_string(t));
        }
      }
    } else if (auto* p = std::get_if<PowerLaw>(&v_)) {
      if (!(p->scale > 0.0)) throw ConfigError("power_law: scale must be > 0");
      if (!(p->exponent > 0.0)) throw ConfigError("power_law: exponent must be > 0");
      if (!(p->amplitude >= 0.0)) throw ConfigError("power_law: amplitude must be >= 0");
      zero_ = p->amplitude == 0.0;
      if (!zero_ && p->exponent > 1.0) {
        norm_ = p->amplitude / (p->scale * (p->exponent - 1.0));
        build_power_law_nodes(*p);
      }
    } else {
      auto& tab = std::get<Tabulated>(v_);
      if (!(tab.step > 0.0)) throw ConfigError("tabulated: step must be > 0");
      if (tab.values.empty()) throw ConfigError("tabulated: values must be non-empty");
      for (double y : tab.values)
        if (!(y >= 0.0) || !std::isfinite(y)) throw ConfigError("tabulated: values must be finite and >= 0");
      if (tab.values.size() == 1) tab.values.push_back(0.0);
      zero_ = std::all_of(tab.values.begin(), tab.values.end(), [](double y) { return y == 0.0; });
      cumulative_.assign(tab.values.size(), 0.0);
      nodes_.resize(tab.values.size());
      for (std::size_t m = 0; m < tab.values.size(); ++m) {
        nodes_[m] = m * tab.step;
        if (m > 0) cumulative_[m] = cumulative_[m - 1] + tab.step * (tab.values[m - 1] + tab.values[m]) / 2.0;
      }
      samples_ = tab.values;
      norm_ = cumulative_.back();
    }
  }

  // Geometric nodes out to where h drops below 1e-12 h(0); the interpolant's
  // transform is integrated exactly (Filon-type), so oscillation is harmless.
  void build_power_law_nodes(const PowerLaw& p) {
    const double cutoff = (std::pow(1e12, 1.0 / p.exponent) - 1.0) / p.scale;
    constexpr double kRel = 2e-3;
    nodes_.push_back(0.0);
    while (nodes_.back() < cutoff) nodes_.push_back(nodes_.back() + kRel * (1.0 / p.scale + nodes_.back()));
    samples_.reserve(nodes_.size());
    for (double t : nodes_) samples_.push_back(eval(p, t));
  }

  Variant v_;
  double norm_ = 0.0;
  double positive_mass_ = 0.0;
  bool mixed_sign_ = false;
  bool zero_ = false;
  std::vector<double> nodes_;
  std::vector<double> samples_;
  std::vector<double> cumulative_;
};

inline double l1_norm(const Kernel& k) { return k.l1_norm(); }
inline double laplace_transform(const Kernel& k, double omega) { return k.laplace(omega); }
inline Complex fourier_transform(const Kernel& k, double omega) { return k.fourier(omega); }

/// Generic adaptive-quadrature Laplace transform from point evaluations; an
/// independent route used to cross-check the closed forms.
inline double laplace_transform_quadrature(const Kernel& k, double omega) {
  if (!(omega > 0.0)) throw ArgumentError("laplace transform requires omega > 0");
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double t) { return std::exp(-omega * t) * k(t); }, 0.0,
                              std::numeric_limits<double>::infinity(), 1e-13);
}

/// k x k matrix of kernels h_ij (effect of type-j events on type-i intensity)
/// plus baseline weights p_i.
class MultiKernel {
 public:
  MultiKernel() : MultiKernel(1, {Kernel::zero()}, {1.0}) {}

  MultiKernel(std::size_t dimension, std::vector<Kernel> entries, std::vector<double> weights)
      : k_(dimension), entries_(std::move(entries)), weights_(std::move(weights)) {
    if (k_ == 0) throw ConfigError("multivariate kernel: dimension must be >= 1");
    if (entries_.size() != k_ * k_) throw ConfigError("multivariate kernel: expected k*k entries");
    if (weights_.size() != k_) throw ConfigError("multivariate kernel: expected k baseline weights");
    for (double p : weights_)
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("multivariate kernel: baseline weights must be >= 0");
    norms_.resize(k_, k_);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j < k_; ++j) norms_(i, j) = entry(i, j).l1_norm();
  }

  static MultiKernel univariate(Kernel h) { return MultiKernel(1, {std::move(h)}, {1.0}); }

  std::size_t dimension() const noexcept { return k_; }
  const Kernel& entry(std::size_t i, std::size_t j) const { return entries_.at(i * k_ + j); }
  const std::vector<double>& baseline_weights() const noexcept { return weights_; }
  /// Matrix of L1 norms (||h_ij||).
  const Eigen::MatrixXd& norm_matrix() const noexcept { return norms_; }

  bool all_sum_exp() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Kernel& h) { return h.as_sum_exp() != nullptr; });
  }

 private:
  std::size_t k_;
  std::vector<Kernel> entries_;
  std::vector<double> weights_;
  Eigen::MatrixXd norms_;
};

/// Largest eigenvalue modulus of a nonnegative matrix (its Perron root).
inline double spectral_radius(const Eigen::MatrixXd& m) {
  const auto n = m.rows();
  if (n != m.cols() || n == 0) throw ArgumentError("spectral_radius: square nonempty matrix required");
  if ((m.array() < 0.0).any()) throw ArgumentError("spectral_radius: matrix must be nonnegative");
  if (!m.allFinite()) throw ArgumentError("spectral_radius: matrix must be finite");
  if (n == 1) return m(0, 0);
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const MultiKernel& multi) { return spectral_radius(multi.norm_matrix()); }

/// Baseline scale mu together with the (possibly multivariate) kernel.
/// Construction enforces stationarity: spectral radius of the norm matrix < 1.
class HawkesConfig {
 public:
  HawkesConfig(double mu, MultiKernel kernel) : mu_(mu), kernel_(std::move(kernel)) {
    if (!(mu_ > 0.0) || !std::isfinite(mu_)) throw ConfigError("baseline mu must be finite and > 0");
    radius_ = hawkesq::spectral_radius(kernel_);
    if (!(radius_ < 1.0))
      throw StabilityError("stationarity requires spectral radius < 1, got " + std::to_string(radius_));
    const auto k = kernel_.dimension();
    Eigen::VectorXd p(k);
    for (std::size_t i = 0; i < k; ++i) p(i) = kernel_.baseline_weights()[i];
    a_ = (Eigen::MatrixXd::Identity(k, k) - kernel_.norm_matrix()).partialPivLu().solve(p);
    for (std::size_t i = 0; i < k; ++i)
      if (!(a_(i) > 0.0) || !std::isfinite(a_(i)))
        throw ConfigError("mean rate of dimension " + std::to_string(i) + " must be finite and positive");
  }

  HawkesConfig(double mu, Kernel kernel) : HawkesConfig(mu, MultiKernel::univariate(std::move(kernel))) {}

  double mu() const noexcept { return mu_; }
  const MultiKernel& kernel() const noexcept { return kernel_; }
  std::size_t dimension() const noexcept { return kernel_.dimension(); }
  double spectral_radius() const noexcept { return radius_; }
  /// a = (I - H)^{-1} p; the unit-baseline mean rate vector.
  const Eigen::VectorXd& unit_rates() const noexcept { return a_; }
  /// lambda-bar = mu * a.
  Eigen::VectorXd mean_rates() const { return mu_ * a_; }
  double baseline(std::size_t i) const { return mu_ * kernel_.baseline_weights().at(i); }

 private:
  double mu_;
  MultiKernel kernel_;
  double radius_ = 0.0;
  Eigen::VectorXd a_;
};

}  // namespace hawkesq
