#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "hawkesq/errors.hpp"
#include "hawkesq/rng.hpp"

namespace hawkesq {

struct ExponentialService {
  double rate = 1.0;
};

struct DeterministicService {
  double duration = 1.0;
};

/// log(eta) ~ Normal(log_mean, log_sd).
struct LogNormalService {
  double log_mean = 0.0;
  double log_sd = 1.0;
};

/// Piecewise-linear quantile function through (k/(n-1), values[k]).
struct TabulatedInverseCdf {
  std::vector<double> values;
};

/// Service-time distribution F with F(0) = 0. Sampling is by inverse CDF, one
/// uniform per customer.
class ServiceDistribution {
 public:
  using Variant = std::variant<ExponentialService, DeterministicService, LogNormalService, TabulatedInverseCdf>;

  ServiceDistribution() : ServiceDistribution(ExponentialService{}) {}
  explicit ServiceDistribution(Variant v) : v_(std::move(v)) { validate(); }

  static ServiceDistribution exponential(double rate) { return ServiceDistribution(ExponentialService{rate}); }
  static ServiceDistribution deterministic(double d) { return ServiceDistribution(DeterministicService{d}); }
  static ServiceDistribution lognormal(double m, double s) { return ServiceDistribution(LogNormalService{m, s}); }
  static ServiceDistribution tabulated_inverse_cdf(std::vector<double> values) {
    return ServiceDistribution(TabulatedInverseCdf{std::move(values)});
  }

  const Variant& variant() const noexcept { return v_; }
  const ExponentialService* as_exponential() const noexcept { return std::get_if<ExponentialService>(&v_); }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ExponentialService>) {
            return -std::expm1(-d.rate * x);
          } else if constexpr (std::is_same_v<T, DeterministicService>) {
            return x >= d.duration ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<T, LogNormalService>) {
            return 0.5 * std::erfc(-(std::log(x) - d.log_mean) / (d.log_sd * M_SQRT2));
          } else {
            const auto& q = d.values;
            if (x >= q.back()) return 1.0;
            if (x < q.front()) return 0.0;
            const auto it = std::upper_bound(q.begin(), q.end(), x);
            const auto m = static_cast<std::size_t>(it - q.begin()) - 1;
            const double n = static_cast<double>(q.size() - 1);
            return (static_cast<double>(m) + (x - q[m]) / (q[m + 1] - q[m])) / n;
          }
        },
        v_);
  }

  /// 1 - F(x) = P(eta > x).
  double survival(double x) const {
    if (const auto* e = as_exponential()) return x <= 0.0 ? 1.0 : std::exp(-e->rate * x);
    if (const auto* l = std::get_if<LogNormalService>(&v_))
      return x <= 0.0 ? 1.0 : 0.5 * std::erfc((std::log(x) - l->log_mean) / (l->log_sd * M_SQRT2));
    return 1.0 - cdf(x);
  }

  /// Average of the left and right limits of the survival function; equals
  /// survival(x) away from atoms. Used as a quadrature node value.
  double survival_node(double x) const {
    if (is_continuous()) return survival(x);
    const double right = survival(x);
    const double left = x <= 0.0 ? 1.0 : survival(std::nextafter(x, -INFINITY));
    return 0.5 * (left + right);
  }

  double inverse_cdf(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw ArgumentError("inverse_cdf requires u in (0, 1)");
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ExponentialService>) {
            return -std::log1p(-u) / d.rate;
          } else if constexpr (std::is_same_v<T, DeterministicService>) {
            return d.duration;
          } else if constexpr (std::is_same_v<T, LogNormalService>) {
            return std::exp(d.log_mean + d.log_sd * boost::math::quantile(boost::math::normal(), u));
          } else {
            const double pos = u * static_cast<double>(d.values.size() - 1);
            const auto m = std::min(static_cast<std::size_t>(pos), d.values.size() - 2);
            return d.values[m] + (pos - static_cast<double>(m)) * (d.values[m + 1] - d.values[m]);
          }
        },
        v_);
  }

  double sample(Stream& rng) const { return inverse_cdf(rng.uniform()); }

  double mean() const {
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ExponentialService>) {
            return 1.0 / d.rate;
          } else if constexpr (std::is_same_v<T, DeterministicService>) {
            return d.duration;
          } else if constexpr (std::is_same_v<T, LogNormalService>) {
            return std::exp(d.log_mean + 0.5 * d.log_sd * d.log_sd);
          } else {
            double acc = 0.0;
            for (std::size_t m = 0; m + 1 < d.values.size(); ++m) acc += 0.5 * (d.values[m] + d.values[m + 1]);
            return acc / static_cast<double>(d.values.size() - 1);
          }
        },
        v_);
  }

  /// int_0^x (1 - F(u)) du.
  double integrated_survival(double x) const {
    if (x <= 0.0) return 0.0;
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ExponentialService>) {
            return -std::expm1(-d.rate * x) / d.rate;
          } else if constexpr (std::is_same_v<T, DeterministicService>) {
            return std::min(x, d.duration);
          } else if constexpr (std::is_same_v<T, LogNormalService>) {
            // E[min(eta, x)] = E[eta; eta <= x] + x P(eta > x)
            const double s = d.log_sd, z = (std::log(x) - d.log_mean) / s;
            const double partial = mean() * 0.5 * std::erfc(-(z - s) / M_SQRT2);
            return partial + x * survival(x);
          } else {
            const auto& q = d.values;
            const double n = static_cast<double>(q.size() - 1);
            double acc = std::min(x, q.front());
            for (std::size_t m = 0; m + 1 < q.size() && q[m] < x; ++m) {
              const double hi = std::min(q[m + 1], x);
              if (hi <= q[m]) continue;
              const double s0 = 1.0 - static_cast<double>(m) / n;
              const double s1 = s0 - (hi - q[m]) / (q[m + 1] - q[m]) / n;
              acc += 0.5 * (s0 + s1) * (hi - q[m]);
            }
            return acc;
          }
        },
        v_);
  }

  /// R(w) = int_0^inf (1-F(u)) (1-F(u+w)) du for w >= 0.
  double survival_autocorrelation(double w) const {
    w = std::abs(w);
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ExponentialService>) {
            return std::exp(-d.rate * w) / (2.0 * d.rate);
          } else if constexpr (std::is_same_v<T, DeterministicService>) {
            return std::max(d.duration - w, 0.0);
          } else if constexpr (std::is_same_v<T, LogNormalService>) {
            boost::math::quadrature::exp_sinh<double> integrator;
            return integrator.integrate([&](double u) { return survival(u) * survival(u + w); }, 0.0,
                                        std::numeric_limits<double>::infinity(), 1e-12);
          } else {
            // Both factors are linear between the merged breakpoints, so
            // two-point Gauss-Legendre is exact there.
            const auto& q = d.values;
            std::vector<double> cuts{0.0};
            for (double v : q) {
              cuts.push_back(v);
              cuts.push_back(v - w);
            }
            std::sort(cuts.begin(), cuts.end());
            const double g = 0.5 / std::sqrt(3.0);
            double acc = 0.0;
            for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
              const double lo = std::max(cuts[m], 0.0), hi = cuts[m + 1];
              if (hi <= lo) continue;
              const double mid = 0.5 * (lo + hi), len = hi - lo;
              auto f = [&](double u) { return survival(u) * survival(u + w); };
              acc += 0.5 * len * (f(mid - g * len) + f(mid + g * len));
            }
            return acc;
          }
        },
        v_);
  }

  /// Point beyond which 1 - F < eps.
  double tail_point(double eps) const { return inverse_cdf(1.0 - eps); }

  bool is_continuous() const {
    if (std::holds_alternative<DeterministicService>(v_)) return false;
    if (const auto* t = std::get_if<TabulatedInverseCdf>(&v_)) {
      for (std::size_t m = 0; m + 1 < t->values.size(); ++m)
        if (t->values[m + 1] == t->values[m]) return false;
    }
    return true;
  }

  std::string name() const {
    constexpr const char* names[] = {"exponential", "deterministic", "lognormal", "tabulated_inverse_cdf"};
    return names[v_.index()];
  }

 private:
  void validate() {
    if (const auto* e = std::get_if<ExponentialService>(&v_)) {
      if (!(e->rate > 0.0) || !std::isfinite(e->rate)) throw ConfigError("exponential service: rate must be > 0");
    } else if (const auto* d = std::get_if<DeterministicService>(&v_)) {
      if (!(d->duration > 0.0) || !std::isfinite(d->duration))
        throw ConfigError("deterministic service: duration must be > 0");
    } else if (const auto* l = std::get_if<LogNormalService>(&v_)) {
      if (!std::isfinite(l->log_mean)) throw ConfigError("lognormal service: log_mean must be finite");
      if (!(l->log_sd > 0.0) || !std::isfinite(l->log_sd)) throw ConfigError("lognormal service: log_sd must be > 0");
    } else {
      const auto& q = std::get<TabulatedInverseCdf>(v_).values;
      if (q.size() < 2) throw ConfigError("tabulated inverse cdf: need at least two values");
      if (!(q.front() >= 0.0)) throw ConfigError("tabulated inverse cdf: values must be >= 0");
      for (std::size_t m = 0; m + 1 < q.size(); ++m)
        if (!(q[m + 1] >= q[m]) || !std::isfinite(q[m + 1]))
          throw ConfigError("tabulated inverse cdf: values must be finite and nondecreasing");
      if (!(q[1] > 0.0)) throw ConfigError("tabulated inverse cdf: F(0) must be 0 (no atom at zero)");
    }
  }

  Variant v_;
};

/// Service of the customers present at time 0 (F0, remaining service) and of
/// arriving customers (F).
struct ServiceModel {
  ServiceDistribution initial;
  ServiceDistribution arrival;

  static ServiceModel same(const ServiceDistribution& f) { return {f, f}; }
};

}  // namespace hawkesq
