#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "hawkesq/errors.hpp"
#include "hawkesq/kernels.hpp"
#include "hawkesq/parallel.hpp"
#include "hawkesq/point_path.hpp"
#include "hawkesq/rng.hpp"
#include "hawkesq/stats.hpp"

namespace hawkesq {

enum class Engine { Cluster, Thinning };

inline std::string to_string(Engine e) { return e == Engine::Cluster ? "cluster" : "thinning"; }
inline Engine engine_from_string(const std::string& s) {
  if (s == "cluster") return Engine::Cluster;
  if (s == "thinning") return Engine::Thinning;
  throw ConfigError("unknown engine '" + s + "' (expected cluster or thinning)");
}

/// Upper bound on the expected number of points in (0, inf) missing from a
/// simulation started empty at -B, i.e. descendants of immigrants that arrived
/// before -B. A descendant at generation n sits at the sum S of n delays, and
/// the missing mass of an ancestry is E[(S - B)^+]. Two bounds are combined:
///   (x)^+ <= exp(theta x - 1) / theta  with the tilted masses int e^{theta t} h_ij,
///   (x)^+ <= x^2 / (4B)                 with the first and second kernel moments.
class BurnInBound {
 public:
  explicit BurnInBound(const HawkesConfig& cfg) : k_(cfg.dimension()), kernel_(cfg.kernel()) {
    mu_.resize(static_cast<Eigen::Index>(k_));
    for (std::size_t i = 0; i < k_; ++i) mu_(i) = cfg.baseline(i);
    find_tilt_limit();
    second_moment_total_ = second_moment_total();
  }

  double operator()(double burn_in) const {
    if (!(burn_in >= 0.0)) throw ArgumentError("burn-in must be >= 0");
    double best = std::numeric_limits<double>::infinity();
    if (tilt_limit_ > 0.0) {
      const auto objective = [&](double theta) { return log_chernoff(theta, burn_in); };
      const auto [theta, value] =
          boost::math::tools::brent_find_minima(objective, tilt_limit_ * 1e-9, tilt_limit_ * (1.0 - 1e-9), 40);
      (void)theta;
      best = std::exp(value);
    }
    if (std::isfinite(second_moment_total_) && burn_in > 0.0)
      best = std::min(best, second_moment_total_ / (4.0 * burn_in));
    return best;
  }

 private:
  // Matrix of int e^{theta t} h_ij; +inf entries propagate.
  Eigen::MatrixXd tilted(double theta) const {
    Eigen::MatrixXd l(k_, k_);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j < k_; ++j) l(i, j) = kernel_.entry(i, j).tilted_mass(theta);
    return l;
  }

  bool admissible(double theta) const {
    const Eigen::MatrixXd l = tilted(theta);
    return l.allFinite() && spectral_radius(l) < 1.0;
  }

  void find_tilt_limit() {
    double scale = 0.0;
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j < k_; ++j) {
        const Kernel& h = kernel_.entry(i, j);
        if (!h.is_zero()) scale = std::max(scale, h.decay_scale());
      }
    if (scale == 0.0) {
      tilt_limit_ = 1.0;  // no excitation: the leak is zero for every tilt
      return;
    }
    if (!std::isfinite(scale)) return;
    double hi = 1.0 / scale;
    if (!admissible(1e-9 * hi)) return;
    while (admissible(hi)) {
      hi *= 2.0;
      if (hi > 1e12 / scale) break;
    }
    double lo = 0.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (admissible(mid) ? lo : hi) = mid;
    }
    tilt_limit_ = lo;
  }

  double log_chernoff(double theta, double burn_in) const {
    const Eigen::MatrixXd l = tilted(theta);
    if (!l.allFinite() || spectral_radius(l) >= 1.0) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k_, k_);
    const Eigen::VectorXd g = (id - l).partialPivLu().solve(mu_);
    const double descendants = (g - mu_).sum();
    if (descendants <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(descendants) - theta * burn_in - 1.0 - std::log(theta);
  }

  // 1'(G H2 G + 2 G H1 G H1 G) mu with G = (I - H0)^{-1}: the sum over all
  // ancestries of E[S^2].
  double second_moment_total() const {
    Eigen::MatrixXd h0(k_, k_), h1(k_, k_), h2(k_, k_);
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j < k_; ++j) {
        const Kernel& h = kernel_.entry(i, j);
        h0(i, j) = h.l1_norm();
        h1(i, j) = h.moment(1);
        h2(i, j) = h.moment(2);
      }
    if (!h2.allFinite() || !h1.allFinite()) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd g = (Eigen::MatrixXd::Identity(k_, k_) - h0).inverse();
    return (g * h2 * g * mu_ + 2.0 * g * h1 * g * h1 * g * mu_).sum();
  }

  std::size_t k_;
  MultiKernel kernel_;
  Eigen::VectorXd mu_;
  double tilt_limit_ = 0.0;  // 0 when no exponential moment exists
  double second_moment_total_ = std::numeric_limits<double>::infinity();
};

inline double burn_in_leak(const HawkesConfig& cfg, double burn_in) { return BurnInBound(cfg)(burn_in); }

/// Smallest burn-in (to 1e-3 relative) whose leak bound is below `tolerance`.
inline double default_burn_in(const HawkesConfig& cfg, double tolerance = 1e-3) {
  const BurnInBound leak(cfg);
  if (leak(0.0) <= tolerance) return 0.0;
  constexpr double kMaxBurnIn = 1e7;
  double hi = 1.0;
  while (leak(hi) > tolerance) {
    hi *= 2.0;
    if (hi > kMaxBurnIn)
      throw ConfigError("kernel tail too heavy for an automatic burn-in; set burn_in explicitly");
  }
  double lo = hi / 2.0;
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    (leak(mid) > tolerance ? lo : hi) = mid;
  }
  return hi;
}

struct SimConfig {
  HawkesConfig config;
  double horizon = 1.0;
  std::optional<double> burn_in;  // default_burn_in when empty
  Engine engine = Engine::Cluster;
  std::uint64_t seed = 1;
  std::size_t replications = 1;
  unsigned threads = 1;

  double resolved_burn_in() const { return burn_in ? *burn_in : default_burn_in(config); }
};

inline constexpr std::uint32_t kGenerationCap = 100000;

/// Immigration-birth construction: Poisson immigrants on (-B, T], each point of
/// type j spawning Poisson(||h_ij||) type-i children at delays drawn from
/// h_ij / ||h_ij||. Iterative with an explicit work stack.
inline PointPath simulate_cluster(const HawkesConfig& cfg, double horizon, double burn_in, Stream& rng) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (!(burn_in >= 0.0)) throw ConfigError("burn_in must be >= 0");
  const auto k = cfg.dimension();
  const auto& kern = cfg.kernel();
  struct Pending {
    double t;
    std::uint32_t dim;
    std::uint32_t generation;
  };
  std::vector<Pending> stack;
  PointPath path{horizon, std::vector<std::vector<double>>(k)};

  for (std::size_t i = 0; i < k; ++i) {
    const double rate = cfg.baseline(i);
    if (rate <= 0.0) continue;
    double t = -burn_in;
    for (;;) {
      t += rng.exponential(rate);
      if (t > horizon) break;
      stack.push_back({t, static_cast<std::uint32_t>(i), 0});
    }
  }
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    if (p.t > 0.0) path.times[p.dim].push_back(p.t);
    for (std::size_t c = 0; c < k; ++c) {
      const double mass = kern.norm_matrix()(c, p.dim);
      if (mass <= 0.0) continue;
      const Kernel& h = kern.entry(c, p.dim);
      const auto children = rng.poisson(mass);
      for (std::uint64_t n = 0; n < children; ++n) {
        const double t = p.t + h.sample_delay(rng);
        if (t > horizon) continue;
        if (p.generation + 1 > kGenerationCap) throw StabilityError("cluster generation cap exceeded");
        stack.push_back({t, static_cast<std::uint32_t>(c), p.generation + 1});
      }
    }
  }
  for (auto& ts : path.times) std::sort(ts.begin(), ts.end());
  return path;
}

namespace detail {

// Dominated thinning for sum-of-exponential kernels: one exponentially decaying
// state per (target, source, term). The positive-part intensity is a
// nonincreasing majorant between events.
inline PointPath thin_sum_exp(const HawkesConfig& cfg, double horizon, double burn_in, Stream& rng) {
  const auto k = cfg.dimension();
  struct Term {
    std::size_t target;
    std::size_t source;
    double alpha;
    double beta;
    double state;
  };
  std::vector<Term> terms;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (const auto& e : cfg.kernel().entry(i, j).as_sum_exp()->terms)
        if (e.alpha != 0.0) terms.push_back({i, j, e.alpha, e.beta, 0.0});

  std::vector<double> base(k);
  for (std::size_t i = 0; i < k; ++i) base[i] = cfg.baseline(i);
  PointPath path{horizon, std::vector<std::vector<double>>(k)};
  std::vector<double> lambda(k);
  double t = -burn_in;
  for (;;) {
    double bound = 0.0;
    for (double b : base) bound += b;
    for (const auto& term : terms)
      if (term.alpha > 0.0) bound += term.alpha * term.state;
    const double s = t + rng.exponential(bound);
    if (s > horizon) break;
    for (auto& term : terms) term.state *= std::exp(-term.beta * (s - t));
    t = s;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) lambda[i] = base[i];
    for (const auto& term : terms) lambda[term.target] += term.alpha * term.state;
    for (std::size_t i = 0; i < k; ++i) {
      lambda[i] = std::max(lambda[i], 0.0);
      total += lambda[i];
    }
    if (total > bound * (1.0 + 1e-12)) throw NumericalError("thinning: intensity exceeded its majorant");
    const double u = rng.uniform() * bound;
    if (u > total) continue;
    std::size_t dim = 0;
    double acc = lambda[0];
    while (u > acc && dim + 1 < k) acc += lambda[++dim];
    if (t > 0.0) path.times[dim].push_back(t);
    for (auto& term : terms)
      if (term.source == dim) term.state += 1.0;
  }
  return path;
}

// Generic dominated thinning from the event history, for kernels whose majorant
// comes from Kernel::sup_on over a look-ahead window.
inline PointPath thin_generic(const HawkesConfig& cfg, double horizon, double burn_in, Stream& rng) {
  const auto k = cfg.dimension();
  const auto& kern = cfg.kernel();
  double window = std::numeric_limits<double>::infinity();
  double memory = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const Kernel& h = kern.entry(i, j);
      if (h.is_zero()) continue;
      window = std::min(window, h.majorant_window());
      memory = std::max(memory, h.support_end());
    }
  struct Event {
    double t;
    std::size_t dim;
  };
  std::vector<Event> history;
  std::size_t first_live = 0;
  PointPath path{horizon, std::vector<std::vector<double>>(k)};
  std::vector<double> lambda(k);

  double t = -burn_in;
  while (t < horizon) {
    while (first_live < history.size() && t - history[first_live].t > memory) ++first_live;
    const double reach = std::isfinite(window) ? window : 0.0;
    double bound = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      bound += cfg.baseline(i);
      for (std::size_t e = first_live; e < history.size(); ++e) {
        const double lag = t - history[e].t;
        const Kernel& h = kern.entry(i, history[e].dim);
        bound += std::isfinite(window) ? h.sup_on(lag, lag + reach) : h.sup_on(lag, lag);
      }
    }
    const double s = t + rng.exponential(bound);
    if (std::isfinite(window) && s > t + window) {
      t += window;
      continue;
    }
    if (s > horizon) break;
    t = s;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      lambda[i] = cfg.baseline(i);
      for (std::size_t e = first_live; e < history.size(); ++e)
        lambda[i] += kern.entry(i, history[e].dim)(t - history[e].t);
      total += lambda[i];
    }
    if (total > bound * (1.0 + 1e-12)) throw NumericalError("thinning: intensity exceeded its majorant");
    const double u = rng.uniform() * bound;
    if (u > total) continue;
    std::size_t dim = 0;
    double acc = lambda[0];
    while (u > acc && dim + 1 < k) acc += lambda[++dim];
    history.push_back({t, dim});
    if (t > 0.0) path.times[dim].push_back(t);
  }
  return path;
}

}  // namespace detail

/// Ogata-style dominated thinning of the conditional intensity, warm-started on
/// (-B, 0] with an empty history.
inline PointPath simulate_thinning(const HawkesConfig& cfg, double horizon, double burn_in, Stream& rng) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (!(burn_in >= 0.0)) throw ConfigError("burn_in must be >= 0");
  if (cfg.kernel().all_sum_exp()) return detail::thin_sum_exp(cfg, horizon, burn_in, rng);
  return detail::thin_generic(cfg, horizon, burn_in, rng);
}

/// Replication r of a simulation config; uses stream (seed, r).
inline PointPath simulate(const SimConfig& sim, std::size_t replication, double burn_in) {
  Stream rng(sim.seed, replication, substream::kArrivals);
  return sim.engine == Engine::Cluster ? simulate_cluster(sim.config, sim.horizon, burn_in, rng)
                                       : simulate_thinning(sim.config, sim.horizon, burn_in, rng);
}

inline PointPath simulate_cluster(const SimConfig& sim, std::size_t replication = 0) {
  Stream rng(sim.seed, replication, substream::kArrivals);
  return simulate_cluster(sim.config, sim.horizon, sim.resolved_burn_in(), rng);
}

inline PointPath simulate_thinning(const SimConfig& sim, std::size_t replication = 0) {
  Stream rng(sim.seed, replication, substream::kArrivals);
  return simulate_thinning(sim.config, sim.horizon, sim.resolved_burn_in(), rng);
}

/// All replications of `sim`, in replication order regardless of thread count.
inline std::vector<PointPath> simulate_replications(const SimConfig& sim) {
  if (sim.replications < 1) throw ConfigError("replications must be >= 1");
  const double burn_in = sim.resolved_burn_in();
  std::vector<PointPath> out(sim.replications);
  parallel_for(sim.replications, sim.threads, [&](std::size_t r) { out[r] = simulate(sim, r, burn_in); });
  return out;
}

/// Sample moments of N(t) across replications at one probe time.
struct MomentEstimate {
  double t = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov;  // cross-dimension covariance of counts
  Eigen::MatrixXd cov_se;
};

inline std::vector<double> counts_at(std::span<const PointPath> paths, std::size_t dim, double t) {
  std::vector<double> out;
  out.reserve(paths.size());
  for (const auto& p : paths) {
    if (!(t > 0.0) || t > p.horizon) throw RangeError("probe time outside (0, T]");
    out.push_back(static_cast<double>(p.count(dim, t)));
  }
  return out;
}

inline std::vector<MomentEstimate> empirical_moments(std::span<const PointPath> paths, std::span<const double> t_grid) {
  if (paths.size() < 2) throw ArgumentError("empirical_moments: need at least two paths");
  const auto k = paths.front().dimension();
  for (const auto& p : paths)
    if (p.dimension() != k) throw ArgumentError("empirical_moments: paths differ in dimension");
  std::vector<MomentEstimate> out;
  for (double t : t_grid) {
    MomentEstimate m{t, Eigen::VectorXd(k), Eigen::VectorXd(k), Eigen::MatrixXd(k, k), Eigen::MatrixXd(k, k)};
    std::vector<std::vector<double>> counts(k);
    for (std::size_t i = 0; i < k; ++i) {
      counts[i] = counts_at(paths, i, t);
      const Estimate mean = sample_mean(counts[i]);
      m.mean(i) = mean.value;
      m.mean_se(i) = mean.se;
    }
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const Estimate c = sample_covariance(counts[i], counts[j]);
        m.cov(i, j) = m.cov(j, i) = c.value;
        m.cov_se(i, j) = m.cov_se(j, i) = c.se;
      }
    out.push_back(std::move(m));
  }
  return out;
}

/// Cov(N_i(s), N_j(t)) across replications.
inline Estimate count_covariance(std::span<const PointPath> paths, std::size_t i, double s, std::size_t j, double t) {
  if (paths.size() < 2) throw ArgumentError("count_covariance: need at least two paths");
  return sample_covariance(counts_at(paths, i, s), counts_at(paths, j, t));
}

}  // namespace hawkesq
