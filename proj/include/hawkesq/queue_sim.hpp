#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hawkesq/errors.hpp"
#include "hawkesq/hawkes_sim.hpp"
#include "hawkesq/point_path.hpp"
#include "hawkesq/rng.hpp"
#include "hawkesq/service.hpp"
#include "hawkesq/stats.hpp"

namespace hawkesq {

enum class QueueMethod { EventCount, Indicator };

/// Queue lengths Q_i(t) and arrivals-to-date N_i(t) at the observation times.
struct QueueTrajectory {
  std::vector<double> times;
  std::vector<std::vector<std::int64_t>> queue;     // [class][time]
  std::vector<std::vector<std::int64_t>> arrivals;  // [class][time]
  std::size_t replication = 0;
};

/// Sampled service requirements of one queue realisation: remaining service of
/// the initial customers and service of each arrival, in arrival order.
struct ServiceDraws {
  std::vector<std::vector<double>> initial;
  std::vector<std::vector<double>> arrival;
};

inline ServiceDraws draw_services(const PointPath& arrivals, std::span<const ServiceModel> service,
                                  std::span<const std::uint64_t> q_init, Stream& rng) {
  const auto k = arrivals.dimension();
  if (service.size() != k || q_init.size() != k) throw ConfigError("queue: need one service model and q_init per class");
  ServiceDraws out{std::vector<std::vector<double>>(k), std::vector<std::vector<double>>(k)};
  for (std::size_t i = 0; i < k; ++i) {
    out.initial[i].reserve(q_init[i]);
    for (std::uint64_t n = 0; n < q_init[i]; ++n) out.initial[i].push_back(service[i].initial.sample(rng));
  }
  for (std::size_t i = 0; i < k; ++i) {
    out.arrival[i].reserve(arrivals.times[i].size());
    for (std::size_t n = 0; n < arrivals.times[i].size(); ++n) out.arrival[i].push_back(service[i].arrival.sample(rng));
  }
  return out;
}

/// Q(t) = #{initial: remaining > t} + #{arrivals tau <= t: tau + eta > t}.
inline QueueTrajectory evaluate_queue(const PointPath& arrivals, const ServiceDraws& draws,
                                      std::span<const double> t_grid, QueueMethod method = QueueMethod::EventCount) {
  const auto k = arrivals.dimension();
  for (double t : t_grid)
    if (!(t >= 0.0) || t > arrivals.horizon) throw RangeError("queue: observation time outside the arrival window");
  QueueTrajectory out;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.queue.assign(k, std::vector<std::int64_t>(t_grid.size()));
  out.arrivals.assign(k, std::vector<std::int64_t>(t_grid.size()));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& tau = arrivals.times[i];
    const auto& eta = draws.arrival[i];
    const auto& eta0 = draws.initial[i];
    if (method == QueueMethod::Indicator) {
      for (std::size_t g = 0; g < t_grid.size(); ++g) {
        const double t = t_grid[g];
        std::int64_t q = 0;
        for (double e : eta0) q += e > t;
        std::int64_t n = 0;
        for (std::size_t m = 0; m < tau.size() && tau[m] <= t; ++m) {
          ++n;
          q += tau[m] + eta[m] > t;
        }
        out.queue[i][g] = q;
        out.arrivals[i][g] = n;
      }
      continue;
    }
    std::vector<double> dep0(eta0);
    std::sort(dep0.begin(), dep0.end());
    std::vector<double> dep(tau.size());
    for (std::size_t m = 0; m < tau.size(); ++m) dep[m] = tau[m] + eta[m];
    std::sort(dep.begin(), dep.end());
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
      const double t = t_grid[g];
      const auto gone0 = std::upper_bound(dep0.begin(), dep0.end(), t) - dep0.begin();
      const auto n = std::upper_bound(tau.begin(), tau.end(), t) - tau.begin();
      const auto gone = std::upper_bound(dep.begin(), dep.end(), t) - dep.begin();
      out.queue[i][g] = static_cast<std::int64_t>(eta0.size()) - gone0 + n - gone;
      out.arrivals[i][g] = n;
    }
  }
  return out;
}

/// Infinite-server queue fed by `arrivals`; service requirements come from
/// `service_rng`, independent of the arrival stream.
inline QueueTrajectory simulate_queue(const PointPath& arrivals, std::span<const ServiceModel> service,
                                      std::span<const std::uint64_t> q_init, std::span<const double> t_grid,
                                      Stream& service_rng, QueueMethod method = QueueMethod::EventCount) {
  const ServiceDraws draws = draw_services(arrivals, service, q_init, service_rng);
  return evaluate_queue(arrivals, draws, t_grid, method);
}

/// Steady-state sampling protocol: each replication simulates Hawkes arrivals
/// on (0, t_burn + m spacing] (with the simulator's own burn-in), starts the
/// queue with Poisson(lambda_i x mean service_i) customers and records Q at
/// t_burn + spacing, ..., t_burn + m spacing.
struct SteadyStateConfig {
  HawkesConfig hawkes;
  std::vector<ServiceModel> service;  // one per class
  std::size_t samples = 10000;
  std::size_t replications = 100;
  double spacing = 0.0;  // 0: 5 x the largest service mean
  double t_burn = 0.0;   // 0: the minimum allowed
  Engine engine = Engine::Cluster;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SteadyStateResult {
  std::size_t dim = 1;
  std::size_t replications = 0;
  std::size_t per_replication = 0;
  double spacing = 0.0;
  double t_burn = 0.0;
  std::vector<std::vector<std::int64_t>> values;  // [class][replication-major sample]
  std::vector<Estimate> mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_se;

  std::size_t samples() const { return values.empty() ? 0 : values[0].size(); }
  Estimate variance(std::size_t i = 0) const { return {cov(i, i), cov_se(i, i)}; }

  /// Empirical pmf of class i on 0..max.
  std::vector<double> pmf(std::size_t i = 0) const {
    const auto& v = values.at(i);
    if (v.empty()) return {};
    std::vector<double> out(static_cast<std::size_t>(*std::max_element(v.begin(), v.end())) + 1, 0.0);
    for (auto q : v) out[static_cast<std::size_t>(q)] += 1.0;
    for (double& p : out) p /= static_cast<double>(v.size());
    return out;
  }
};

/// Minimum burn-in: 10 service means plus 10 kernel decay scales.
inline double minimum_queue_burn_in(const HawkesConfig& cfg, std::span<const ServiceModel> service) {
  double service_mean = 0.0;
  for (const auto& s : service) service_mean = std::max(service_mean, s.arrival.mean());
  double decay = 0.0;
  const auto k = cfg.dimension();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = cfg.kernel().entry(i, j).decay_scale();
      if (!std::isfinite(d)) throw ConfigError("steady-state sampling needs kernels with a finite mean delay");
      decay = std::max(decay, d);
    }
  return 10.0 * service_mean + 10.0 * decay;
}

// Batch-means summary: replications are independent batches.
inline void summarise_steady_state(SteadyStateResult& r) {
  const auto k = r.dim, reps = r.replications, m = r.per_replication;
  r.mean.assign(k, {});
  std::vector<double> grand(k);
  std::vector<std::vector<double>> batch_means(k, std::vector<double>(reps));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t b = 0; b < reps; ++b) {
      double acc = 0.0;
      for (std::size_t s = 0; s < m; ++s) acc += static_cast<double>(r.values[i][b * m + s]);
      batch_means[i][b] = acc / m;
    }
    r.mean[i] = sample_mean(batch_means[i]);
    grand[i] = r.mean[i].value;
  }
  r.cov.resize(k, k);
  r.cov_se.resize(k, k);
  const double n = static_cast<double>(reps * m);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      std::vector<double> batch(reps);
      for (std::size_t b = 0; b < reps; ++b) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s)
          acc += (r.values[i][b * m + s] - grand[i]) * (r.values[j][b * m + s] - grand[j]);
        batch[b] = acc / m;
      }
      const Estimate e = sample_mean(batch);
      r.cov(i, j) = r.cov(j, i) = e.value * n / (n - 1.0);
      r.cov_se(i, j) = r.cov_se(j, i) = e.se;
    }
}

inline SteadyStateResult steady_state_sample(const SteadyStateConfig& cfg) {
  const auto k = cfg.hawkes.dimension();
  if (cfg.service.size() != k) throw ConfigError("steady state: need one service model per class");
  if (cfg.replications < 2) throw ConfigError("steady state: need at least two replications");
  if (cfg.samples < cfg.replications) throw ConfigError("steady state: samples must be >= replications");
  double service_mean = 0.0;
  for (const auto& s : cfg.service) {
    const double mean = s.arrival.mean();
    if (!std::isfinite(mean)) throw ConfigError("steady state: service mean must be finite");
    service_mean = std::max(service_mean, mean);
  }
  const double min_burn = minimum_queue_burn_in(cfg.hawkes, cfg.service);
  const double t_burn = cfg.t_burn > 0.0 ? cfg.t_burn : min_burn;
  if (t_burn < min_burn * (1.0 - 1e-12))
    throw ConfigError("steady state: t_burn must be >= 10 service means + 10 kernel decay scales");
  const double spacing = cfg.spacing > 0.0 ? cfg.spacing : 5.0 * service_mean;
  if (spacing < 5.0 * service_mean * (1.0 - 1e-12))
    throw ConfigError("steady state: spacing must be >= 5 service means");

  SteadyStateResult out;
  out.dim = k;
  out.replications = cfg.replications;
  out.per_replication = (cfg.samples + cfg.replications - 1) / cfg.replications;
  out.spacing = spacing;
  out.t_burn = t_burn;
  const std::size_t m = out.per_replication;
  std::vector<double> grid(m);
  for (std::size_t s = 0; s < m; ++s) grid[s] = t_burn + spacing * static_cast<double>(s + 1);

  SimConfig sim{cfg.hawkes, grid.back(), std::nullopt, cfg.engine, cfg.seed, cfg.replications, cfg.threads};
  const double burn_in = sim.resolved_burn_in();
  const Eigen::VectorXd rates = cfg.hawkes.mean_rates();
  std::vector<QueueTrajectory> runs(cfg.replications);
  parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
    const PointPath arrivals = simulate(sim, r, burn_in);
    Stream init_rng(cfg.seed, r, substream::kInitialQueue);
    std::vector<std::uint64_t> q0(k);
    for (std::size_t i = 0; i < k; ++i) q0[i] = init_rng.poisson(rates(i) * cfg.service[i].initial.mean());
    Stream service_rng(cfg.seed, r, substream::kService);
    runs[r] = simulate_queue(arrivals, cfg.service, q0, grid, service_rng);
    runs[r].replication = r;
  });
  out.values.assign(k, {});
  for (std::size_t i = 0; i < k; ++i) {
    out.values[i].reserve(m * cfg.replications);
    for (const auto& run : runs) out.values[i].insert(out.values[i].end(), run.queue[i].begin(), run.queue[i].end());
  }
  summarise_steady_state(out);
  return out;
}

struct DistributionComparison {
  double tv_distance = 0.0;
  double max_gap = 0.0;
  double mean_gap = 0.0;      // empirical - reference
  double variance_gap = 0.0;  // empirical - reference
};

/// Compares two pmfs on 0, 1, 2, ... (missing entries are zero). Reference
/// moments are taken from the reference pmf normalised to unit mass.
inline DistributionComparison compare_distributions(std::span<const double> empirical,
                                                    std::span<const double> reference) {
  if (empirical.empty()) throw ArgumentError("compare_distributions: empty empirical pmf");
  const std::size_t n = std::max(empirical.size(), reference.size());
  auto at = [](std::span<const double> p, std::size_t q) { return q < p.size() ? p[q] : 0.0; };
  DistributionComparison out;
  double l1 = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double gap = std::abs(at(empirical, q) - at(reference, q));
    l1 += gap;
    out.max_gap = std::max(out.max_gap, gap);
  }
  out.tv_distance = 0.5 * l1;
  auto moments = [&](std::span<const double> p) {
    double mass = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q) {
      mass += p[q];
      m1 += q * p[q];
      m2 += double(q) * q * p[q];
    }
    if (!(mass > 0.0)) return std::pair{0.0, 0.0};
    m1 /= mass;
    return std::pair{m1, m2 / mass - m1 * m1};
  };
  const auto [me, ve] = moments(empirical);
  const auto [mr, vr] = moments(reference);
  out.mean_gap = me - mr;
  out.variance_gap = ve - vr;
  return out;
}

/// Histogram CSV: q, empirical_pmf, gaussian_pmf.
inline void write_histogram_csv(std::ostream& os, std::span<const double> empirical, std::span<const double> gaussian) {
  os.precision(17);
  os << "q,empirical_pmf,gaussian_pmf\n";
  const std::size_t n = std::max(empirical.size(), gaussian.size());
  for (std::size_t q = 0; q < n; ++q)
    os << q << ',' << (q < empirical.size() ? empirical[q] : 0.0) << ',' << (q < gaussian.size() ? gaussian[q] : 0.0)
       << '\n';
}

}  // namespace hawkesq
