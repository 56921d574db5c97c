#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hawkesq/queue_sim.hpp"

using namespace hawkesq;

namespace {

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, 1e-12);
}

std::vector<ServiceDistribution> distributions() {
  return {ServiceDistribution::exponential(2.0), ServiceDistribution::deterministic(1.5),
          ServiceDistribution::lognormal(-0.2, 0.6), ServiceDistribution::tabulated_inverse_cdf({0.0, 0.4, 0.5, 2.0})};
}

// Breakpoints where the integrands may have kinks or jumps.
std::vector<double> kinks(const ServiceDistribution& f, double w, double end) {
  std::vector<double> pts{0.0, end};
  if (auto* d = std::get_if<DeterministicService>(&f.variant())) pts.insert(pts.end(), {d->duration, d->duration - w});
  if (auto* t = std::get_if<TabulatedInverseCdf>(&f.variant()))
    for (double v : t->values) pts.insert(pts.end(), {v, v - w});
  std::vector<double> out;
  for (double p : pts)
    if (p >= 0.0 && p <= end) out.push_back(p);
  std::sort(out.begin(), out.end());
  return out;
}

double piecewise(const std::function<double(double)>& f, const std::vector<double>& pts) {
  double acc = 0.0;
  for (std::size_t m = 0; m + 1 < pts.size(); ++m)
    if (pts[m + 1] > pts[m]) acc += integrate(f, pts[m], pts[m + 1]);
  return acc;
}

SteadyStateConfig poisson_queue(double mu, std::size_t samples) {
  SteadyStateConfig cfg{HawkesConfig(mu, Kernel::zero()), {ServiceModel::same(ServiceDistribution::exponential(1.0))}};
  cfg.samples = samples;
  cfg.replications = 100;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST(Service, DistributionFunctions) {
  for (const auto& f : distributions()) {
    EXPECT_EQ(f.cdf(0.0), 0.0) << f.name();
    EXPECT_EQ(f.survival(-1.0), 1.0);
    const double end = f.tail_point(1e-13);
    EXPECT_NEAR(f.mean(), piecewise([&](double u) { return f.survival(u); }, kinks(f, 0.0, end)), 1e-9) << f.name();
    for (double x : {0.3, 1.0, 1.7})
      EXPECT_NEAR(f.integrated_survival(x), piecewise([&](double u) { return f.survival(u); }, kinks(f, 0.0, x)), 1e-10)
          << f.name() << ' ' << x;
    for (double w : {0.0, 0.25, 1.2}) {
      const double q = piecewise([&](double u) { return f.survival(u) * f.survival(u + w); }, kinks(f, w, end));
      EXPECT_NEAR(f.survival_autocorrelation(w), q, 1e-9) << f.name() << ' ' << w;
    }
    if (f.is_continuous()) {
      for (double u : {0.1, 0.5, 0.93}) EXPECT_NEAR(f.cdf(f.inverse_cdf(u)), u, 1e-12) << f.name();
    }
  }
  EXPECT_EQ(ServiceDistribution::deterministic(1.0).survival_node(1.0), 0.5);
  EXPECT_FALSE(ServiceDistribution::tabulated_inverse_cdf({0.0, 1.0, 1.0, 2.0}).is_continuous());
}

TEST(Service, SampleMeans) {
  Stream rng(3, 0, substream::kService);
  for (const auto& f : distributions()) {
    std::vector<double> x(100000);
    for (auto& v : x) v = f.sample(rng);
    if (std::holds_alternative<DeterministicService>(f.variant())) {
      EXPECT_EQ(x[7], 1.5);
      continue;
    }
    EXPECT_LT(std::abs(sample_mean(x).z(f.mean())), 4.0) << f.name();
  }
}

TEST(Service, Validation) {
  EXPECT_THROW(ServiceDistribution::exponential(0.0), ConfigError);
  EXPECT_THROW(ServiceDistribution::deterministic(-1.0), ConfigError);
  EXPECT_THROW(ServiceDistribution::lognormal(0.0, 0.0), ConfigError);
  EXPECT_THROW(ServiceDistribution::tabulated_inverse_cdf({0.0, 0.0, 1.0}), ConfigError);
  EXPECT_THROW(ServiceDistribution::tabulated_inverse_cdf({1.0, 0.5}), ConfigError);
  EXPECT_THROW(ServiceDistribution::exponential(1.0).inverse_cdf(1.0), ArgumentError);
}

TEST(Queue, InitialCustomersOnly) {
  const PointPath empty{5.0, {{}}};
  const std::vector<ServiceModel> service{ServiceModel::same(ServiceDistribution::deterministic(1.0))};
  const std::vector<std::uint64_t> q0{3};
  const std::vector<double> grid{0.0, 0.5, 0.999, 1.0, 2.0};
  Stream rng(1, 0, substream::kService);
  const auto traj = simulate_queue(empty, service, q0, grid, rng);
  EXPECT_EQ(traj.queue[0], (std::vector<std::int64_t>{3, 3, 3, 0, 0}));
  EXPECT_EQ(traj.arrivals[0], (std::vector<std::int64_t>{0, 0, 0, 0, 0}));
  const std::vector<double> late{6.0};
  EXPECT_THROW(simulate_queue(empty, service, q0, late, rng), RangeError);
}

TEST(Queue, EventCountingEqualsIndicatorSums) {
  SimConfig sim{HawkesConfig(3.0, MultiKernel(2, {Kernel::exponential(0.3, 1.0), Kernel::exponential(0.2, 2.0),
                                                  Kernel::zero(), Kernel::exponential(0.4, 0.5)},
                                              {1.0, 1.0})),
                30.0, std::nullopt};
  sim.seed = 9;
  const std::vector<ServiceModel> service{ServiceModel::same(ServiceDistribution::lognormal(0.0, 0.8)),
                                          ServiceModel{ServiceDistribution::exponential(0.5),
                                                       ServiceDistribution::deterministic(2.0)}};
  std::vector<double> grid;
  for (int g = 0; g <= 300; ++g) grid.push_back(0.1 * g);
  for (std::size_t r = 0; r < 5; ++r) {
    const PointPath path = simulate_cluster(sim, r);
    const std::vector<std::uint64_t> q0{4, 2};
    Stream rng(sim.seed, r, substream::kService);
    const ServiceDraws draws = draw_services(path, service, q0, rng);
    const auto a = evaluate_queue(path, draws, grid, QueueMethod::EventCount);
    const auto b = evaluate_queue(path, draws, grid, QueueMethod::Indicator);
    EXPECT_EQ(a.queue, b.queue);
    EXPECT_EQ(a.arrivals, b.arrivals);
    EXPECT_EQ(a.queue[0][0], 4);
    EXPECT_EQ(a.queue[1][0], 2);
    for (const auto& cls : a.queue)
      for (auto q : cls) EXPECT_GE(q, 0);
  }
}

TEST(Queue, PoissonArrivalsKeepStationaryMean) {
  // M/M/infinity started in its stationary law: E Q(t) = 5 for every t
  SimConfig sim{HawkesConfig(5.0, Kernel::zero()), 3.0, std::nullopt};
  sim.seed = 12;
  const std::vector<ServiceModel> service{ServiceModel::same(ServiceDistribution::exponential(1.0))};
  const std::vector<double> grid{0.0, 0.5, 3.0};
  std::vector<std::vector<double>> q(grid.size());
  for (std::size_t r = 0; r < 10000; ++r) {
    const PointPath path = simulate_cluster(sim, r);
    Stream init(sim.seed, r, substream::kInitialQueue);
    const std::vector<std::uint64_t> q0{init.poisson(5.0)};
    Stream rng(sim.seed, r, substream::kService);
    const auto traj = simulate_queue(path, service, q0, grid, rng);
    for (std::size_t g = 0; g < grid.size(); ++g) q[g].push_back(static_cast<double>(traj.queue[0][g]));
  }
  for (const auto& col : q) EXPECT_LT(std::abs(sample_mean(col).z(5.0)), 3.0);
}

TEST(Queue, FreshServiceSeedKeepsMean) {
  SimConfig sim{HawkesConfig(4.0, Kernel::exponential(0.5, 1.0)), 20.0, std::nullopt};
  const std::vector<ServiceModel> service{ServiceModel::same(ServiceDistribution::exponential(1.0))};
  const std::vector<std::uint64_t> q0{8};
  const std::vector<double> grid{15.0};
  std::vector<double> a, b;
  for (std::size_t r = 0; r < 4000; ++r) {
    const PointPath path = simulate_cluster(sim, r);
    Stream s1(1, r, substream::kService), s2(2, r, substream::kService);
    a.push_back(static_cast<double>(simulate_queue(path, service, q0, grid, s1).queue[0][0]));
    b.push_back(static_cast<double>(simulate_queue(path, service, q0, grid, s2).queue[0][0]));
  }
  EXPECT_NE(a, b);
  const Estimate ma = sample_mean(a), mb = sample_mean(b);
  EXPECT_LT(std::abs(ma.value - mb.value), 3.0 * std::hypot(ma.se, mb.se));
  EXPECT_LT(std::abs(ma.z(8.0)), 3.5);
}

TEST(SteadyState, PoissonQueueIsPoisson) {
  const auto res = steady_state_sample(poisson_queue(20.0, 10000));
  EXPECT_EQ(res.samples(), 10000u);
  EXPECT_LT(std::abs(res.mean[0].z(20.0)), 3.0);
  const double ratio = res.variance(0).value / res.mean[0].value;
  EXPECT_GE(ratio, 0.9);
  EXPECT_LE(ratio, 1.1);
  // against a Poisson(20) reference pmf
  std::vector<double> poisson(80);
  for (std::size_t q = 0; q < poisson.size(); ++q)
    poisson[q] = std::exp(q * std::log(20.0) - 20.0 - std::lgamma(q + 1.0));
  EXPECT_LT(compare_distributions(res.pmf(0), poisson).tv_distance, 0.08);
}

TEST(SteadyState, ExcitedQueueMean) {
  SteadyStateConfig cfg{HawkesConfig(20.0, Kernel::exponential(0.5, 1.0)),
                        {ServiceModel::same(ServiceDistribution::exponential(1.0))}};
  cfg.samples = 10000;
  cfg.seed = 4;
  const auto res = steady_state_sample(cfg);
  EXPECT_LT(std::abs(res.mean[0].z(40.0)), 3.0);
  EXPECT_DOUBLE_EQ(res.t_burn, 10.0 + 10.0);
  EXPECT_DOUBLE_EQ(res.spacing, 5.0);
}

TEST(SteadyState, ReproducibleAcrossThreadsAndDimensionWrapping) {
  auto cfg = poisson_queue(3.0, 400);
  cfg.hawkes = HawkesConfig(3.0, Kernel::exponential(0.3, 1.0));
  const auto a = steady_state_sample(cfg);
  cfg.threads = 4;
  const auto b = steady_state_sample(cfg);
  EXPECT_EQ(a.values, b.values);
  cfg.hawkes = HawkesConfig(3.0, MultiKernel(1, {Kernel::exponential(0.3, 1.0)}, {1.0}));
  EXPECT_EQ(steady_state_sample(cfg).values, a.values);
  cfg.seed += 1;
  EXPECT_NE(steady_state_sample(cfg).values, a.values);
}

TEST(SteadyState, RejectsShortHorizons) {
  auto cfg = poisson_queue(5.0, 1000);
  cfg.hawkes = HawkesConfig(5.0, Kernel::exponential(0.5, 1.0));
  cfg.t_burn = 5.0;
  EXPECT_THROW(steady_state_sample(cfg), ConfigError);
  cfg.t_burn = 0.0;
  cfg.spacing = 1.0;
  EXPECT_THROW(steady_state_sample(cfg), ConfigError);
  cfg.spacing = 0.0;
  cfg.service.clear();
  EXPECT_THROW(steady_state_sample(cfg), ConfigError);
}

TEST(Compare, IdenticalAndShifted) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  const auto same = compare_distributions(p, p);
  EXPECT_EQ(same.tv_distance, 0.0);
  EXPECT_EQ(same.max_gap, 0.0);
  EXPECT_EQ(same.mean_gap, 0.0);
  EXPECT_EQ(same.variance_gap, 0.0);
  const std::vector<double> shifted{0.0, 0.2, 0.5, 0.3};
  const auto d = compare_distributions(p, shifted);
  EXPECT_NEAR(d.tv_distance, 0.5 * (0.2 + 0.3 + 0.2 + 0.3), 1e-15);
  EXPECT_NEAR(d.mean_gap, -1.0, 1e-15);
  EXPECT_NEAR(d.variance_gap, 0.0, 1e-14);
  EXPECT_THROW(compare_distributions(std::vector<double>{}, p), ArgumentError);
  std::ostringstream os;
  write_histogram_csv(os, p, shifted);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "q,empirical_pmf,gaussian_pmf");
}
