#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hawkesq/hawkes_sim.hpp"

using namespace hawkesq;

namespace {

// Var N(t) for h = exp(-t)/2, mu = 1.
double var_h1(double t) { return 8.0 * t - 12.0 * (1.0 - std::exp(-0.5 * t)); }

SimConfig h1_config(Engine engine, std::size_t reps) {
  SimConfig sim{HawkesConfig(1.0, Kernel::exponential(0.5, 1.0)), 1.0, std::nullopt};
  sim.horizon = 10.0;
  sim.engine = engine;
  sim.seed = 2024;
  sim.replications = reps;
  return sim;
}

}  // namespace

TEST(BurnIn, BoundDominatesExactLeak) {
  const HawkesConfig cfg(1.0, Kernel::exponential(0.5, 1.0));
  // cluster density psi(t) = exp(-t/2)/2, so the missing count is int_B^inf (u - B) psi = 2 exp(-B/2)
  const auto exact = [](double b) { return 2.0 * std::exp(-0.5 * b); };
  for (double b : {1.0, 5.0, 20.0, 40.0}) {
    const double bound = burn_in_leak(cfg, b);
    EXPECT_GE(bound, exact(b)) << b;
    // Chernoff optimum by brute force over theta; the second-moment total is m2/(1-rho)^2 + 2 m1^2/(1-rho)^3 = 8
    double best = INFINITY;
    for (int n = 1; n < 200000; ++n) {
      const double th = 0.5 * n / 200000.0;
      best = std::min(best, std::exp(-th * b) * 0.5 / ((0.5 - th) * std::exp(1.0) * th));
    }
    EXPECT_NEAR(bound, std::min(best, 8.0 / (4.0 * b)), 1e-6 * bound) << b;
  }
  const double b = default_burn_in(cfg);
  EXPECT_LE(exact(b), 1e-3);
  EXPECT_LE(burn_in_leak(cfg, b), 1e-3);
  EXPECT_GT(burn_in_leak(cfg, 0.99 * b), 1e-3);
  EXPECT_EQ(default_burn_in(HawkesConfig(1.0, MultiKernel(2, {Kernel::zero(), Kernel::zero(), Kernel::zero(),
                                                              Kernel::zero()}, {1.0, 1.0}))), 0.0);
  EXPECT_THROW(default_burn_in(HawkesConfig(1.0, Kernel::power_law(1.0, 2.5, 0.3))), ConfigError);
  EXPECT_TRUE(std::isfinite(default_burn_in(HawkesConfig(1.0, Kernel::power_law(1.0, 4.0, 0.9)))));
}

TEST(Simulation, ReproducibleAndThreadIndependent) {
  auto sim = h1_config(Engine::Cluster, 6);
  const auto a = simulate_replications(sim);
  sim.threads = 3;
  const auto b = simulate_replications(sim);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[2], simulate_cluster(sim, 2));
  EXPECT_NE(a[0], a[1]);
  for (const auto& p : a) p.check();
}

class EngineMoments : public ::testing::TestWithParam<Engine> {};

TEST_P(EngineMoments, CountMeanAndVarianceMatchTheory) {
  const auto paths = simulate_replications(h1_config(GetParam(), 4000));
  const std::vector<double> grid{1.0, 5.0, 10.0};
  const auto moments = empirical_moments(paths, grid);
  for (const auto& m : moments) {
    EXPECT_LT(std::abs(m.mean(0) - 2.0 * m.t) / m.mean_se(0), 4.0) << m.t;
    EXPECT_LT(std::abs(m.cov(0, 0) - var_h1(m.t)) / m.cov_se(0, 0), 4.0) << m.t;
  }
  // Cov(N(s), N(t)) = Var N(s) + Cov(N(s), N(t) - N(s)) = (K(t) + K(s) - K(t - s)) / 2
  const Estimate c = count_covariance(paths, 0, 4.0, 0, 10.0);
  EXPECT_LT(std::abs(c.z(0.5 * (var_h1(10.0) + var_h1(4.0) - var_h1(6.0)))), 4.0);
}

INSTANTIATE_TEST_SUITE_P(Engines, EngineMoments, ::testing::Values(Engine::Cluster, Engine::Thinning),
                         [](const auto& info) { return to_string(info.param); });

TEST(Simulation, GenericThinningAgreesWithClusterForTabulatedKernel) {
  std::vector<double> values(41);
  for (std::size_t m = 0; m < values.size(); ++m) values[m] = 0.6 * std::max(0.0, 1.0 - m / 40.0);
  SimConfig sim{HawkesConfig(1.5, Kernel::tabulated(0.05, values)), 1.0, std::nullopt};
  sim.horizon = 20.0;
  sim.replications = 3000;
  sim.seed = 5;
  const double rate = 1.5 / (1.0 - 0.6);
  for (Engine e : {Engine::Cluster, Engine::Thinning}) {
    sim.engine = e;
    const auto paths = simulate_replications(sim);
    const auto m = empirical_moments(paths, std::vector<double>{20.0}).front();
    EXPECT_LT(std::abs(m.mean(0) - rate * 20.0) / m.mean_se(0), 4.0) << to_string(e);
  }
}

TEST(Simulation, PowerLawThinningMean) {
  SimConfig sim{HawkesConfig(1.0, Kernel::power_law(1.0, 4.0, 0.9)), 1.0, std::nullopt};  // ||h|| = 0.3
  sim.horizon = 15.0;
  sim.replications = 2000;
  sim.engine = Engine::Thinning;
  const auto paths = simulate_replications(sim);
  const auto m = empirical_moments(paths, std::vector<double>{15.0}).front();
  EXPECT_LT(std::abs(m.mean(0) - 15.0 / 0.7) / m.mean_se(0), 4.0);
}

TEST(Simulation, MultivariateMeansAndCrossCovarianceSign) {
  const Kernel q = Kernel::exponential(0.25, 1.0);
  const Kernel zero = Kernel::zero();
  // dimension 1 excites dimension 0 only
  SimConfig sim{HawkesConfig(1.0, MultiKernel(2, {zero, q, zero, zero}, {1.0, 1.0})), 1.0, std::nullopt};
  sim.horizon = 10.0;
  sim.replications = 3000;
  for (Engine e : {Engine::Cluster, Engine::Thinning}) {
    sim.engine = e;
    const auto paths = simulate_replications(sim);
    const auto m = empirical_moments(paths, std::vector<double>{10.0}).front();
    EXPECT_LT(std::abs(m.mean(0) - 12.5) / m.mean_se(0), 4.0);
    EXPECT_LT(std::abs(m.mean(1) - 10.0) / m.mean_se(1), 4.0);
    EXPECT_GT(m.cov(0, 1) / m.cov_se(0, 1), 4.0);
  }
}

TEST(Simulation, RejectsBadInput) {
  Stream rng(1, 0);
  const HawkesConfig cfg(1.0, Kernel::exponential(0.5, 1.0));
  EXPECT_THROW(simulate_cluster(cfg, 0.0, 1.0, rng), ConfigError);
  EXPECT_THROW(simulate_thinning(cfg, 1.0, -1.0, rng), ConfigError);
  EXPECT_THROW(engine_from_string("ogata"), ConfigError);
  EXPECT_EQ(engine_from_string("thinning"), Engine::Thinning);
  auto sim = h1_config(Engine::Cluster, 3);
  const auto paths = simulate_replications(sim);
  EXPECT_THROW(counts_at(paths, 0, 11.0), RangeError);
}

TEST(PointPathIo, CsvAndBinaryRoundTrip) {
  auto sim = h1_config(Engine::Thinning, 4);
  sim.config = HawkesConfig(1.0, MultiKernel(2, {Kernel::exponential(0.2, 1.0), Kernel::zero(), Kernel::zero(),
                                                 Kernel::exponential(0.3, 2.0)},
                                             {1.0, 0.5}));
  const auto paths = simulate_replications(sim);
  std::stringstream bin;
  write_paths_binary(bin, paths);
  EXPECT_EQ(read_paths_binary(bin), paths);
  std::stringstream csv;
  write_paths_csv(csv, paths);
  EXPECT_EQ(read_paths_csv(csv, sim.horizon, 2), paths);
  std::stringstream bad("HKPX");
  EXPECT_THROW(read_paths_binary(bad), ConfigError);
  std::stringstream bad_csv("replication,dimension,event_time\n0,0,11.5\n");
  EXPECT_THROW(read_paths_csv(bad_csv, 10.0, 1), ArgumentError);
}
