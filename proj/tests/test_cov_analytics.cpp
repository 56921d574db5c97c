#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hawkesq/cov_analytics.hpp"

using namespace hawkesq;

namespace {

const Kernel h1 = Kernel::exponential(0.5, 1.0);
const Kernel h2 = Kernel::sum_of_exponentials({{0.1, 0.25}, {0.4, 4.0}});

double phi_h1(double t) { return 1.5 * std::exp(-0.5 * std::abs(t)); }
double K_h1(double t) { return 8.0 * t - 12.0 * (1.0 - std::exp(-0.5 * t)); }

// exponential-kernel Cov(G(t), G(s)), t >= s
double cov_G_exp(double alpha, double beta, double s, double t) {
  const double c = alpha * beta * (2 * beta - alpha) / (2 * std::pow(beta - alpha, 4));
  const double g = alpha - beta;
  return std::pow(beta, 3) * s / std::pow(beta - alpha, 3) +
         c * (-1.0 - std::exp(g * (t - s)) + std::exp(g * t) + std::exp(g * s));
}

const CovarianceDensity& phi1() {
  static const CovarianceDensity phi = solve_phi_grid(h1, {0.01, 40.0});
  return phi;
}

const CovarianceDensity& phi2() {
  static const CovarianceDensity phi = solve_phi_grid(h2, {0.01, 100.0});
  return phi;
}

MultiKernel symmetric_pair() {
  const Kernel q = Kernel::exponential(0.25, 1.0);
  return MultiKernel(2, {q, q, q, q}, {1.0, 1.0});
}

MultiKernel decoupled_pair() {
  return MultiKernel(2, {h1, Kernel::zero(), Kernel::zero(), h1}, {1.0, 1.0});
}

}  // namespace

TEST(Phi, ExponentialKernelMatchesClosedForm) {
  const auto& phi = phi1();
  EXPECT_EQ(phi.nodes, 4001u);
  double err = 0.0;
  for (std::size_t k = 0; k < phi.nodes; ++k) err = std::max(err, std::abs(phi.node(k) - phi_h1(k * phi.step)));
  EXPECT_LT(err, 1e-4);
  EXPECT_NEAR(phi(0.0), 1.5, 1e-4);
  EXPECT_NEAR(phi(-3.333), phi_h1(3.333), 1e-4);
  EXPECT_LT(phi.residual, 1e-6);
  EXPECT_THROW(phi(40.5), RangeError);
}

TEST(Phi, ClosedFormEvaluator) {
  const auto cf = phi_exponential_closed_form(0.5, 1.0, {0.01, 40.0});
  ASSERT_TRUE(cf.closed_form.has_value());
  EXPECT_DOUBLE_EQ(cf.closed_form->prefactor, 1.5);
  EXPECT_DOUBLE_EQ(cf.closed_form->decay, 0.5);
  EXPECT_DOUBLE_EQ(cf(2.0), phi_h1(2.0));
  EXPECT_DOUBLE_EQ(cf.node(100), phi_h1(1.0));
  EXPECT_EQ(phi_exponential_closed_form(0.0, 1.0, {0.01, 40.0})(1.0), 0.0);
  EXPECT_THROW(phi_exponential_closed_form(1.0, 1.0), StabilityError);
  // Laplace transform at 1: 1.5 / 1.5 = 1
  EXPECT_NEAR(cf.closed_form->prefactor / (1.0 + cf.closed_form->decay), 1.0, 1e-15);
}

TEST(Phi, ZeroKernelGivesZeroDensity) {
  const auto phi = solve_phi_grid(Kernel::zero(), {0.05, 10.0});
  for (double v : phi.values) EXPECT_EQ(v, 0.0);
  const auto v = variance_function(phi);
  for (double t : {0.0, 0.37, 2.0, 10.0}) EXPECT_NEAR(v.K(t), t, 1e-14);
  for (double s : {0.0, 1.0, 3.3})
    for (double t : {0.5, 3.3, 9.0}) EXPECT_NEAR(limit_covariance_G(v, s, t), std::min(s, t), 1e-14);
}

TEST(Phi, SolversAgree) {
  PhiGrid grid{0.1, 80.0};
  const auto gm = solve_phi_grid(h2, grid);
  grid.solver = PhiSolver::Dense;
  const auto dense = solve_phi_grid(h2, grid);
  grid.solver = PhiSolver::Picard;
  const Kernel mild = Kernel::exponential(0.4, 1.0);
  const auto picard = solve_phi_grid(mild, grid);
  grid.solver = PhiSolver::Dense;
  const auto dense1 = solve_phi_grid(mild, grid);
  for (std::size_t k = 0; k < gm.nodes; ++k) {
    EXPECT_NEAR(gm.node(k), dense.node(k), 1e-11);
    EXPECT_NEAR(picard.node(k), dense1.node(k), 1e-11);
  }
  grid.solver = PhiSolver::Picard;
  EXPECT_THROW(solve_phi_grid(h1, grid), ConfigError);
}

TEST(Phi, GridValidation) {
  EXPECT_THROW(solve_phi_grid(h1, {0.01, 40.005}), ConfigError);
  EXPECT_THROW(solve_phi_grid(h1, {0.01, 5.0}), ConfigError);  // tail mass beyond t_max
  EXPECT_THROW(solve_phi_grid(h1, {-0.01, 40.0}), ConfigError);
  EXPECT_THROW(solve_phi_grid(Kernel::exponential(1.2, 1.0)), StabilityError);
  EXPECT_DOUBLE_EQ(default_t_max(MultiKernel::univariate(h1), 0.01), 40.0);
  EXPECT_GE(default_t_max(MultiKernel::univariate(h2), 0.01), 80.0);
  EXPECT_LT(h2.tail_mass(default_t_max(MultiKernel::univariate(h2), 0.01)), 1e-8);
}

TEST(Phi, PropertiesOnGrid) {
  for (const auto* phi : {&phi1(), &phi2()}) {
    EXPECT_LT(phi->residual, 1e-6);
    EXPECT_GE(phi->min_value(), -1e-9);
    EXPECT_TRUE(std::isfinite(phi->l1_norm()));
    const auto v = variance_function(*phi);
    EXPECT_EQ(v.K(0.0), 0.0);
    const double lip = (v.unit_rates(0) + 2.0 * phi->l1_norm() + 1e-9) * v.step;
    double prev = 0.0, prev_inc = 0.0;
    for (std::size_t k = 1; k < v.nodes; ++k) {
      const double cur = v.K(k * v.step);
      const double inc = cur - prev;
      EXPECT_GE(inc, 0.0);
      EXPECT_LE(inc, lip);
      if (k > 1) {
        EXPECT_GE(inc - prev_inc, -1e-9);
      }
      prev = cur;
      prev_inc = inc;
    }
  }
}

TEST(Phi, NonExponentialKernelsSolve) {
  std::vector<double> tri(41);
  for (std::size_t m = 0; m < tri.size(); ++m) tri[m] = 0.6 * (1.0 - m / 40.0);
  for (const Kernel& h : {Kernel::tabulated(0.05, tri), Kernel::power_law(2.0, 4.5, 0.7)}) {
    const auto phi = solve_phi_grid(h, {0.05, std::nullopt});
    EXPECT_LT(phi.residual, 1e-6);
    EXPECT_GE(phi.min_value(), -1e-9);
    EXPECT_GT(phi.node(0), h(0.0) / (1.0 - h.l1_norm()));
  }
}

TEST(VarianceFunction, ExponentialClosedForms) {
  const auto v = variance_function(phi1());
  for (double t : {0.5, 1.0, 5.0}) EXPECT_NEAR(v.K(t), K_h1(t), 1e-3) << t;
  EXPECT_NEAR(v.K(20.0) / K_h1(20.0), 1.0, 2e-5);
  EXPECT_NEAR(limit_covariance_G(v, 1.0, 2.0), cov_G_exp(0.5, 1.0, 1.0, 2.0), 1e-3);
  EXPECT_NEAR(limit_covariance_G(v, 2.0, 1.0), cov_G_exp(0.5, 1.0, 1.0, 2.0), 1e-3);
  EXPECT_NEAR(limit_covariance_G(v, 3.0, 3.0), v.K(3.0), 1e-12);
  EXPECT_NEAR(v.K(40.0) - v.K(39.0), asymptotic_slope(h1), 1e-3);
  EXPECT_THROW(v.K(41.0), RangeError);
  EXPECT_THROW(limit_covariance_G(v, -1.0, 1.0), RangeError);
}

TEST(VarianceFunction, StationaryIncrements) {
  const auto v = variance_function(phi1());
  double worst = 0.0;
  for (std::size_t a = 0; a < v.nodes; a += 37)
    for (std::size_t b = 0; b <= a; b += 53) {
      const double t = a * v.step, s = b * v.step;
      worst = std::max(worst, std::abs(v.K(t) + v.K(s) - 2.0 * limit_covariance_G(v, s, t) - v.K(t - s)));
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(VarianceFunction, NonMarkovWitness) {
  const auto v = variance_function(phi1());
  const auto g = [&](double s, double t) { return limit_covariance_G(v, s, t); };
  const double witness = g(1, 3) * g(2, 2) - g(1, 2) * g(2, 3);
  EXPECT_GT(std::abs(witness), 1e-6);
  // the analytic value from the closed form
  const auto c = [](double s, double t) { return cov_G_exp(0.5, 1.0, std::min(s, t), std::max(s, t)); };
  EXPECT_NEAR(witness, c(1, 3) * c(2, 2) - c(1, 2) * c(2, 3), 1e-2);
}

TEST(Asymptotics, SlopeAndOffset) {
  EXPECT_EQ(asymptotic_slope(Kernel::zero()), 1.0);
  EXPECT_EQ(asymptotic_slope(h1), 8.0);
  EXPECT_DOUBLE_EQ(asymptotic_slope(h2), 8.0);
  EXPECT_EQ(asymptotic_offset(Kernel::zero()), 0.0);
  EXPECT_NEAR(asymptotic_offset(h1), -12.0, 1e-5);
  EXPECT_THROW(asymptotic_offset(Kernel::power_law(1.0, 2.8, 0.3)), IntegrabilityError);
  EXPECT_THROW(asymptotic_slope(Kernel::exponential(1.0, 1.0)), StabilityError);
}

TEST(Asymptotics, OffsetAgreesWithGridExtrapolation) {
  // K(t) - slope t - offset = 2 int_t^inf (u - t) phi(u) du; for h2 phi decays like exp(-0.139 t),
  // so the comparison is made at t = 80 on a 100-long grid.
  const auto v2 = variance_function(phi2());
  EXPECT_NEAR(v2.K(80.0) - 8.0 * 80.0, asymptotic_offset(h2), 5e-2);
  EXPECT_NEAR(v2.offset, asymptotic_offset(h2), 5e-3);
  std::vector<double> tri(41);
  for (std::size_t m = 0; m < tri.size(); ++m) tri[m] = 0.6 * (1.0 - m / 40.0);
  const Kernel h = Kernel::tabulated(0.05, tri);
  const auto v = variance_function(solve_phi_grid(h, {0.01, 150.0}));
  EXPECT_NEAR(v.offset, asymptotic_offset(h), 5e-3);
  EXPECT_LT(asymptotic_offset(h), 0.0);
}

TEST(LaplacePipeline, ExampleTwoConstants) {
  const auto res = laplace_pipeline(h2);
  EXPECT_NEAR(res.R(0), 0.8333, 5e-4);
  EXPECT_NEAR(res.R(1), 0.1587, 5e-4);
  EXPECT_NEAR(res.M(0, 0), 0.2833, 5e-4);
  EXPECT_NEAR(res.M(0, 1), 0.1333, 5e-4);
  EXPECT_NEAR(res.M(1, 0), 0.0254, 5e-4);
  EXPECT_NEAR(res.M(1, 1), 0.054, 5e-4);
  // (I - M) X = R solved exactly: X = [6/5, 1/5], phi-tilde(1) = 18/35
  EXPECT_NEAR(res.X(0), 1.2, 1e-12);
  EXPECT_NEAR(res.X(1), 0.2, 1e-12);
  EXPECT_NEAR(res.phi_tilde(1.0), 18.0 / 35.0, 1e-12);
  EXPECT_LT(res.residual, 1e-10);
  EXPECT_NEAR(res.phi_tilde(0.25), res.X(0), 1e-12);
  EXPECT_NEAR(res.phi_tilde(4.0), res.X(1), 1e-12);
}

TEST(LaplacePipeline, AgreesWithGridTransform) {
  for (const auto& [h, phi] : {std::pair{h1, &phi1()}, std::pair{h2, &phi2()}}) {
    const auto res = laplace_pipeline(h);
    for (double w : {0.5, 1.0, 2.0}) {
      EXPECT_NEAR(res.phi_tilde(w), laplace_of_grid(*phi, w), 1e-3) << w;
      EXPECT_GT(res.phi_tilde(w), 0.0);
    }
  }
  EXPECT_NEAR(laplace_pipeline(h1).phi_tilde(1.0), 1.0, 1e-14);
  EXPECT_THROW(laplace_pipeline(Kernel::power_law(1.0, 3.0, 0.5)), ArgumentError);
}

TEST(Multivariate, ReducesToUnivariate) {
  const PhiGrid grid{0.02, 40.0};
  const auto uni = solve_phi_grid(h1, grid);
  const auto multi = solve_multivariate_phi(MultiKernel::univariate(h1), grid);
  for (std::size_t k = 0; k < uni.nodes; ++k) EXPECT_NEAR(uni.node(k), multi.node(k), 1e-10);
  const auto vu = variance_function(uni);
  const auto vm = variance_function(multi);
  for (double t : {0.0, 1.3, 7.0}) {
    EXPECT_NEAR(multivariate_variance(vm, t)(0, 0), vu.K(t), 1e-8);
    EXPECT_NEAR(limit_covariance_multi(vm, 1.0, t)(0, 0), limit_covariance_G(vu, 1.0, t), 1e-8);
  }
}

TEST(Multivariate, DecoupledPair) {
  const PhiGrid grid{0.02, 40.0};
  const auto phi = solve_multivariate_phi(decoupled_pair(), grid);
  const auto uni = solve_phi_grid(h1, grid);
  for (std::size_t k = 0; k < phi.nodes; ++k) {
    EXPECT_LT(std::abs(phi.node(k, 0, 1)), 1e-8);
    EXPECT_LT(std::abs(phi.node(k, 1, 0)), 1e-8);
    EXPECT_NEAR(phi.node(k, 0, 0), uni.node(k), 1e-10);
  }
  const auto v = variance_function(phi);
  EXPECT_TRUE(multivariate_variance(v, 0.0).isZero(0.0));
  const auto K = multivariate_variance(v, 5.0);
  EXPECT_LT(std::abs(K(0, 1)), 1e-8);
  EXPECT_NEAR(K(1, 1), K_h1(5.0), 1e-3);
  const auto C = limit_covariance_multi(v, 1.0, 2.0);
  EXPECT_LT(std::abs(C(0, 1)), 1e-8);
  EXPECT_LT(std::abs(C(1, 0)), 1e-8);
  EXPECT_NEAR(limit_covariance_multi(v, 3.0, 3.0)(1, 1), multivariate_variance(v, 3.0)(1, 1), 1e-12);
}

TEST(Multivariate, SymmetricPairIsExchangeableAndMatchesClosedForm) {
  const auto phi = solve_multivariate_phi(symmetric_pair(), {0.01, 40.0});
  EXPECT_NEAR(phi.unit_rates(0), 2.0, 1e-14);
  double asym = 0.0, err = 0.0;
  for (std::size_t k = 0; k < phi.nodes; ++k) {
    asym = std::max({asym, std::abs(phi.node(k, 0, 1) - phi.node(k, 1, 0)),
                     std::abs(phi.node(k, 0, 0) - phi.node(k, 1, 1))});
    // every entry equals 0.75 exp(-t/2): the total count is the h1 process with rate 2x
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        err = std::max(err, std::abs(phi.node(k, i, j) - 0.5 * phi_h1(k * phi.step)));
  }
  EXPECT_EQ(asym, 0.0);
  EXPECT_LT(err, 1e-4);
  EXPECT_LT(phi.residual, 1e-6);
}

TEST(Multivariate, AutomorphismsOfTheConfiguration) {
  const Kernel q = Kernel::exponential(0.25, 1.0), z = Kernel::zero();
  EXPECT_EQ(detail::kernel_automorphisms(symmetric_pair()).size(), 2u);
  EXPECT_EQ(detail::kernel_automorphisms(MultiKernel(2, {q, q, q, q}, {1.0, 0.5})).size(), 1u);
  EXPECT_EQ(detail::kernel_automorphisms(MultiKernel(2, {z, q, z, z}, {1.0, 1.0})).size(), 1u);
  // a directed 3-cycle is invariant under rotations only
  EXPECT_EQ(detail::kernel_automorphisms(MultiKernel(3, {z, q, z, z, z, q, q, z, z}, {1.0, 1.0, 1.0})).size(), 3u);
}

TEST(CsvOutput, Headers) {
  std::ostringstream a, b, c;
  write_phi_csv(a, phi1());
  write_variance_csv(b, variance_function(phi1()), 100);
  const std::vector<double> times{1.0, 2.0};
  write_cov_G_csv(c, variance_function(phi1()), times);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "t,phi");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "t,K");
  EXPECT_EQ(c.str().substr(0, c.str().find('\n')), "s,t,cov");
}
