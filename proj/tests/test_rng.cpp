#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hawkesq/rng.hpp"
#include "hawkesq/stats.hpp"

using namespace hawkesq;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(Stream, DeterministicAndDistinct) {
  Stream a(42, 3, 1), b(42, 3, 1), c(42, 4, 1), d(42, 3, 2);
  std::set<double> seen;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Stream, MomentsOfVariates) {
  Stream rng(7, 0);
  constexpr int n = 200000;
  std::vector<double> u(n), e(n), z(n), p(n), q(n);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform();
    e[i] = rng.exponential(2.0);
    z[i] = rng.normal();
    p[i] = static_cast<double>(rng.poisson(3.5));
    q[i] = static_cast<double>(rng.poisson(45.0));
  }
  EXPECT_LT(std::abs(sample_mean(u).z(0.5)), 4.0);
  EXPECT_LT(std::abs(sample_mean(e).z(0.5)), 4.0);
  EXPECT_LT(std::abs(sample_variance(e).z(0.25)), 4.0);
  EXPECT_LT(std::abs(sample_mean(z).z(0.0)), 4.0);
  EXPECT_LT(std::abs(sample_variance(z).z(1.0)), 4.0);
  EXPECT_LT(std::abs(sample_mean(p).z(3.5)), 4.0);
  EXPECT_LT(std::abs(sample_variance(p).z(3.5)), 4.0);
  EXPECT_LT(std::abs(sample_mean(q).z(45.0)), 4.0);
  EXPECT_LT(std::abs(sample_variance(q).z(45.0)), 4.0);
}

TEST(Stream, PoissonRejectsBadMean) {
  Stream rng(1, 0);
  EXPECT_THROW(rng.poisson(-1.0), ArgumentError);
  EXPECT_THROW(rng.poisson(NAN), ArgumentError);
  EXPECT_EQ(rng.poisson(0.0), 0u);
}

TEST(Stats, CovarianceOfKnownSample) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
  EXPECT_DOUBLE_EQ(sample_covariance(x, y).value, 10.0 / 3.0);
  EXPECT_DOUBLE_EQ(sample_mean(x).value, 2.5);
  EXPECT_THROW(sample_mean(std::vector<double>{1.0}), ArgumentError);
}
