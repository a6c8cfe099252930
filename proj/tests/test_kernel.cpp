#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rotostate/error.hpp"
#include "rotostate/kernel.hpp"

using namespace rotostate;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Kernel, EvalA) {
  EXPECT_NEAR(eval_A(0.3, -0.1, 0.0, kPi), 4.0, 1e-15);
  EXPECT_EQ(eval_A(0.4, 0.4, 0.37, 0.0), 0.0);
  // exact rational evaluation: sigma = 1/2, b = 1/100
  // 4 sigma (1 + b u)(1 + b u') + b^2 (u - u')^2 with u = 1/2, u' = 1/5
  const double ex = 2.0 * (1.0 + 0.005) * (1.0 + 0.002) + 1e-4 * 0.09;
  EXPECT_NEAR(eval_A(0.5, 0.2, 0.1, kPi / 2), ex, 1e-15);
  // A[r, 0] = 4 sin^2
  for (double d : {0.1, 1.0, 2.5}) EXPECT_NEAR(eval_A(0.7, -0.2, 0.0, d), 4 * std::pow(std::sin(d / 2), 2), 1e-15);
}

TEST(Kernel, EvalASymmetry) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    const double x = u(rng), y = u(rng), a = 0.3 * u(rng), d = kPi * u(rng);
    EXPECT_EQ(eval_A(x, y, a, d), eval_A(y, x, a, -d));
    if (std::abs(d) > 1e-3) EXPECT_GT(eval_A(x, y, a, d), 0.0);
  }
}

TEST(Kernel, LogRatioOverB) {
  EXPECT_NEAR(log_ratio_over_b(0.3, -0.7, 0.0, kPi / 3), -0.4, 1e-15);
  EXPECT_EQ(log_ratio_over_b(0.0, 0.0, 0.2, 1.0), 0.0);
  EXPECT_THROW(log_ratio_over_b(0.1, 0.2, 0.0, 0.0), Error);
  const double lim = log_ratio_over_b(0.4, 0.1, 0.0, 0.8);
  const double v4 = log_ratio_over_b(0.4, 0.1, 1e-4, 0.8);
  const double v6 = log_ratio_over_b(0.4, 0.1, 1e-6, 0.8);
  EXPECT_NEAR(v4, lim, 1e-7);
  EXPECT_NEAR(v6, lim, 1e-11);
  EXPECT_LT(std::abs(v4 - lim), 1.1e4 * std::abs(v6 - lim) + 1e-15);
  const double v8 = log_ratio_over_b(0.4, 0.1, 1e-8, 0.8);
  EXPECT_LT(std::abs(v8 - lim) / std::abs(lim), 1e-12);
  // consistency with eval_A
  const double a = 0.3, b = a * a;
  EXPECT_NEAR(log_ratio_over_b(0.4, 0.1, a, 0.8), std::log(eval_A(0.4, 0.1, a, 0.8) / eval_A(0.4, 0.1, 0, 0.8)) / b,
              1e-12);
}

TEST(Kernel, DerivativeInA) {
  EXPECT_EQ(eval_dA_da(0.3, 0.2, 0.0, 1.0), 0.0);
  EXPECT_EQ(eval_dA_da(0.0, 0.0, 0.2, 1.0), 0.0);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  for (int n = 0; n < 50; ++n) {
    const double x = u(rng), y = u(rng), a = 0.3 * u(rng), d = kPi * u(rng);
    const double fd = (eval_A(x, y, a + h, d) - eval_A(x, y, a - h, d)) / (2 * h);
    EXPECT_NEAR(eval_dA_da(x, y, a, d), fd, 1e-9);
  }
}

TEST(Kernel, DerivativeInU) {
  EXPECT_EQ(eval_dA_du(0.3, 0.2, 0.0, 0.0, 0.2, 1.0), 0.0);
  EXPECT_EQ(eval_dA_du(0.3, 0.2, 0.5, -0.4, 0.0, 1.0), 0.0);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double t = 1e-5;
  for (int n = 0; n < 50; ++n) {
    const double x = u(rng), y = u(rng), g = u(rng), gp = u(rng), a = 0.3 * u(rng), d = kPi * u(rng);
    const double fd = (eval_A(x + t * g, y + t * gp, a, d) - eval_A(x - t * g, y - t * gp, a, d)) / (2 * t);
    EXPECT_NEAR(eval_dA_du(x, y, g, gp, a, d), fd, 1e-9);
  }
}

TEST(Kernel, BoundsA1) {
  auto g = Grid::make(3, 96, 16, 8);
  Field zero(g, Parity::Even, true);
  BoundsReport r0 = check_kernel_bounds(10000, 0.0, zero, 7);
  EXPECT_TRUE(r0.ok);
  EXPECT_NEAR(r0.fitted_c, 4.0, 1e-12);
  EXPECT_EQ(r0.samples, 10000);

  BoundsReport r1 = check_kernel_bounds(10000, 0.1, zero, 7);
  EXPECT_TRUE(r1.ok) << r1.violation;
  EXPECT_GE(r1.fitted_c, 0.25);
  EXPECT_GT(r1.fitted_C3, 0.0);
  EXPECT_LE(r1.fitted_C3, 10.0);

  Field rt(g, Parity::Even, true);
  for (int i = 0; i < g->n_alpha; ++i)
    for (int l = 0; l < g->n_s; ++l) rt.v(i, l) = 0.05 * (1 - g->s[l] * g->s[l]) * std::cos(3 * g->alpha[i]);
  BoundsReport r2 = check_kernel_bounds(10000, 0.1, rt, 9);
  EXPECT_TRUE(r2.ok) << r2.violation;
}

TEST(Kernel, ScalingA2) {
  const std::vector<double> bs = {1e-2, 1e-3, 1e-4};
  ScalingReport p = check_kernel_scaling(0, 1, 1, bs);
  EXPECT_EQ(p.regime, "power");
  EXPECT_NEAR(p.fitted_exponent, -1.0, 0.2);
  EXPECT_TRUE(p.ok);
  ScalingReport l = check_kernel_scaling(1, 1, 1, bs);
  EXPECT_EQ(l.regime, "log");
  EXPECT_TRUE(l.ok) << l.flatness;
  ScalingReport c = check_kernel_scaling(3, 0, 1, bs);
  EXPECT_EQ(c.regime, "const");
  EXPECT_TRUE(c.ok) << c.flatness;
  EXPECT_THROW(check_kernel_scaling(0, 0, 1, bs), Error);
}

TEST(Kernel, ArcsinhIdentity) {
  for (double b : {1.0, 0.1, 1e-3, 1e-6}) EXPECT_LT(std::abs(check_arcsinh_identity(b)), 1e-8) << b;
  EXPECT_THROW(check_arcsinh_identity(0.0), Error);
}
