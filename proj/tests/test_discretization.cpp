#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "rotostate/discretization.hpp"
#include "rotostate/error.hpp"

using namespace rotostate;

namespace {
constexpr double kPi = std::numbers::pi;

Field harmonic(GridPtr g, int k, bool odd, double (*prof)(double)) {
  Field f(g, odd ? Parity::Odd : Parity::Even, true);
  for (int i = 0; i < g->n_alpha; ++i)
    for (int l = 0; l < g->n_s; ++l) {
      const double x = k * g->alpha[i];
      f.v(i, l) = (odd ? std::sin(x) : std::cos(x)) * prof(g->s[l]);
    }
  return f;
}

double one(double) { return 1.0; }
double ident(double s) { return s; }
}  // namespace

TEST(Grid, Invariants) {
  auto g = Grid::make(3, 96, 12, 8);
  double sum = 0.0;
  for (double w : g->w) {
    EXPECT_GT(w, 0.0);
    sum += w;
  }
  EXPECT_NEAR(sum, 2.0, 1e-14);
  EXPECT_THROW(Grid::make(3, 90, 12, 8), Error);  // below 4 J m
  EXPECT_THROW(Grid::make(3, 100, 12, 8), Error); // not a multiple of 2m
  EXPECT_EQ(Grid::admissible_n_alpha(256, 3, 16), 258);
  EXPECT_EQ(Grid::admissible_n_alpha(256, 5, 16), 320);
  EXPECT_EQ(Grid::admissible_n_alpha(256, 2, 16), 256);
}

TEST(Grid, GaussLegendreExact) {
  std::vector<double> x, w;
  gauss_legendre(10, x, w);
  for (int p = 0; p <= 19; ++p) {
    double q = 0.0;
    for (int i = 0; i < 10; ++i) q += w[i] * std::pow(x[i], p);
    const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
    EXPECT_NEAR(q, exact, 1e-14) << p;
  }
}

TEST(Grid, DifferentiationMatrixExactOnPolynomials) {
  auto g = Grid::make(2, 32, 14, 2);
  Eigen::VectorXd f(g->n_s), df(g->n_s);
  for (int p = 0; p < g->n_s; ++p) {
    for (int l = 0; l < g->n_s; ++l) {
      f(l) = std::pow(g->s[l], p);
      df(l) = p ? p * std::pow(g->s[l], p - 1) : 0.0;
    }
    EXPECT_LT((g->D * f - df).cwiseAbs().maxCoeff(), 1e-10) << p;
  }
}

TEST(Modes, SingleHarmonics) {
  auto g = Grid::make(3, 96, 10, 8);
  double tr = -1.0;
  ModeStack c = to_modes(harmonic(g, 3, false, one), &tr);
  for (int j = 0; j < 8; ++j)
    for (int l = 0; l < 10; ++l) EXPECT_NEAR(c.c(j, l), j == 0 ? 1.0 : 0.0, 1e-14);
  EXPECT_LT(tr, 1e-14);

  Field z(g, Parity::Even, true);
  EXPECT_EQ(to_modes(z).c.cwiseAbs().maxCoeff(), 0.0);

  ModeStack s = to_modes(harmonic(g, 6, true, ident));
  for (int j = 0; j < 8; ++j)
    for (int l = 0; l < 10; ++l) EXPECT_NEAR(s.c(j, l), j == 1 ? g->s[l] : 0.0, 1e-14);

  Field untagged(g);
  EXPECT_THROW(to_modes(untagged), Error);
}

TEST(Modes, TruncationReported) {
  auto g = Grid::make(2, 64, 6, 4);
  double tr = 0.0;
  to_modes(harmonic(g, 10 * 2, false, one), &tr);  // beyond the retained band
  EXPECT_GT(tr, 0.5);
}

TEST(Modes, FromModesAndRoundTrip) {
  auto g = Grid::make(3, 96, 10, 8);
  ModeStack zero(g, Parity::Even);
  EXPECT_EQ(from_modes(zero).v.cwiseAbs().maxCoeff(), 0.0);
  ModeStack one_(g, Parity::Even);
  one_.c.row(0).setOnes();
  Field f = from_modes(one_);
  EXPECT_LT((f.v - harmonic(g, 3, false, one).v).cwiseAbs().maxCoeff(), 1e-14);

  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  for (Parity p : {Parity::Even, Parity::Odd}) {
    ModeStack r(g, p);
    for (int j = 0; j < 8; ++j)
      for (int l = 0; l < 10; ++l) r.c(j, l) = nd(rng);
    ModeStack back = to_modes(from_modes(r));
    EXPECT_LT((back.c - r.c).cwiseAbs().maxCoeff(), 1e-12);
    ModeStack flat = ModeStack::from_flat(g, p, r.flat());
    EXPECT_EQ((flat.c - r.c).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Modes, SymmetryOfSynthesizedFields) {
  auto g = Grid::make(3, 96, 6, 8);
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  ModeStack r(g, Parity::Even);
  for (int j = 0; j < 8; ++j)
    for (int l = 0; l < 6; ++l) r.c(j, l) = nd(rng);
  Field f = from_modes(r);
  const int N = g->n_alpha, P = N / 3;
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < 6; ++l) {
      EXPECT_NEAR(f.v(i, l), f.v((N - i) % N, l), 1e-12);
      EXPECT_NEAR(f.v(i, l), f.v((i + P) % N, l), 1e-12);
    }
}

TEST(Derivative, AlphaDerivativeOfHarmonic) {
  auto g = Grid::make(3, 96, 6, 8);
  for (int j = 1; j <= 8; ++j) {
    Field c = harmonic(g, 3 * j, false, one);
    Field ds = d_alpha(c);
    ModeStack dm = d_alpha(to_modes(c));
    EXPECT_EQ(dm.parity, Parity::Odd);
    for (int i = 0; i < g->n_alpha; ++i) {
      const double ex = -3.0 * j * std::sin(3.0 * j * g->alpha[i]);
      EXPECT_NEAR(ds.v(i, 0), ex, 1e-11);
    }
    EXPECT_NEAR(dm.c(j - 1, 0), -3.0 * j, 1e-12);
  }
}

TEST(Norms, Basic) {
  auto g = Grid::make(3, 96, 12, 8);
  Field z(g, Parity::Even, true);
  EXPECT_EQ(sobolev_norm_43(z), 0.0);
  EXPECT_EQ(l2_norm(z), 0.0);

  // cos(3 alpha): terms |f|^2 + |d_alpha^4 f|^2, alpha-s mixed terms vanish
  Field c = harmonic(g, 3, false, one);
  const double l2sq = kPi * 2.0;
  EXPECT_NEAR(l2_norm(c), std::sqrt(l2sq), 1e-12);
  EXPECT_NEAR(sobolev_norm_43(c), std::sqrt((1.0 + std::pow(3.0, 8)) * l2sq), 1e-9);

  std::mt19937 rng(2);
  std::normal_distribution<double> nd;
  for (int n = 0; n < 5; ++n) {
    ModeStack a(g, Parity::Even), b(g, Parity::Even);
    for (int j = 0; j < 8; ++j)
      for (int l = 0; l < 12; ++l) {
        a.c(j, l) = nd(rng) / (j + 1.0);
        b.c(j, l) = nd(rng) / (j + 1.0);
      }
    Field fa = from_modes(a), fb = from_modes(b);
    Field fs = fa;
    fs.v += fb.v;
    EXPECT_LE(sobolev_norm_43(fs), sobolev_norm_43(fa) + sobolev_norm_43(fb) + 1e-9);
    EXPECT_LE(sobolev_norm_33(fs), sobolev_norm_33(fa) + sobolev_norm_33(fb) + 1e-9);
    EXPECT_GT(sobolev_norm_43(fa), 0.0);
  }
}

TEST(Field, CsvDump) {
  auto g = Grid::make(2, 16, 4, 2);
  Field c = harmonic(g, 2, false, ident);
  const std::string path = ::testing::TempDir() + "field.csv";
  write_field_csv(c, path);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 + 16);
}

TEST(Grid, LagrangeDerivativeNearNode) {
  auto g = Grid::make(2, 32, 16, 2);
  Eigen::VectorXd f(g->n_s), ell, dell;
  for (int l = 0; l < g->n_s; ++l) f(l) = std::sin(2.0 * g->s[l]);
  for (int l : {0, 7, 15})
    for (double dx : {0.0, 1e-17, 4e-16, 1e-9, 1e-5}) {
      const double x = g->s[l] + dx;
      g->lagrange(x, ell, &dell);
      EXPECT_NEAR(dell.dot(f), 2.0 * std::cos(2.0 * x), 1e-9) << l << " " << dx;
      EXPECT_NEAR(ell.dot(f), std::sin(2.0 * x), 1e-12);
    }
}
