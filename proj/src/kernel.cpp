#include "rotostate/kernel.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "rotostate/error.hpp"

namespace rotostate {

namespace {
constexpr double kPi = std::numbers::pi;

double sin2half(double x) {
  double s = std::sin(0.5 * x);
  return s * s;
}
}  // namespace

double eval_A(double u, double up, double a, double dalpha) {
  const double b = a * a;
  const double sg = sin2half(dalpha);
  const double d = u - up;
  return 4.0 * sg + 4.0 * b * (u + up) * sg + b * b * (4.0 * u * up * sg + d * d);
}

double log_ratio_over_b(double u, double up, double a, double dalpha) {
  const double sg = sin2half(dalpha);
  if (sg == 0.0) throw Error(ErrorKind::SingularEvaluation, "log_ratio_over_b at coincident angle");
  const double b = a * a;
  const double d = u - up;
  const double y = (u + up) + b * (u * up + d * d / (4.0 * sg));
  if (b == 0.0) return y;
  return std::log1p(b * y) / b;
}

double eval_dA_da(double u, double up, double a, double dalpha) {
  const double sg = sin2half(dalpha);
  const double d = u - up;
  return 8.0 * a * (u + up) * sg + 4.0 * a * a * a * (4.0 * u * up * sg + d * d);
}

double eval_dA_du(double u, double up, double g, double gp, double a, double dalpha) {
  const double b = a * a;
  const double sg = sin2half(dalpha);
  return 4.0 * b * sg * (g + gp) + b * b * (4.0 * sg * (g * up + u * gp) + 2.0 * (u - up) * (g - gp));
}

BoundsReport check_kernel_bounds(long samples, double a, const Field& rtilde, std::uint64_t seed) {
  const Grid& g = *rtilde.grid;
  const double b = a * a;
  Field ra = d_alpha(rtilde);
  Field raa = d_alpha(ra);
  Eigen::MatrixXd rs = rtilde.v * g.D.transpose();
  Eigen::MatrixXd rss = rs * g.D.transpose();

  BoundsReport rep;
  rep.name = "bounds";
  rep.samples = samples;
  rep.fitted_c = std::numeric_limits<double>::infinity();
  rep.fitted_C2 = -std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ia(0, g.n_alpha - 1), is(0, g.n_s - 1);
  long used = 0;
  while (used < samples) {
    int i = ia(rng), t = is(rng), j = ia(rng), l = is(rng);
    if (i == j && t == l) continue;
    ++used;
    const double da = g.alpha[i] - g.alpha[j];
    const double sg = sin2half(da);
    const double d = g.s[t] - g.s[l];
    const double u = g.s[t] + rtilde.v(i, t), up = g.s[l] + rtilde.v(j, l);
    const double A = eval_A(u, up, a, da);
    const double base = sg + b * b * d * d;
    if (base > 0.0) {
      rep.fitted_c = std::min(rep.fitted_c, A / base);
      rep.fitted_C2 = std::max(rep.fitted_C2, std::log(A) - std::log(base));
    }
    if (b == 0.0) continue;
    // first and second derivatives in the target alpha and s, offsets fixed
    struct D1 { double du, dup, ddu, ddup; };
    D1 dirs[2] = {{ra.v(i, t), ra.v(j, l), raa.v(i, t), raa.v(j, l)},
                  {1.0 + rs(i, t), 1.0 + rs(j, l), rss(i, t), rss(j, l)}};
    const double base3 = b * (sg + b * d * d);
    const double base4 = b * (sg + b * (std::sqrt(sg) + std::abs(d) + d * d));
    for (const D1& q : dirs) {
      double dA = 4.0 * sg * b * (q.du * (1.0 + b * up) + (1.0 + b * u) * q.dup) +
                  2.0 * b * b * (u - up) * (q.du - q.dup);
      double d2A = 4.0 * sg * b * (q.ddu * (1.0 + b * up) + 2.0 * b * q.du * q.dup + (1.0 + b * u) * q.ddup) +
                   2.0 * b * b * ((q.du - q.dup) * (q.du - q.dup) + (u - up) * (q.ddu - q.ddup));
      if (base3 > 0.0) rep.fitted_C3 = std::max(rep.fitted_C3, std::abs(dA) / base3);
      if (base4 > 0.0) rep.fitted_C4 = std::max(rep.fitted_C4, std::abs(d2A) / base4);
    }
  }
  rep.samples = used;
  const double c_req = 0.25, C_req = 10.0;
  rep.worst_margin = std::min({rep.fitted_c - c_req, C_req - rep.fitted_C2, C_req - rep.fitted_C3, C_req - rep.fitted_C4});
  rep.ok = rep.worst_margin >= 0.0;
  if (!rep.ok) {
    std::ostringstream os;
    os << "c=" << rep.fitted_c << " C2=" << rep.fitted_C2 << " C3=" << rep.fitted_C3 << " C4=" << rep.fitted_C4;
    rep.violation = os.str();
  }
  return rep;
}

namespace {

template <class Fn>
double integrate_split(Fn f, double lo, double mid, double hi) {
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double tol = 1e-12;
  double r = 0.0;
  if (mid > lo) r += ts.integrate(f, lo, mid, tol);
  if (hi > mid) r += ts.integrate(f, mid, hi, tol);
  return r;
}

double scaling_integral(int m, int k, int l, double b) {
  auto outer = [&](double s) {
    // the strip below 1e-14 is negligible and underflows b^2 s^2
    if (s <= 1e-14) return 0.0;
    auto inner = [&](double x) {
      double sh = std::sin(0.5 * x);
      double den = sh * sh + b * b * s * s;
      return std::pow(sh, m) * std::pow(s, k) / std::pow(den, l);
    };
    double mid = std::min(kPi / 2, 8.0 * b * s);
    return integrate_split(inner, 0.0, mid, kPi);
  };
  // even in alpha and s
  return 4.0 * integrate_split(outer, 0.0, std::min(0.5, 8.0 * b), 1.0);
}

}  // namespace

ScalingReport check_kernel_scaling(int m, int k, int l, const std::vector<double>& b_list) {
  if (l < 1 || k < 0 || m < 0 || k + m + 1 - 2 * l < 0)
    throw Error(ErrorKind::InvalidParameter, "check_kernel_scaling needs l>=1, k,m>=0, k+m+1-2l>=0");
  if (b_list.size() < 2) throw Error(ErrorKind::InvalidParameter, "check_kernel_scaling needs two or more b values");
  ScalingReport rep;
  rep.m = m;
  rep.k = k;
  rep.l = l;
  if (m < 2 * l - 1) {
    rep.regime = "power";
    rep.predicted_exponent = m + 1 - 2 * l;
  } else if (m == 2 * l - 1) {
    rep.regime = "log";
  } else {
    rep.regime = "const";
  }
  std::vector<double> ratio;
  for (double b : b_list) {
    double I = scaling_integral(m, k, l, b);
    if (!std::isfinite(I)) throw Error(ErrorKind::GridTooCoarse, "A2 quadrature did not converge");
    rep.b.push_back(b);
    rep.I.push_back(I);
    double model = 1.0;
    if (rep.regime == "power") model = std::pow(b, rep.predicted_exponent);
    if (rep.regime == "log") model = std::log(1.0 / b);
    ratio.push_back(I / model);
  }
  const std::size_t n = rep.b.size();
  rep.fitted_exponent = (std::log(rep.I[n - 1]) - std::log(rep.I[0])) / (std::log(rep.b[n - 1]) - std::log(rep.b[0]));
  auto [mn, mx] = std::minmax_element(ratio.begin(), ratio.end());
  rep.flatness = *mx / *mn;
  if (rep.regime == "power")
    rep.ok = std::abs(rep.fitted_exponent - rep.predicted_exponent) <= 0.2 * std::abs(rep.predicted_exponent);
  else
    rep.ok = rep.flatness <= 1.2;
  return rep;
}

double check_arcsinh_identity(double b) {
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidParameter, "check_arcsinh_identity needs b > 0");
  auto f = [&](double x) {
    double sh = std::sin(0.5 * x);
    if (sh <= 0.0) return 0.0;
    if (sh < 1e-100) return std::log(sh * sh + b * b) - 2.0 * std::log(sh);
    return std::log1p(b * b / (sh * sh));
  };
  double q = 2.0 * integrate_split(f, 0.0, std::min(kPi / 2, 8.0 * b), kPi);
  return q - 4.0 * kPi * std::asinh(b);
}

}  // namespace rotostate
