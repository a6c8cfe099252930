#include "rotostate/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <numbers>

#include "rotostate/dual.hpp"
#include "rotostate/error.hpp"
#include "rotostate/kernel.hpp"

namespace rotostate {

namespace {
constexpr double kPi = std::numbers::pi;

using std::asinh;
using std::exp;
using std::expm1;
using std::log;
using std::log1p;
using std::sqrt;

template <class Fn>
double tanh_sinh_split(Fn f, double lo, double mid, double hi) {
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double r = 0.0;
  if (mid > lo) r += ts.integrate(f, lo, mid, 1e-14);
  if (hi > mid) r += ts.integrate(f, mid, hi, 1e-14);
  return r;
}

template <class T>
T expm1_asinh_over(T b, T kappa, int n) {
  if (value_of(b) == 0.0) return T(-2.0 * n) * kappa;
  return expm1(-2.0 * n * asinh(b * kappa)) / b;
}

}  // namespace

double fourier_log_multiplier(int k) {
  if (k < 0) throw Error(ErrorKind::InvalidParameter, "fourier_log_multiplier needs k >= 0");
  return k == 0 ? 0.0 : -2.0 * kPi / k;
}

const char* to_string(ExactIntegral id) {
  switch (id) {
    case ExactIntegral::LogCos: return "log-cos";
    case ExactIntegral::LogCosCos: return "log-cos-cos";
    case ExactIntegral::LogSinSin: return "log-sin-sin";
    case ExactIntegral::CosCos: return "cos-cos";
    case ExactIntegral::SinSin: return "sin-sin";
  }
  return "unknown";
}

double exact_integral(ExactIntegral id, int m) {
  if (m < 1) throw Error(ErrorKind::InvalidParameter, "exact_integral needs m >= 1");
  const double mm = m;
  switch (id) {
    case ExactIntegral::LogCos: return fourier_log_multiplier(1);
    case ExactIntegral::LogCosCos: return m == 1 ? -kPi / 2 : -2.0 * kPi * mm / (mm * mm - 1.0);
    case ExactIntegral::LogSinSin: return m == 1 ? kPi / 2 : -2.0 * kPi / (mm * mm - 1.0);
    case ExactIntegral::CosCos: return m == 1 ? kPi : 0.0;
    case ExactIntegral::SinSin: return m == 1 ? kPi : 0.0;
  }
  throw Error(ErrorKind::InvalidParameter, "unknown integral id");
}

double exact_integral_quadrature(ExactIntegral id, int m) {
  auto lg = [](double t) { return 2.0 * std::log(2.0 * std::sin(0.5 * t)); };
  std::function<double(double)> f;
  switch (id) {
    case ExactIntegral::LogCos: f = [&](double t) { return lg(t) * std::cos(t); }; break;
    case ExactIntegral::LogCosCos: f = [&](double t) { return lg(t) * std::cos(t) * std::cos(m * t); }; break;
    case ExactIntegral::LogSinSin: f = [&](double t) { return lg(t) * std::sin(t) * std::sin(m * t); }; break;
    case ExactIntegral::CosCos: f = [&](double t) { return std::cos(t) * std::cos(m * t); }; break;
    case ExactIntegral::SinSin: f = [&](double t) { return std::sin(t) * std::sin(m * t); }; break;
  }
  // integrands are even in t
  return 2.0 * tanh_sinh_split(f, 0.0, kPi / 2, kPi);
}

double log_diagonal_closed(double c) { return 4.0 * kPi * std::asinh(c); }

double log_diagonal_quadrature(double c) {
  auto f = [&](double t) {
    double sh = std::sin(0.5 * t);
    return std::log(4.0 * sh * sh + 4.0 * c * c);
  };
  return 2.0 * tanh_sinh_split(f, 0.0, std::min(kPi / 2, 8.0 * c), kPi);
}

template <class T>
T log1p_over(T b, T x) {
  if (value_of(b) == 0.0) return x;
  return log1p(b * x) / b;
}

Eigen::VectorXd kink_fraction_at(const Grid& g, double st) {
  const int n = g.n_s;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (!(st > -1.0 && st < 1.0)) return out;
  std::vector<double> xq, wq;
  gauss_legendre(n, xq, wq);
  Eigen::VectorXd ell, omega = Eigen::VectorXd::Zero(n);
  const double pieces[2][2] = {{-1.0, st}, {st, 1.0}};
  for (const auto& pc : pieces) {
    const double h = 0.5 * (pc[1] - pc[0]), c = 0.5 * (pc[1] + pc[0]);
    for (int q = 0; q < n; ++q) {
      double x = c + h * xq[q];
      g.lagrange(x, ell);
      omega += (h * wq[q] * std::abs(st - x)) * ell;
    }
  }
  for (int l = 0; l < n; ++l) out(l) = omega(l) - g.w[l] * std::abs(st - g.s[l]);
  return out;
}

TargetWeights target_weights(const Grid& g, const std::vector<double>& Fr, double b, double alpha_t, double st) {
  const int N = g.n_alpha, ns = g.n_s, H = N / 2;
  if (!(1.0 + b * st > 0.0)) throw Error(ErrorKind::InvalidParameter, "target lies at or inside the origin");
  TargetWeights tw;
  tw.W.assign(static_cast<std::size_t>(ns) * N, 0.0);
  tw.kink.assign(ns, 0.0);
  const double pos = alpha_t * N / (2.0 * kPi);
  const double near = std::round(pos);
  if (std::abs(pos - near) < 1e-12) tw.alpha_index = ((static_cast<int>(near) % N) + N) % N;
  std::vector<double> ct(H + 1), stt(H + 1), cj(N), sj(N);
  for (int n = 0; n <= H; ++n) {
    ct[n] = std::cos(n * alpha_t);
    stt[n] = std::sin(n * alpha_t);
  }
  for (int k = 0; k < N; ++k) {
    cj[k] = std::cos(2.0 * kPi * k / N);
    sj[k] = std::sin(2.0 * kPi * k / N);
  }
  Eigen::VectorXd kf = kink_fraction_at(g, st);
  std::vector<double> mu(H + 1);
  for (int l = 0; l < ns; ++l) {
    const double sl = g.s[l];
    const double p = (1.0 + b * st) * (1.0 + b * sl);
    const double sp = std::sqrt(p);
    const double c = b * std::abs(st - sl) / (2.0 * sp);
    const double ash = std::asinh(c);
    mu[0] = 2.0 * kPi * std::log(p) + 4.0 * kPi * ash;
    for (int n = 1; n <= H; ++n) mu[n] = (-2.0 * kPi / n) * std::exp(-2.0 * n * ash);
    double* W = &tw.W[static_cast<std::size_t>(l) * N];
    for (int j = 0; j < N; ++j) {
      double acc = mu[0];
      for (int n = 1; n < H; ++n) {
        const int k = static_cast<int>((static_cast<long>(n) * j) % N);
        acc += 2.0 * mu[n] * (ct[n] * cj[k] + stt[n] * sj[k]);
      }
      acc += mu[H] * ((j % 2) ? -1.0 : 1.0) * ct[H];
      W[j] = acc / N;
    }
    tw.kink[l] = kf(l) * Fr[l] * 2.0 * kPi * b / sp;
  }
  return tw;
}

Eigen::MatrixXd kink_fractions(const Grid& g) {
  const int n = g.n_s;
  std::vector<double> xq, wq;
  gauss_legendre(n, xq, wq);
  Eigen::MatrixXd out(n, n);
  Eigen::VectorXd ell;
  for (int t = 0; t < n; ++t) {
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(n);
    const double st = g.s[t];
    const double pieces[2][2] = {{-1.0, st}, {st, 1.0}};
    for (const auto& pc : pieces) {
      const double h = 0.5 * (pc[1] - pc[0]), c = 0.5 * (pc[1] + pc[0]);
      for (int q = 0; q < n; ++q) {
        double x = c + h * xq[q];
        g.lagrange(x, ell);
        omega += (h * wq[q] * std::abs(st - x)) * ell;
      }
    }
    for (int l = 0; l < n; ++l) out(t, l) = omega(l) - g.w[l] * std::abs(st - g.s[l]);
  }
  return out;
}

template <class T>
LineWeights<T> build_line_weights(const Grid& g, const std::vector<double>& Fr, const Eigen::MatrixXd& kinkfrac,
                                  T b) {
  const int N = g.n_alpha, ns = g.n_s, H = N / 2;
  LineWeights<T> lw;
  lw.n_alpha = N;
  lw.n_s = ns;
  lw.b = b;
  lw.W.assign(static_cast<std::size_t>(ns) * ns * N, T(0.0));
  lw.W3.assign(static_cast<std::size_t>(ns) * ns * N, T(0.0));
  lw.kink.assign(static_cast<std::size_t>(ns) * ns, T(0.0));
  std::vector<double> ctab(N);
  for (int k = 0; k < N; ++k) ctab[k] = std::cos(2.0 * kPi * k / N);
  std::vector<T> mu(H + 1), mu3(H + 1);

  for (int t = 0; t < ns; ++t) {
    for (int l = t; l < ns; ++l) {
      const double st = g.s[t], sl = g.s[l];
      const double e = std::abs(st - sl);
      T p = (1.0 + b * st) * (1.0 + b * sl);
      T sp = sqrt(p);
      T kappa = e / (2.0 * sp);
      T c = b * kappa;
      T ash = asinh(c);
      mu[0] = 2.0 * kPi * log(p) + 4.0 * kPi * ash;
      mu3[0] = 2.0 * kPi * (log1p_over(b, T(st)) + log1p_over(b, T(sl)));
      if (value_of(b) == 0.0)
        mu3[0] += 4.0 * kPi * kappa;
      else
        mu3[0] += 4.0 * kPi * ash / b;
      for (int n = 1; n <= H; ++n) {
        mu[n] = (-2.0 * kPi / n) * exp(-2.0 * n * ash);
        mu3[n] = (-2.0 * kPi / n) * expm1_asinh_over(b, kappa, n);
      }
      T* W = &lw.W[(static_cast<std::size_t>(t) * ns + l) * N];
      T* W3 = &lw.W3[(static_cast<std::size_t>(t) * ns + l) * N];
      for (int k = 0; k <= H; ++k) {
        T acc = mu[0], acc3 = mu3[0];
        for (int n = 1; n < H; ++n) {
          double cs = 2.0 * ctab[(static_cast<long>(n) * k) % N];
          acc += cs * mu[n];
          acc3 += cs * mu3[n];
        }
        double ny = (k % 2) ? -1.0 : 1.0;
        acc += ny * mu[H];
        acc3 += ny * mu3[H];
        W[k] = acc / static_cast<double>(N);
        W3[k] = acc3 / static_cast<double>(N);
      }
      for (int k = H + 1; k < N; ++k) {
        W[k] = W[N - k];
        W3[k] = W3[N - k];
      }
      if (l != t) {
        T* Wt = &lw.W[(static_cast<std::size_t>(l) * ns + t) * N];
        T* W3t = &lw.W3[(static_cast<std::size_t>(l) * ns + t) * N];
        std::copy(W, W + N, Wt);
        std::copy(W3, W3 + N, W3t);
      }
      T scale = 2.0 * kPi * b / sp;
      lw.kink[static_cast<std::size_t>(t) * ns + l] = kinkfrac(t, l) * Fr[l] * scale;
      lw.kink[static_cast<std::size_t>(l) * ns + t] = kinkfrac(l, t) * Fr[t] * scale;
    }
  }
  return lw;
}

double log_remainder(double u, double st, double up, double sl, double b, double dalpha) {
  const double sh = std::sin(0.5 * dalpha);
  const double sg = sh * sh;
  const double p = (1.0 + b * st) * (1.0 + b * sl);
  const double e = st - sl;
  const double Mp = 4.0 * sg * p + b * b * e * e;
  const double d = u - up;
  const double Y = 4.0 * sg * ((u - st) + (up - sl) + b * (u * up - st * sl)) + b * (d * d - e * e);
  return std::log1p(b * Y / Mp);
}

namespace {
// 2 log(sinh(N asinh c) / c)
template <class T>
T sinh_ratio_log(int N, T c) {
  using std::asinh;
  using std::exp;
  using std::log;
  using std::log1p;
  using std::sinh;
  const double cv = value_of(c);
  const double wv = N * std::asinh(cv);
  if (wv < 1e-2) {
    T c2 = c * c;
    T w = N * (c * (1.0 + c2 * (-1.0 / 6.0 + c2 * (3.0 / 40.0 - c2 * (5.0 / 112.0)))));
    T w2 = w * w;
    return 2.0 * (std::log(static_cast<double>(N)) + log1p(c2 * (-1.0 / 6.0 + c2 * (3.0 / 40.0 - c2 * (5.0 / 112.0)))) +
                  log1p(w2 * (1.0 / 6.0 + w2 * (1.0 / 120.0 + w2 / 5040.0))));
  }
  T w = N * asinh(c);
  if (wv > 20.0) return 2.0 * (w + log1p(-exp(-2.0 * w)) - log(2.0 * c));
  return 2.0 * log(sinh(w) / c);
}
}  // namespace

template <class T>
T diagonal_correction(int N, T q, T p, T cA, T cM) {
  using std::asinh;
  using std::log;
  const double h = 2.0 * kPi / N;
  return h * log(q / p) + 4.0 * kPi * (asinh(cA) - asinh(cM)) - h * (sinh_ratio_log(N, cA) - sinh_ratio_log(N, cM));
}

double diagonal_correction_offset(int N, double phase, double cA, double cM) {
  const double h = 2.0 * kPi / N;
  const double sp = std::sin(0.5 * N * phase);
  auto S = [&](double c) {
    const double w = N * std::asinh(c);
    if (w > 20.0) return 2.0 * w;
    const double sw = std::sinh(w);
    return std::log(4.0 * (sw * sw + sp * sp));
  };
  return 4.0 * kPi * (std::asinh(cA) - std::asinh(cM)) - h * (S(cA) - S(cM));
}

template Dual diagonal_correction<Dual>(int, Dual, Dual, Dual, Dual);
template double diagonal_correction<double>(int, double, double, double, double);
template DualT<Dual> diagonal_correction<DualT<Dual>>(int, DualT<Dual>, DualT<Dual>, DualT<Dual>, DualT<Dual>);
template double log1p_over<double>(double, double);
template Dual log1p_over<Dual>(Dual, Dual);
template LineWeights<double> build_line_weights<double>(const Grid&, const std::vector<double>&,
                                                        const Eigen::MatrixXd&, double);
template LineWeights<Dual> build_line_weights<Dual>(const Grid&, const std::vector<double>&, const Eigen::MatrixXd&,
                                                    Dual);

SingularResult integrate_singular(const Field& f, const Field& rtilde, double a, int i, int t, const Profile& profile,
                                  bool check_resolution) {
  const Grid& g = *f.grid;
  if (a < 0.0) throw Error(ErrorKind::InvalidParameter, "integrate_singular needs a >= 0");
  const int N = g.n_alpha, ns = g.n_s, H = N / 2;
  const double b = a * a;
  std::vector<double> Fr(ns);
  for (int l = 0; l < ns; ++l) Fr[l] = profile.phi(g.s[l]);
  LineWeights<double> lw = build_line_weights(g, Fr, kink_fractions(g), b);

  const double u = g.s[t] + rtilde.v(i, t);
  const double us = std::abs(1.0 + g.D.row(t).dot(rtilde.v.row(i)));
  const double h = 2.0 * kPi / N;
  SingularResult res;
  double tail = 0.0, total = 0.0;
  std::vector<double> rem(N);
  for (int l = 0; l < ns; ++l) {
    const double* W = lw.w(t, l);
    const double up = g.s[l] + rtilde.v(i, l);
    const double q = (1.0 + b * u) * (1.0 + b * up), p = (1.0 + b * g.s[t]) * (1.0 + b * g.s[l]);
    const double cA = b * std::abs(u - up) / (2.0 * std::sqrt(q));
    const double cM = b * std::abs(g.s[t] - g.s[l]) / (2.0 * std::sqrt(p));
    double line = diagonal_correction(N, q, p, cA, cM) * f.v(i, l);
    for (int j = 0; j < N; ++j) {
      const int k = ((i - j) % N + N) % N;
      double r = 0.0;
      rem[j] = 0.0;
      if (k != 0) {
        const double th = g.alpha[i] - g.alpha[j];
        r = log_remainder(u, g.s[t], g.s[l] + rtilde.v(j, l), g.s[l], b, th);
        // the frozen near-diagonal part is integrated exactly; only the rest must be resolved
        const double sh = std::sin(0.5 * th), sg = sh * sh;
        rem[j] = (r - std::log(q * (sg + cA * cA) / (p * (sg + cM * cM)))) * f.v(j, l);
      }
      line += (W[k] + h * r) * f.v(j, l);
    }
    res.value += g.w[l] * Fr[l] * line + lw.kink[static_cast<std::size_t>(t) * ns + l] * us * f.v(i, l);
    if (!check_resolution) continue;
    double lt = 0.0, la = 0.0;
    for (int n = 0; n <= H; ++n) {
      double cr = 0.0, sr = 0.0, cf = 0.0, sf = 0.0;
      for (int j = 0; j < N; ++j) {
        const double th = 2.0 * kPi * ((static_cast<long>(n) * j) % N) / N;
        cr += rem[j] * std::cos(th);
        sr += rem[j] * std::sin(th);
        cf += f.v(j, l) * std::cos(th);
        sf += f.v(j, l) * std::sin(th);
      }
      const double er = cr * cr + sr * sr;
      if (n > N / 4) lt += er;
      la += er + cf * cf + sf * sf;
    }
    const double wt = g.w[l] * std::abs(Fr[l]);
    tail += wt * lt;
    total += wt * la;
  }
  res.truncation = total > 0.0 ? tail / total : 0.0;
  if (check_resolution && res.truncation > 1e-8)
    throw Error(ErrorKind::GridTooCoarse, "remainder spectral tail above 1e-8 of total");
  return res;
}

}  // namespace rotostate
