#include "rotostate/functional.hpp"

#include <cmath>
#include <numbers>

#include "rotostate/error.hpp"

namespace rotostate {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInv4Pi = 1.0 / (4.0 * std::numbers::pi);

using std::log1p;

template <class T>
struct LinePair {
  T p;
  T e2;
  T b2e2;
};
template <class T>
T diag_term(int N, T u, T up, double st_, double sl, T b) {
  using std::sqrt;
  T q = (1.0 + b * u) * (1.0 + b * up);
  T p = (1.0 + b * st_) * (1.0 + b * sl);
  T d = u - up;
  if (value_of(d) < 0.0) d = -d;
  return diagonal_correction(N, q, p, b * d / (2.0 * sqrt(q)), b * std::abs(st_ - sl) / (2.0 * sqrt(p)));
}
}  // namespace

FunctionalParams FunctionalParams::make(int m, double dlambda_da, double a) {
  if (m < 2) throw Error(ErrorKind::InvalidParameter, "m must be >= 2");
  FunctionalParams p;
  p.m = m;
  p.lambda0 = (m - 1.0) / (2.0 * m);
  p.dlambda_da = dlambda_da;
  p.a = a;
  return p;
}

State make_state(const Field& rtilde) {
  const Grid& g = *rtilde.grid;
  State st;
  st.U = rtilde.v;
  for (int l = 0; l < g.n_s; ++l) st.U.col(l).array() += g.s[l];
  st.Ua = d_alpha(rtilde).v;
  st.Us = st.U * g.D.transpose();
  return st;
}

State make_state(const ModeStack& rtilde) {
  const Grid& g = *rtilde.grid;
  State st;
  st.U = from_modes(rtilde).v;
  for (int l = 0; l < g.n_s; ++l) st.U.col(l).array() += g.s[l];
  st.Ua = from_modes(d_alpha(rtilde)).v;
  st.Us = st.U * g.D.transpose();
  return st;
}

Functional::Functional(GridPtr grid, Profile profile) : grid_(std::move(grid)), profile_(std::move(profile)) {
  const Grid& g = *grid_;
  Fr_.resize(g.n_s);
  for (int l = 0; l < g.n_s; ++l) Fr_[l] = profile_.phi(g.s[l]);
  kinkfrac_ = kink_fractions(g);
  const int N = g.n_alpha;
  sig_.resize(N);
  cs_.resize(N);
  sn_.resize(N);
  for (int k = 0; k < N; ++k) {
    double th = 2.0 * kPi * k / N;
    double sh = std::sin(0.5 * th);
    sig_[k] = sh * sh;
    cs_[k] = std::cos(th);
    sn_[k] = std::sin(th);
  }
  cs_[0] = 1.0;
  sn_[0] = 0.0;
  half_ = g.half_period() - 1;
  if (half_ < 1) throw Error(ErrorKind::GridTooCoarse, "no interior targets in the fundamental domain");
}

template <>
const LineWeights<double>& Functional::weights<double>(double b) const {
  for (auto& e : cache_d_)
    if (e.first == b) return e.second;
  if (cache_d_.size() >= 4) cache_d_.erase(cache_d_.begin());
  cache_d_.emplace_back(b, build_line_weights(*grid_, Fr_, kinkfrac_, b));
  return cache_d_.back().second;
}

template <>
const LineWeights<Dual>& Functional::weights<Dual>(Dual b) const {
  for (auto& e : cache_dual_)
    if (e.first.first == b.v && e.first.second == b.d) return e.second;
  if (cache_dual_.size() >= 2) cache_dual_.erase(cache_dual_.begin());
  cache_dual_.emplace_back(std::make_pair(b.v, b.d), build_line_weights(*grid_, Fr_, kinkfrac_, b));
  return cache_dual_.back().second;
}

template <class T>
std::vector<T> Functional::values(const State& st, T b, T lambda) const {
  const Grid& g = *grid_;
  const int N = g.n_alpha, ns = g.n_s, half = half_;
  const LineWeights<T>& lw = weights(b);
  const double h = 2.0 * kPi / N;
  const bool b_zero = value_of(b) == 0.0;
  std::vector<LinePair<T>> lp(static_cast<std::size_t>(ns) * ns);
  for (int t = 0; t < ns; ++t)
    for (int l = 0; l < ns; ++l) {
      const double e = g.s[t] - g.s[l];
      T p = (1.0 + b * g.s[t]) * (1.0 + b * g.s[l]);
      lp[t * ns + l] = {p, T(e * e), b * b * (e * e)};
    }
  std::vector<T> out(static_cast<std::size_t>(ns) * half);

#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < ns * half; ++idx) {
    const int t = idx / half, i = idx % half + 1;
    const double st_ = g.s[t];
    const double u = st.U(i, t), ua = st.Ua(i, t), rt = u - st_;
    const double us = std::abs(st.Us(i, t));
    T LC1(0.0), LCu(0.0), LCa(0.0), LS1(0.0), LSu(0.0), LSa(0.0), L3S(0.0);
    for (int l = 0; l < ns; ++l) {
      const double sl = g.s[l];
      const double wF = g.w[l] * Fr_[l];
      const double om = wF * h;
      const LinePair<T>& q = lp[t * ns + l];
      const T* W = lw.w(t, l);
      const T* W3 = lw.w3(t, l);
      const double* Ucol = st.U.col(l).data();
      const double* Uacol = st.Ua.col(l).data();
      for (int j = 0; j < N; ++j) {
        int k = i - j;
        if (k < 0) k += N;
        const double up = Ucol[j], upa = Uacol[j];
        T Lw, L3w;
        if (k == 0) {
          Lw = wF * (W[0] + diag_term(N, T(u), T(up), st_, sl, b)) + lw.kink[t * ns + l] * us;
          L3w = T(0.0);
        } else {
          const double sg = sig_[k], d = u - up;
          T Mp = 4.0 * sg * q.p + q.b2e2;
          T Y = 4.0 * sg * ((rt + (up - sl)) + b * (u * up - st_ * sl)) + b * (d * d - q.e2);
          T z = Y / Mp;
          T R = b_zero ? T(0.0) : log1p(b * z);
          T R3 = b_zero ? z : R / b;
          Lw = wF * W[k] + om * R;
          L3w = wF * W3[k] + om * R3;
        }
        T Lc = Lw * cs_[k];
        T Ls = Lw * sn_[k];
        LC1 += Lc;
        LCu += Lc * up;
        LCa += Lc * upa;
        LS1 += Ls;
        LSu += Ls * up;
        LSa += Ls * upa;
        L3S += L3w * sn_[k];
      }
    }
    T opb = 1.0 + b * u;
    out[idx] = lambda * opb * ua +
               (opb * LCa - ua * (LC1 + b * LCu) + L3S + (u * LS1 + LSu) + b * (ua * LSa + u * LSu)) * kInv4Pi;
  }
  return out;
}

template <class T>
std::vector<T> Functional::directional(const State& st, const Eigen::MatrixXd& gv, const Eigen::MatrixXd& gav, T b,
                                       T lambda) const {
  const Grid& g = *grid_;
  const int N = g.n_alpha, ns = g.n_s, half = half_;
  const LineWeights<T>& lw = weights(b);
  const double h = 2.0 * kPi / N;
  const bool b_zero = value_of(b) == 0.0;
  std::vector<LinePair<T>> lp(static_cast<std::size_t>(ns) * ns);
  for (int t = 0; t < ns; ++t)
    for (int l = 0; l < ns; ++l) {
      const double e = g.s[t] - g.s[l];
      T p = (1.0 + b * g.s[t]) * (1.0 + b * g.s[l]);
      lp[t * ns + l] = {p, T(e * e), b * b * (e * e)};
    }
  const Eigen::MatrixXd gs = gv * g.D.transpose();
  std::vector<T> out(static_cast<std::size_t>(ns) * half);

#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < ns * half; ++idx) {
    const int t = idx / half, i = idx % half + 1;
    const double st_ = g.s[t];
    const double u = st.U(i, t), ua = st.Ua(i, t), rt = u - st_;
    const double gt = gv(i, t), gat = gav(i, t);
    const double us = std::abs(st.Us(i, t));
    const double dus = (st.Us(i, t) < 0.0 ? -1.0 : 1.0) * gs(i, t);
    T LC1(0.0), LCu(0.0), LCa(0.0), LS1(0.0), LSu(0.0), LSa(0.0);
    T dLC1(0.0), dLCu(0.0), dLCa(0.0), dLS1(0.0), dLSu(0.0), dLSa(0.0), dL3S(0.0);
    for (int l = 0; l < ns; ++l) {
      const double sl = g.s[l];
      const double wF = g.w[l] * Fr_[l];
      const double om = wF * h;
      const LinePair<T>& q = lp[t * ns + l];
      const T* W = lw.w(t, l);
      for (int j = 0; j < N; ++j) {
        int k = i - j;
        if (k < 0) k += N;
        const double up = st.U(j, l), upa = st.Ua(j, l);
        const double gp = gv(j, l), gap = gav(j, l);
        T Lw, dLw(0.0), dL3w(0.0);
        if (k == 0) {
          using D2 = DualT<T>;
          D2 c0 = diag_term(N, D2(T(u), T(gt)), D2(T(up), T(gp)), st_, sl, D2(b));
          Lw = wF * (W[0] + c0.v) + lw.kink[t * ns + l] * us;
          dLw = wF * c0.d + lw.kink[t * ns + l] * dus;
        } else {
          const double sg = sig_[k], d = u - up;
          T Mp = 4.0 * sg * q.p + q.b2e2;
          T Y = 4.0 * sg * ((rt + (up - sl)) + b * (u * up - st_ * sl)) + b * (d * d - q.e2);
          T R = b_zero ? T(0.0) : log1p(b * Y / Mp);
          Lw = wF * W[k] + om * R;
          T A = 4.0 * sg * (1.0 + b * u) * (1.0 + b * up) + b * b * (d * d);
          T P3 = 4.0 * sg + b * (4.0 * sg * up + 2.0 * d);
          T Q3 = 4.0 * sg + b * (4.0 * sg * u - 2.0 * d);
          T dA3 = (gt * P3 + gp * Q3) / A;  // d(log A)[g] / b
          dL3w = om * dA3;
          dLw = b * dL3w;
        }
        const double c = cs_[k], s = sn_[k];
        T Lc = Lw * c, Ls = Lw * s, dLc = dLw * c, dLs = dLw * s;
        LC1 += Lc;
        LCu += Lc * up;
        LCa += Lc * upa;
        LS1 += Ls;
        LSu += Ls * up;
        LSa += Ls * upa;
        dLC1 += dLc;
        dLCu += dLc * up + Lc * gp;
        dLCa += dLc * upa + Lc * gap;
        dLS1 += dLs;
        dLSu += dLs * up + Ls * gp;
        dLSa += dLs * upa + Ls * gap;
        dL3S += dL3w * s;
      }
    }
    T opb = 1.0 + b * u;
    out[idx] = lambda * (b * gt * ua + opb * gat) +
               (b * gt * LCa + opb * dLCa - gat * (LC1 + b * LCu) - ua * (dLC1 + b * dLCu) + dL3S +
                (gt * LS1 + u * dLS1 + dLSu) + b * (gat * LSa + ua * dLSa + gt * LSu + u * dLSu)) *
                   kInv4Pi;
  }
  return out;
}

template std::vector<double> Functional::values<double>(const State&, double, double) const;
template std::vector<Dual> Functional::values<Dual>(const State&, Dual, Dual) const;
template std::vector<double> Functional::directional<double>(const State&, const Eigen::MatrixXd&,
                                                             const Eigen::MatrixXd&, double, double) const;
template std::vector<Dual> Functional::directional<Dual>(const State&, const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                                                         Dual, Dual) const;

void Functional::node_velocity(const State& st, double a, Eigen::MatrixXd& vx, Eigen::MatrixXd& vy) const {
  const Grid& g = *grid_;
  const int N = g.n_alpha, ns = g.n_s, P = N / g.m, H = P / 2;
  const double b = a * a;
  const LineWeights<double>& lw = weights(b);
  const double h = 2.0 * kPi / N;
  // source tangent vectors x_alpha
  Eigen::MatrixXd tx(N, ns), ty(N, ns);
  for (int j = 0; j < N; ++j)
    for (int l = 0; l < ns; ++l) {
      const double ca = std::cos(g.alpha[j]), sa = std::sin(g.alpha[j]);
      const double ra = b * st.Ua(j, l), r = 1.0 + b * st.U(j, l);
      tx(j, l) = ra * ca - r * sa;
      ty(j, l) = ra * sa + r * ca;
    }
  Eigen::MatrixXd fx(H + 1, ns), fy(H + 1, ns);
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < (H + 1) * ns; ++idx) {
    const int t = idx / (H + 1), i = idx % (H + 1);
    const double st_ = g.s[t];
    const double u = st.U(i, t), rt = u - st_;
    const double us = std::abs(st.Us(i, t));
    double sx = 0.0, sy = 0.0;
    for (int l = 0; l < ns; ++l) {
      const double sl = g.s[l];
      const double wF = g.w[l] * Fr_[l];
      const double om = wF * h;
      const double e = st_ - sl;
      const double pp = (1.0 + b * st_) * (1.0 + b * sl);
      const double* W = lw.w(t, l);
      for (int j = 0; j < N; ++j) {
        int k = i - j;
        if (k < 0) k += N;
        double Lw;
        if (k == 0) {
          Lw = wF * (W[0] + diag_term(N, u, st.U(j, l), st_, sl, b)) + lw.kink[t * ns + l] * us;
        } else {
          const double up = st.U(j, l), sg = sig_[k], d = u - up;
          const double Mp = 4.0 * sg * pp + b * b * e * e;
          const double Y = 4.0 * sg * ((rt + (up - sl)) + b * (u * up - st_ * sl)) + b * (d * d - e * e);
          Lw = wF * W[k] + om * std::log1p(b * Y / Mp);
        }
        sx += Lw * tx(j, l);
        sy += Lw * ty(j, l);
      }
    }
    fx(i, t) = sx * kInv4Pi;
    fy(i, t) = sy * kInv4Pi;
  }
  vx.resize(N, ns);
  vy.resize(N, ns);
  for (int i = 0; i < N; ++i) {
    const int q = i / P, r = i % P;
    int src;
    double rot;
    Eigen::VectorXd ux(ns), uy(ns);
    if (r <= H) {
      src = r;
      rot = q * 2.0 * kPi / g.m;
      ux = fx.row(src).transpose();
      uy = fy.row(src).transpose();
    } else {
      // mirror image of a fundamental node: v(Sx) = (-v1, v2)
      src = P - r;
      rot = (q + 1) * 2.0 * kPi / g.m;
      ux = -fx.row(src).transpose();
      uy = fy.row(src).transpose();
    }
    const double c = std::cos(rot), s = std::sin(rot);
    vx.row(i) = (c * ux - s * uy).transpose();
    vy.row(i) = (s * ux + c * uy).transpose();
  }
}

Field Functional::expand(const std::vector<double>& vals) const {
  const Grid& g = *grid_;
  const int N = g.n_alpha, P = N / g.m, H = P / 2;
  Field f(grid_, Parity::Odd, true);
  for (int i = 0; i < N; ++i) {
    const int r = i % P;
    if (r == 0 || r == H) continue;
    const int src = r < H ? r : P - r;
    const double sign = r < H ? 1.0 : -1.0;
    for (int t = 0; t < g.n_s; ++t) f.v(i, t) = sign * vals[t * half_ + src - 1];
  }
  return f;
}

Eigen::VectorXd Functional::project(const std::vector<double>& vals, double* full_l2) const {
  const Grid& g = *grid_;
  const int J = g.harmonics, ns = g.n_s;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(J * ns);
  const double scale = 4.0 * g.m / g.n_alpha;
  for (int t = 0; t < ns; ++t)
    for (int i = 1; i <= half_; ++i) {
      const double v = vals[t * half_ + i - 1];
      for (int h = 0; h < J; ++h) q(h * ns + t) += scale * v * g.sinj(h, i);
    }
  if (full_l2) {
    double sum = 0.0;
    for (int t = 0; t < ns; ++t) {
      double line = 0.0;
      for (int i = 1; i <= half_; ++i) line += vals[t * half_ + i - 1] * vals[t * half_ + i - 1];
      sum += g.w[t] * 2.0 * g.m * line;
    }
    *full_l2 = std::sqrt(sum * 2.0 * kPi / g.n_alpha);
  }
  return q;
}

double Functional::modes_l2(const Eigen::VectorXd& q) const {
  const Grid& g = *grid_;
  double sum = 0.0;
  for (int h = 0; h < g.harmonics; ++h)
    for (int t = 0; t < g.n_s; ++t) sum += g.w[t] * q(h * g.n_s + t) * q(h * g.n_s + t);
  return std::sqrt(kPi * sum);
}

Eigen::VectorXd Functional::residual(const State& st, const FunctionalParams& p, double* full_l2) const {
  const double b = p.a * p.a;
  return project(values<double>(st, b, p.lambda()), full_l2);
}

Eigen::VectorXd Functional::d_dlambda(const State& st, const FunctionalParams& p) const {
  const Grid& g = *grid_;
  const double b = p.a * p.a;
  std::vector<double> v(static_cast<std::size_t>(g.n_s) * half_);
  for (int t = 0; t < g.n_s; ++t)
    for (int i = 1; i <= half_; ++i) v[t * half_ + i - 1] = (1.0 + b * st.U(i, t)) * st.Ua(i, t);
  return project(v);
}

Eigen::VectorXd Functional::d_da(const State& st, const FunctionalParams& p) const {
  Eigen::VectorXd out = p.lambda_slope() * d_dlambda(st, p);
  if (p.a != 0.0) {
    std::vector<Dual> v = values<Dual>(st, Dual(p.a * p.a, 1.0), Dual(p.lambda(), 0.0));
    std::vector<double> d(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) d[k] = 2.0 * p.a * v[k].d;
    out += project(d);
  }
  return out;
}

Field Functional::eval_G(const Field& rtilde, const FunctionalParams& p) const {
  return expand(values<double>(make_state(rtilde), p.a * p.a, p.lambda()));
}

Field Functional::eval_dG_dlambda(const Field& rtilde, const FunctionalParams& p) const {
  const Grid& g = *grid_;
  State st = make_state(rtilde);
  const double b = p.a * p.a;
  std::vector<double> v(static_cast<std::size_t>(g.n_s) * half_);
  for (int t = 0; t < g.n_s; ++t)
    for (int i = 1; i <= half_; ++i) v[t * half_ + i - 1] = (1.0 + b * st.U(i, t)) * st.Ua(i, t);
  return expand(v);
}

Field Functional::eval_dG_da(const Field& rtilde, const FunctionalParams& p) const {
  Field out = eval_dG_dlambda(rtilde, p);
  out.v *= p.lambda_slope();
  if (p.a != 0.0) {
    std::vector<Dual> v = values<Dual>(make_state(rtilde), Dual(p.a * p.a, 1.0), Dual(p.lambda(), 0.0));
    std::vector<double> d(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) d[k] = 2.0 * p.a * v[k].d;
    out.v += expand(d).v;
  }
  return out;
}

Field Functional::eval_dG_dr(const Field& rtilde, const Field& g, const FunctionalParams& p) const {
  State st = make_state(rtilde);
  Eigen::MatrixXd ga = d_alpha(g).v;
  return expand(directional<double>(st, g.v, ga, p.a * p.a, p.lambda()));
}

Field Functional::eval_d2G_dadr(const Field& rtilde, const Field& g, const FunctionalParams& p) const {
  const Grid& gr = *grid_;
  State st = make_state(rtilde);
  Eigen::MatrixXd ga = d_alpha(g).v;
  const double b = p.a * p.a;
  std::vector<double> v(static_cast<std::size_t>(gr.n_s) * half_);
  for (int t = 0; t < gr.n_s; ++t)
    for (int i = 1; i <= half_; ++i)
      v[t * half_ + i - 1] =
          p.lambda_slope() * (b * g.v(i, t) * st.Ua(i, t) + (1.0 + b * st.U(i, t)) * ga(i, t));
  if (p.a != 0.0) {
    std::vector<Dual> dv = directional<Dual>(st, g.v, ga, Dual(b, 1.0), Dual(p.lambda(), 0.0));
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += 2.0 * p.a * dv[k].d;
  }
  return expand(v);
}

Eigen::MatrixXd Functional::jacobian(const State& st, const FunctionalParams& p) const {
  const Grid& g = *grid_;
  const int N = g.n_alpha, ns = g.n_s, J = g.harmonics, half = half_, M = g.m;
  const double b = p.a * p.a, lambda = p.lambda();
  const LineWeights<double>& lw = weights(b);
  const double h = 2.0 * kPi / N;
  const bool b_zero = b == 0.0;
  // contiguous per-node harmonic tables
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMat Ct = g.cosj.transpose(), St = g.sinj.transpose();  // N x J
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns) * half, J * ns);

#pragma omp parallel
  {
    std::vector<double> accg(J), accga(J);
#pragma omp for schedule(static)
    for (int idx = 0; idx < ns * half; ++idx) {
      const int t = idx / half, i = idx % half + 1;
      const double st_ = g.s[t];
      const double u = st.U(i, t), ua = st.Ua(i, t), rt = u - st_;
      const double opb = 1.0 + b * u;
      const double us = std::abs(st.Us(i, t)), sgn_us = st.Us(i, t) < 0.0 ? -1.0 : 1.0;
      double LC1 = 0, LCu = 0, LCa = 0, LS1 = 0, LSu = 0, LSa = 0, TG = 0, KD = 0;
      for (int l = 0; l < ns; ++l) {
        const double sl = g.s[l];
        const double wF = g.w[l] * Fr_[l];
        const double om = wF * h;
        const double e = st_ - sl;
        const double pp = (1.0 + b * st_) * (1.0 + b * sl);
        const double e2 = e * e, b2e2 = b * b * e * e;
        const double* W = lw.w(t, l);
        std::fill(accg.begin(), accg.end(), 0.0);
        std::fill(accga.begin(), accga.end(), 0.0);
        for (int j = 0; j < N; ++j) {
          int k = i - j;
          if (k < 0) k += N;
          const double up = st.U(j, l), upa = st.Ua(j, l);
          const double c = cs_[k], s = sn_[k];
          double Lw, cg, cga;
          if (k == 0) {
            const Dual cu = diag_term(N, Dual(u, 1.0), Dual(up), st_, sl, Dual(b));
            const Dual cp = diag_term(N, Dual(u), Dual(up, 1.0), st_, sl, Dual(b));
            Lw = wF * (W[0] + cu.v) + lw.kink[t * ns + l] * us;
            const double K1 = (opb * upa - ua * (1.0 + b * up)) * kInv4Pi;
            cg = Lw * (-b * ua * c) * kInv4Pi + K1 * wF * cp.d;
            TG += K1 * wF * cu.d;
            KD += K1 * lw.kink[t * ns + l] * sgn_us;
          } else {
            const double sg = sig_[k], d = u - up;
            const double Mp = 4.0 * sg * pp + b2e2;
            const double Y = 4.0 * sg * ((rt + (up - sl)) + b * (u * up - st_ * sl)) + b * (d * d - e2);
            const double R = b_zero ? 0.0 : std::log1p(b * Y / Mp);
            Lw = wF * W[k] + om * R;
            const double A = 4.0 * sg * (1.0 + b * u) * (1.0 + b * up) + b * b * d * d;
            const double P3 = 4.0 * sg + b * (4.0 * sg * up + 2.0 * d);
            const double Q3 = 4.0 * sg + b * (4.0 * sg * u - 2.0 * d);
            const double P3w = om * P3 / A, Q3w = om * Q3 / A;
            const double K1 = (opb * c * upa - ua * c * (1.0 + b * up) + s * ((u + up) + b * (u * up + ua * upa))) * kInv4Pi;
            const double K2 = (-b * ua * c + opb * s) * kInv4Pi;
            cg = b * Q3w * K1 + Q3w * s * kInv4Pi + Lw * K2;
            TG += b * P3w * K1 + P3w * s * kInv4Pi;
          }
          cga = Lw * (opb * c + b * ua * s) * kInv4Pi;
          const double Lc = Lw * c, Ls = Lw * s;
          LC1 += Lc;
          LCu += Lc * up;
          LCa += Lc * upa;
          LS1 += Ls;
          LSu += Ls * up;
          LSa += Ls * upa;
          const double* cr = &Ct(j, 0);
          const double* sr = &St(j, 0);
          for (int hh = 0; hh < J; ++hh) {
            accg[hh] += cg * cr[hh];
            accga[hh] += cga * sr[hh];
          }
        }
        for (int hh = 0; hh < J; ++hh) O(idx, hh * ns + l) = accg[hh] - (hh + 1.0) * M * accga[hh];
      }
      const double TGt = TG + b * lambda * ua + (b * LCa + LS1 + b * LSu) * kInv4Pi;
      const double TGA = lambda * opb - (LC1 + b * LCu) * kInv4Pi + b * LSa * kInv4Pi;
      for (int hh = 0; hh < J; ++hh) {
        O(idx, hh * ns + t) += TGt * g.cosj(hh, i) - (hh + 1.0) * M * TGA * g.sinj(hh, i);
        for (int l = 0; l < ns; ++l) O(idx, hh * ns + l) += KD * g.D(t, l) * g.cosj(hh, i);
      }
    }
  }

  Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(J * ns, J * ns);
  const double scale = 4.0 * M / N;
  for (int t = 0; t < ns; ++t)
    for (int i = 1; i <= half; ++i) {
      const int idx = t * half + i - 1;
      for (int hh = 0; hh < J; ++hh) Jm.row(hh * ns + t) += (scale * g.sinj(hh, i)) * O.row(idx);
    }
  return Jm;
}

Eigen::MatrixXd Functional::jacobian_fd(const ModeStack& rtilde, const FunctionalParams& p, double step) const {
  const int n = static_cast<int>(rtilde.c.size());
  Eigen::MatrixXd Jm(n, n);
  Eigen::VectorXd x0 = rtilde.flat();
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(c) += step;
    xm(c) -= step;
    Eigen::VectorXd rp = residual(make_state(ModeStack::from_flat(grid_, Parity::Even, xp)), p);
    Eigen::VectorXd rm = residual(make_state(ModeStack::from_flat(grid_, Parity::Even, xm)), p);
    Jm.col(c) = (rp - rm) / (2.0 * step);
  }
  return Jm;
}

}  // namespace rotostate
