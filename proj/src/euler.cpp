#include "rotostate/euler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "rotostate/error.hpp"

namespace rotostate {

namespace {
constexpr double kPi = std::numbers::pi;

double wrap_angle(double x) {
  x = std::fmod(x, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x;
}

// Columns of r~ (and d/dalpha) at angle alpha, one entry per s node.
void columns_at(const EulerState& st, double alpha, Eigen::VectorXd& col, Eigen::VectorXd* col_a) {
  const Grid& g = *st.grid;
  const int J = g.harmonics;
  Eigen::VectorXd cj(J), sj(J);
  for (int j = 0; j < J; ++j) {
    const double k = (j + 1.0) * g.m;
    cj(j) = std::cos(k * alpha);
    sj(j) = -k * std::sin(k * alpha);
  }
  col = st.rtilde.c.transpose() * cj;
  if (col_a) *col_a = st.rtilde.c.transpose() * sj;
}

// Periodic trigonometric interpolation weights on the uniform alpha grid (even count).
void trig_weights(int N, double alpha, Eigen::VectorXd& d) {
  d.resize(N);
  const double h = 2.0 * kPi / N;
  const double pos = alpha / h;
  const double near = std::round(pos);
  if (std::abs(pos - near) < 1e-13) {
    d.setZero();
    d((static_cast<int>(near) % N + N) % N) = 1.0;
    return;
  }
  for (int j = 0; j < N; ++j) {
    const double x = alpha - j * h;
    d(j) = std::sin(0.5 * N * x) / (N * std::tan(0.5 * x));
  }
}

// us: d u / d s at the target
std::array<double, 2> biot_savart(const EulerState& st, double alpha_t, double s_t, double u_t, double us) {
  const Grid& g = *st.grid;
  const int N = g.n_alpha, ns = g.n_s;
  const double b = st.b;
  TargetWeights tw = target_weights(g, st.Fr, b, alpha_t, s_t);
  Eigen::VectorXd col, col_a, ell;
  columns_at(st, alpha_t, col, &col_a);
  const double h = 2.0 * kPi / N;
  const double rt = u_t - s_t;
  double sx = 0.0, sy = 0.0;
  for (int l = 0; l < ns; ++l) {
    const double sl = g.s[l];
    const double wF = g.w[l] * st.Fr[l];
    const double om = wF * h;
    const double e = s_t - sl;
    const double pp = (1.0 + b * s_t) * (1.0 + b * sl);
    const double* W = &tw.W[static_cast<std::size_t>(l) * N];
    for (int j = 0; j < N; ++j) {
      double Lw = wF * W[j];
      if (j != tw.alpha_index) {
        const double sh = std::sin(0.5 * (alpha_t - g.alpha[j]));
        const double sg = sh * sh;
        const double up = st.U(j, l), d = u_t - up;
        const double Mp = 4.0 * sg * pp + b * b * e * e;
        const double Y = 4.0 * sg * ((rt + (up - sl)) + b * (u_t * up - s_t * sl)) + b * (d * d - e * e);
        Lw += om * std::log1p(b * Y / Mp);
      }
      const double ca = std::cos(g.alpha[j]), sa = std::sin(g.alpha[j]);
      const double ra = b * st.Ua(j, l), r = 1.0 + b * st.U(j, l);
      sx += Lw * (ra * ca - r * sa);
      sy += Lw * (ra * sa + r * ca);
    }
    const double up = sl + col(l);
    const double q = (1.0 + b * u_t) * (1.0 + b * up);
    const double cA = b * std::abs(u_t - up) / (2.0 * std::sqrt(q)), cM = b * std::abs(e) / (2.0 * std::sqrt(pp));
    const double c0 = tw.alpha_index >= 0 ? diagonal_correction(N, q, pp, cA, cM)
                                          : diagonal_correction_offset(N, alpha_t, cA, cM);
    const double wt = wF * c0 + tw.kink[l] * std::abs(us);
    const double ca = std::cos(alpha_t), sa = std::sin(alpha_t);
    const double ra = b * col_a(l), r = 1.0 + b * up;
    sx += wt * (ra * ca - r * sa);
    sy += wt * (ra * sa + r * ca);
  }
  const double f = 1.0 / (4.0 * kPi);
  return {sx * f, sy * f};
}

std::array<double, 2> rotate(double th, std::array<double, 2> v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
}

int nearest_node(const Grid& g, double s) {
  int best = 0;
  for (int l = 1; l < g.n_s; ++l)
    if (std::abs(g.s[l] - s) < std::abs(g.s[best] - s)) best = l;
  return best;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot write " + path);
  out << text;
}
}  // namespace

double EulerState::rt(double alpha, double s, double* rt_alpha, double* rt_s) const {
  Eigen::VectorXd col, col_a, ell, dell;
  columns_at(*this, alpha, col, rt_alpha ? &col_a : nullptr);
  grid->lagrange(s, ell, rt_s ? &dell : nullptr);
  if (rt_alpha) *rt_alpha = col_a.dot(ell);
  if (rt_s) *rt_s = col.dot(dell);
  return col.dot(ell);
}

double EulerState::radius(double alpha, double rho) const {
  const double s = (rho - 1.0) / a;
  return 1.0 + b * (s + rt(alpha, s));
}

double EulerState::invert(double alpha, double R) const {
  const double target = (R - 1.0) / b;
  Eigen::VectorXd col, ell, dell;
  columns_at(*this, alpha, col, nullptr);
  auto u = [&](double s, double* du) {
    grid->lagrange(s, ell, du ? &dell : nullptr);
    if (du) *du = 1.0 + col.dot(dell);
    return s + col.dot(ell);
  };
  double lo = -1.0, hi = 1.0;
  if (target <= u(lo, nullptr)) return lo;
  if (target >= u(hi, nullptr)) return hi;
  double s = std::clamp(target, lo, hi);
  for (int it = 0; it < 60; ++it) {
    double du;
    const double f = u(s, &du) - target;
    if (f == 0.0) return s;
    if (f < 0.0) lo = s; else hi = s;
    double next = s - f / du;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) < 1e-15) return next;
    s = next;
  }
  return s;
}

double EulerState::vorticity_at(double x, double y) const {
  const double R = std::hypot(x, y);
  if (R == 0.0) return profile.F(-1.0);
  return profile.F(invert(std::atan2(y, x), R));
}

EulerState reconstruct(const Functional& fn, const BranchPoint& bp, const EulerParams& params) {
  if (!(bp.a > 0.0)) throw Error(ErrorKind::InvalidParameter, "reconstruction needs a > 0");
  if (params.raster_n < 2 || !(params.extent > 0.0))
    throw Error(ErrorKind::InvalidParameter, "raster needs n >= 2 and a positive extent");
  EulerState st;
  st.grid = fn.grid();
  const Grid& g = *st.grid;
  const int N = g.n_alpha, ns = g.n_s;
  st.profile = fn.profile();
  st.point = bp;
  st.m = g.m;
  st.a = bp.a;
  st.b = bp.a * bp.a;
  st.lambda = bp.lambda;
  st.rtilde = bp.rtilde();
  st.rtilde.grid = st.grid;
  State s0 = make_state(st.rtilde);
  st.U = s0.U;
  st.Ua = s0.Ua;
  st.Fr = fn.Fr();
  st.rho.resize(ns);
  for (int l = 0; l < ns; ++l) st.rho[l] = 1.0 + st.a * g.s[l];
  st.r = (1.0 + st.b * st.U.array()).matrix();

  // d r / d rho = a (1 + d r~/ds), on the nodes and on a uniform s sampling
  const Field rf = from_modes(st.rtilde);
  const Eigen::MatrixXd ds = rf.v * g.D.transpose();
  double worst = std::numeric_limits<double>::infinity();
  int wi = 0;
  double ws = 0.0;
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < ns; ++l)
      if (st.a * (1.0 + ds(i, l)) < worst) {
        worst = st.a * (1.0 + ds(i, l));
        wi = i;
        ws = g.s[l];
      }
  const int fine = 4 * ns;
  Eigen::VectorXd ell, dell;
  for (int q = 0; q <= fine; ++q) {
    const double s = -1.0 + 2.0 * q / fine;
    g.lagrange(s, ell, &dell);
    for (int i = 0; i < N; ++i) {
      const double v = st.a * (1.0 + rf.v.row(i).dot(dell));
      if (v < worst) {
        worst = v;
        wi = i;
        ws = s;
      }
    }
  }
  st.min_drho_r = worst;
  if (!(worst > 0.0)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "d r / d rho = %.3e <= 0 at alpha = %.6f, rho = %.6f", worst, g.alpha[wi],
                  1.0 + st.a * ws);
    throw Error(ErrorKind::InvalidState, buf);
  }

  fn.node_velocity(s0, st.a, st.vx, st.vy);
  st.rotation_residual = rotation_residual(st, st.lambda);

  const int n = params.raster_n;
  st.extent = params.extent;
  st.omega.resize(n, n);
  const double E = params.extent, step = 2.0 * E / (n - 1);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) st.omega(k, j) = st.vorticity_at(-E + j * step, -E + k * step);
  return st;
}

std::array<double, 2> velocity_at(const EulerState& st, double alpha, double rho) {
  const double s = (rho - 1.0) / st.a;
  double rs = 0.0;
  const double rt = st.rt(alpha, s, nullptr, &rs);
  return biot_savart(st, wrap_angle(alpha), s, s + rt, 1.0 + rs);
}

std::array<double, 2> velocity_at_point(const EulerState& st, double x, double y) {
  const double R = std::hypot(x, y);
  const double u = (R - 1.0) / st.b;
  if (!(1.0 + st.b * u > 1e-3)) throw Error(ErrorKind::SingularEvaluation, "target too close to the origin");
  const double alpha = wrap_angle(std::atan2(y, x));
  const double s = st.invert(alpha, R);
  // outside the layer the level coordinate is extended with r~ = 0
  if (s <= -1.0 || s >= 1.0) return biot_savart(st, alpha, u, u, 1.0);
  double rs = 0.0;
  st.rt(alpha, s, nullptr, &rs);
  return biot_savart(st, alpha, s, u, 1.0 + rs);
}

std::array<double, 2> interpolate_velocity(const EulerState& st, double x, double y) {
  const Grid& g = *st.grid;
  const double alpha = wrap_angle(std::atan2(y, x));
  const double s = st.invert(alpha, std::hypot(x, y));
  Eigen::VectorXd d, ell;
  trig_weights(g.n_alpha, alpha, d);
  g.lagrange(s, ell);
  return {d.dot(st.vx * ell), d.dot(st.vy * ell)};
}

double rotation_residual(const EulerState& st, double lambda) {
  const Grid& g = *st.grid;
  double worst = 0.0;
  for (int i = 0; i < g.n_alpha; ++i) {
    const double ca = std::cos(g.alpha[i]), sa = std::sin(g.alpha[i]);
    for (int l = 0; l < g.n_s; ++l) {
      const double r = 1.0 + st.b * st.U(i, l), ra = st.b * st.Ua(i, l);
      const double tx = ra * ca - r * sa, ty = ra * sa + r * ca;
      const double res = lambda * r * ra + ty * st.vx(i, l) - tx * st.vy(i, l);
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

AdvectReport advect_check(const EulerState& st, const AdvectOptions& opts) {
  const double lam = st.lambda;
  if (!(lam > 0.0)) throw Error(ErrorKind::InvalidParameter, "advection needs a positive angular velocity");
  AdvectReport rep;
  rep.T = opts.T > 0.0 ? opts.T : 0.1 * 2.0 * kPi / lam;
  const double dt_max = 0.01 / lam;
  const double dt_req = opts.dt > 0.0 ? opts.dt : dt_max;
  if (dt_req > dt_max * (1.0 + 1e-12))
    throw Error(ErrorKind::InvalidParameter, "time step exceeds 0.01 / lambda");
  rep.steps = static_cast<int>(std::ceil(rep.T / dt_req - 1e-9));
  rep.dt = rep.T / rep.steps;
  if (opts.markers_per_level < 1) throw Error(ErrorKind::InvalidParameter, "need at least one marker per level");

  const Grid& g = *st.grid;
  const int M = opts.markers_per_level;
  const double levels[3] = {g.s[nearest_node(g, -0.5)], g.s[nearest_node(g, 0.0)], g.s[nearest_node(g, 0.5)]};
  const int nm = 3 * M;
  rep.trajectories.resize(nm);
  for (int q = 0; q < nm; ++q) {
    Trajectory& tr = rep.trajectories[q];
    tr.marker = q;
    tr.level_s = levels[q / M];
    const double al = 2.0 * kPi * (q % M) / M;
    const double R = st.radius(al, 1.0 + st.a * tr.level_s);
    tr.t.reserve(rep.steps + 1);
    tr.t.push_back(0.0);
    tr.x.push_back(R * std::cos(al));
    tr.y.push_back(R * std::sin(al));
  }

  auto vel = [&](double t, double x, double y) {
    const double th = lam * t;
    const auto z0 = rotate(-th, {x, y});
    const auto v0 = opts.full_biot_savart ? velocity_at_point(st, z0[0], z0[1])
                                          : interpolate_velocity(st, z0[0], z0[1]);
    return rotate(th, v0);
  };

  const double dt = rep.dt;
#pragma omp parallel for schedule(static)
  for (int q = 0; q < nm; ++q) {
    Trajectory& tr = rep.trajectories[q];
    double x = tr.x[0], y = tr.y[0];
    for (int n = 0; n < rep.steps; ++n) {
      const double t = n * dt;
      const auto k1 = vel(t, x, y);
      const auto k2 = vel(t + 0.5 * dt, x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1]);
      const auto k3 = vel(t + 0.5 * dt, x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1]);
      const auto k4 = vel(t + dt, x + dt * k3[0], y + dt * k3[1]);
      x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
      y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
      tr.t.push_back((n + 1) * dt);
      tr.x.push_back(x);
      tr.y.push_back(y);
    }
  }

  // deviation from the rotated level curve and vorticity drift at t = T
  for (const Trajectory& tr : rep.trajectories) {
    const auto z0 = rotate(-lam * rep.T, {tr.x.back(), tr.y.back()});
    const double al = wrap_angle(std::atan2(z0[1], z0[0]));
    const double dev = std::abs(std::hypot(z0[0], z0[1]) - st.radius(al, 1.0 + st.a * tr.level_s));
    rep.max_deviation = std::max(rep.max_deviation, dev);
    const double w0 = st.profile.F(tr.level_s);
    rep.omega_drift = std::max(rep.omega_drift, std::abs(st.vorticity_at(z0[0], z0[1]) - w0));
  }

  // rotation angle per recorded time by Gauss-Newton on the level-curve mismatch
  const int nt = rep.steps + 1;
  std::vector<double> theta(nt, 0.0);
  bool identifiable = true;
  double th = 0.0;
  for (int n = 0; n < nt && identifiable; ++n) {
    th = n == 0 ? 0.0 : theta[n - 1] + lam * dt;
    for (int it = 0; it < 30; ++it) {
      double jtj = 0.0, jtf = 0.0;
      for (const Trajectory& tr : rep.trajectories) {
        const double phi = std::atan2(tr.y[n], tr.x[n]);
        double rta;
        const double s = tr.level_s;
        const double r = 1.0 + st.b * (s + st.rt(phi - th, s, &rta));
        const double f = std::hypot(tr.x[n], tr.y[n]) - r;
        const double jac = st.b * rta;
        jtj += jac * jac;
        jtf += jac * f;
      }
      if (!(jtj > 1e-24 * nm)) {
        identifiable = false;
        break;
      }
      const double delta = -jtf / jtj;
      th += delta;
      if (std::abs(delta) < 1e-14) break;
    }
    theta[n] = th;
  }
  if (!identifiable) {
    rep.lambda_fit = std::numeric_limits<double>::quiet_NaN();
    rep.lambda_rel_error = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  double st_ = 0.0, sth = 0.0, stt = 0.0, stth = 0.0;
  for (int n = 0; n < nt; ++n) {
    const double t = n * dt;
    st_ += t;
    sth += theta[n];
    stt += t * t;
    stth += t * theta[n];
  }
  rep.lambda_fit = (nt * stth - st_ * sth) / (nt * stt - st_ * st_);
  rep.lambda_rel_error = std::abs(rep.lambda_fit - lam) / lam;
  return rep;
}

void write_raster_csv(const EulerState& st, const std::string& path) {
  std::string text;
  char buf[32];
  for (int k = 0; k < st.omega.rows(); ++k) {
    for (int j = 0; j < st.omega.cols(); ++j) {
      std::snprintf(buf, sizeof buf, j ? ",%.17g" : "%.17g", st.omega(k, j));
      text += buf;
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_raster_binary(const EulerState& st, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot write " + path);
  for (int k = 0; k < st.omega.rows(); ++k)
    for (int j = 0; j < st.omega.cols(); ++j) {
      const double v = st.omega(k, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

void write_raster_header(const EulerState& st, const std::string& path, const std::string& data_file,
                         const std::string& format) {
  nlohmann::ordered_json j;
  j["data"] = data_file;
  j["format"] = format;
  j["rows"] = st.omega.rows();
  j["cols"] = st.omega.cols();
  j["row_axis"] = "y";
  j["x_min"] = -st.extent;
  j["x_max"] = st.extent;
  j["y_min"] = -st.extent;
  j["y_max"] = st.extent;
  j["m"] = st.m;
  j["a"] = st.a;
  j["omega_min"] = st.omega.minCoeff();
  j["omega_max"] = st.omega.maxCoeff();
  write_text(path, j.dump(2) + "\n");
}

void write_level_sets(const EulerState& st, const std::string& path, int points) {
  const int P = points > 0 ? points : 2 * st.grid->n_alpha;
  const double levels[3] = {-0.5, 0.0, 0.5};
  std::string text = "level_index,s,rho,alpha,x,y\n";
  char buf[160];
  for (int q = 0; q < 3; ++q) {
    const double rho = 1.0 + st.a * levels[q];
    for (int k = 0; k <= P; ++k) {
      const double al = 2.0 * kPi * k / P;
      const double R = st.radius(al, rho);
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", q, levels[q], rho, al, R * std::cos(al),
                    R * std::sin(al));
      text += buf;
    }
  }
  write_text(path, text);
}

namespace {
// int omega dx via the level-set parametrization
double circulation(const EulerState& st) {
  const Grid& g = *st.grid;
  const int N = g.n_alpha;
  double total = 0.0;
  Eigen::VectorXd ell, dell;
  for (int i = 0; i < N; ++i) {
    const double al = g.alpha[i];
    double rs;
    const double rin = 1.0 + st.b * (-1.0 + st.rt(al, -1.0));
    double line = 0.5 * rin * rin;
    for (int l = 0; l < g.n_s; ++l) {
      const double s = g.s[l];
      st.rt(al, s, nullptr, &rs);
      const double r = 1.0 + st.b * st.U(i, l);
      line += g.w[l] * st.profile.F(s) * r * st.b * (1.0 + rs);
    }
    total += line;
  }
  return total * 2.0 * kPi / N;
}
}  // namespace

void write_diagnostics(const EulerState& st, const std::string& path) {
  nlohmann::ordered_json j;
  j["m"] = st.m;
  j["a"] = st.a;
  j["xi"] = st.point.xi;
  j["lambda"] = st.lambda;
  j["min_drho_r"] = st.min_drho_r;
  j["omega_min"] = st.omega.size() ? st.omega.minCoeff() : 0.0;
  j["omega_max"] = st.omega.size() ? st.omega.maxCoeff() : 0.0;
  j["rotation_residual"] = st.rotation_residual;
  j["raster_n"] = st.omega.rows();
  j["extent"] = st.extent;
  const double cell = st.omega.rows() > 1 ? 2.0 * st.extent / (st.omega.rows() - 1) : 0.0;
  j["raster_mass"] = st.omega.sum() * cell * cell;
  j["circulation"] = circulation(st);
  write_text(path, j.dump(2) + "\n");
}

void write_trajectories(const AdvectReport& rep, const std::string& path) {
  std::string text = "marker,level_s,t,x,y\n";
  char buf[160];
  for (const Trajectory& tr : rep.trajectories)
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", tr.marker, tr.level_s, tr.t[n], tr.x[n], tr.y[n]);
      text += buf;
    }
  write_text(path, text);
}

}  // namespace rotostate
