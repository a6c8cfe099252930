#include "rotostate/discretization.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "rotostate/error.hpp"

namespace rotostate {

namespace {

constexpr double kPi = std::numbers::pi;

// Real DFT per s column; rows n = 0..N/2.
void real_dft(const Eigen::MatrixXd& v, Eigen::MatrixXd& a, Eigen::MatrixXd& b) {
  const int N = static_cast<int>(v.rows());
  const int H = N / 2;
  a = Eigen::MatrixXd::Zero(H + 1, v.cols());
  b = Eigen::MatrixXd::Zero(H + 1, v.cols());
  std::vector<double> c(N), s(N);
  for (int k = 0; k < N; ++k) {
    c[k] = std::cos(2.0 * kPi * k / N);
    s[k] = std::sin(2.0 * kPi * k / N);
  }
  for (int n = 0; n <= H; ++n) {
    double scale = (n == 0 || 2 * n == N) ? 1.0 / N : 2.0 / N;
    for (int i = 0; i < N; ++i) {
      int k = static_cast<int>((static_cast<long>(n) * i) % N);
      a.row(n) += scale * c[k] * v.row(i);
      b.row(n) += scale * s[k] * v.row(i);
    }
  }
  if (N % 2 == 0) b.row(H).setZero();
}

double mixed_norm_sq(const Field& f, int alpha_order, bool extra_s3) {
  const Grid& g = *f.grid;
  Eigen::MatrixXd a, b;
  real_dft(f.v, a, b);
  const int H = static_cast<int>(a.rows()) - 1;
  Eigen::VectorXd mult(H + 1);
  for (int n = 0; n <= H; ++n) mult(n) = (n == 0) ? 2.0 * kPi : kPi;
  Eigen::Map<const Eigen::VectorXd> w(g.w.data(), g.n_s);

  auto term = [&](int p, int j) {
    Eigen::MatrixXd Dj = Eigen::MatrixXd::Identity(g.n_s, g.n_s);
    for (int q = 0; q < j; ++q) Dj = g.D * Dj;
    Eigen::MatrixXd aj = a * Dj.transpose();
    Eigen::MatrixXd bj = b * Dj.transpose();
    double sum = 0.0;
    for (int n = 0; n <= H; ++n) {
      double fac = mult(n) * std::pow(static_cast<double>(n), 2 * p);
      sum += fac * ((aj.row(n).array().square() + bj.row(n).array().square()).matrix().dot(w));
    }
    return sum;
  };

  double total = term(0, 0);
  if (extra_s3) total += term(0, 3);
  for (int j = 0; j <= 3; ++j) {
    int p = alpha_order - j;
    if (p < 0 || (p == 0 && extra_s3)) continue;
    total += term(p, j);
  }
  return total;
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double pn = (n == 1) ? z : p1;
      double pm = (n == 1) ? 1.0 : p0;
      dp = n * (z * pn - pm) / (z * z - 1.0);
      double dz = pn / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    x[n - 1 - i] = z;
    w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

int Grid::admissible_n_alpha(int requested, int m, int harmonics) {
  int n = std::max(requested, 4 * harmonics * m);
  int q = 2 * m;
  return ((n + q - 1) / q) * q;
}

GridPtr Grid::make(int m, int n_alpha, int n_s, int harmonics) {
  if (m < 1) throw Error(ErrorKind::InvalidParameter, "m must be >= 1");
  if (harmonics < 1) throw Error(ErrorKind::InvalidParameter, "harmonics must be >= 1");
  if (n_s < 4) throw Error(ErrorKind::InvalidParameter, "n_s must be >= 4");
  if (n_alpha < 4 * harmonics * m)
    throw Error(ErrorKind::GridTooCoarse, "n_alpha must be >= 4 * harmonics * m");
  if (n_alpha % (2 * m) != 0) throw Error(ErrorKind::InvalidParameter, "n_alpha must be a multiple of 2m");
  auto g = std::make_shared<Grid>();
  g->m = m;
  g->n_alpha = n_alpha;
  g->n_s = n_s;
  g->harmonics = harmonics;
  g->alpha.resize(n_alpha);
  for (int i = 0; i < n_alpha; ++i) g->alpha[i] = 2.0 * kPi * i / n_alpha;
  gauss_legendre(n_s, g->s, g->w);

  g->bary.resize(n_s);
  for (int j = 0; j < n_s; ++j)
    g->bary[j] = ((j % 2) ? -1.0 : 1.0) * std::sqrt((1.0 - g->s[j] * g->s[j]) * g->w[j]);
  g->D = Eigen::MatrixXd::Zero(n_s, n_s);
  for (int i = 0; i < n_s; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n_s; ++j) {
      if (i == j) continue;
      g->D(i, j) = (g->bary[j] / g->bary[i]) / (g->s[i] - g->s[j]);
      diag -= g->D(i, j);
    }
    g->D(i, i) = diag;
  }

  g->cosj.resize(harmonics, n_alpha);
  g->sinj.resize(harmonics, n_alpha);
  for (int j = 1; j <= harmonics; ++j)
    for (int i = 0; i < n_alpha; ++i) {
      long k = (static_cast<long>(j) * m * i) % n_alpha;
      g->cosj(j - 1, i) = std::cos(2.0 * kPi * k / n_alpha);
      g->sinj(j - 1, i) = std::sin(2.0 * kPi * k / n_alpha);
    }
  return g;
}

void Grid::lagrange(double x, Eigen::VectorXd& ell, Eigen::VectorXd* dell) const {
  ell = Eigen::VectorXd::Zero(n_s);
  for (int j = 0; j < n_s; ++j) {
    if (x == s[j]) {
      ell(j) = 1.0;
      if (dell) *dell = D.row(j).transpose();
      return;
    }
  }
  bool near_node = false;
  if (dell) {
    // barycentric derivative cancels next to a node
    for (int j = 0; j < n_s; ++j) {
      const double dx = x - s[j];
      if (std::abs(dx) < 1e-7) {
        *dell = (D.row(j) + dx * (D.row(j) * D)).transpose();
        near_node = true;
        break;
      }
    }
  }
  double denom = 0.0;
  Eigen::VectorXd t(n_s);
  for (int j = 0; j < n_s; ++j) {
    t(j) = bary[j] / (x - s[j]);
    denom += t(j);
  }
  ell = t / denom;
  if (dell && !near_node) {
    // derivative of the barycentric form
    Eigen::VectorXd dt(n_s);
    double ddenom = 0.0;
    for (int j = 0; j < n_s; ++j) {
      dt(j) = -bary[j] / ((x - s[j]) * (x - s[j]));
      ddenom += dt(j);
    }
    *dell = (dt * denom - t * ddenom) / (denom * denom);
  }
}

Eigen::VectorXd ModeStack::flat() const {
  Eigen::VectorXd x(c.size());
  for (int j = 0; j < c.rows(); ++j)
    for (int l = 0; l < c.cols(); ++l) x(j * c.cols() + l) = c(j, l);
  return x;
}

ModeStack ModeStack::from_flat(GridPtr g, Parity p, const Eigen::VectorXd& x) {
  ModeStack ms(std::move(g), p);
  for (int j = 0; j < ms.c.rows(); ++j)
    for (int l = 0; l < ms.c.cols(); ++l) ms.c(j, l) = x(j * ms.c.cols() + l);
  return ms;
}

ModeStack to_modes(const Field& f, double* truncation) {
  if (f.parity == Parity::None || !f.m_fold)
    throw Error(ErrorKind::InvalidParameter, "to_modes needs a parity- and fold-tagged field");
  const Grid& g = *f.grid;
  ModeStack ms(f.grid, f.parity);
  const Eigen::MatrixXd& basis = (f.parity == Parity::Even) ? g.cosj : g.sinj;
  ms.c = (2.0 / g.n_alpha) * basis * f.v;
  if (truncation) {
    const double total = f.v.norm();
    *truncation = (total > 0.0) ? (f.v - basis.transpose() * ms.c).norm() / total : 0.0;
  }
  return ms;
}

Field from_modes(const ModeStack& ms) {
  const Grid& g = *ms.grid;
  Field f(ms.grid, ms.parity, true);
  const Eigen::MatrixXd& basis = (ms.parity == Parity::Even) ? g.cosj : g.sinj;
  f.v = basis.transpose() * ms.c;
  return f;
}

ModeStack d_alpha(const ModeStack& ms) {
  const Grid& g = *ms.grid;
  ModeStack out(ms.grid, ms.parity == Parity::Even ? Parity::Odd : Parity::Even);
  double sign = (ms.parity == Parity::Even) ? -1.0 : 1.0;
  for (int j = 1; j <= g.harmonics; ++j) out.c.row(j - 1) = sign * j * g.m * ms.c.row(j - 1);
  return out;
}

Field d_alpha(const Field& f) {
  const int N = f.grid->n_alpha;
  Eigen::MatrixXd a, b;
  real_dft(f.v, a, b);
  Field out(f.grid, f.parity == Parity::Even ? Parity::Odd : (f.parity == Parity::Odd ? Parity::Even : Parity::None),
            f.m_fold);
  const int H = static_cast<int>(a.rows()) - 1;
  for (int i = 0; i < N; ++i) {
    for (int n = 1; n <= H; ++n) {
      if (2 * n == N) continue;  // Nyquist has no well-defined derivative
      double th = 2.0 * kPi * ((static_cast<long>(n) * i) % N) / N;
      out.v.row(i) += n * (-a.row(n) * std::sin(th) + b.row(n) * std::cos(th));
    }
  }
  return out;
}

void symmetrize(Field& f) {
  const int N = f.grid->n_alpha;
  if (f.m_fold) {
    const int m = f.grid->m;
    const int P = N / m;
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(N, f.v.cols());
    for (int i = 0; i < N; ++i)
      for (int q = 0; q < m; ++q) avg.row(i) += f.v.row((i + q * P) % N);
    f.v = avg / m;
  }
  if (f.parity != Parity::None) {
    double sign = (f.parity == Parity::Even) ? 1.0 : -1.0;
    Eigen::MatrixXd out(f.v.rows(), f.v.cols());
    for (int i = 0; i < N; ++i) out.row(i) = 0.5 * (f.v.row(i) + sign * f.v.row((N - i) % N));
    f.v = out;
  }
}

double l2_norm(const Field& f) {
  const Grid& g = *f.grid;
  double sum = 0.0;
  for (int l = 0; l < g.n_s; ++l) sum += g.w[l] * f.v.col(l).squaredNorm();
  return std::sqrt(sum * 2.0 * kPi / g.n_alpha);
}

double sobolev_norm_43(const Field& f) { return std::sqrt(mixed_norm_sq(f, 4, true)); }

double sobolev_norm_33(const Field& f) { return std::sqrt(mixed_norm_sq(f, 3, true)); }

void write_field_csv(const Field& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot write " + path);
  const Grid& g = *f.grid;
  out << std::setprecision(17);
  for (int i = 0; i < g.n_alpha; ++i) out << (i ? "," : "") << g.alpha[i];
  out << "\n";
  for (int l = 0; l < g.n_s; ++l) out << (l ? "," : "") << g.s[l];
  out << "\n";
  for (int i = 0; i < g.n_alpha; ++i) {
    for (int l = 0; l < g.n_s; ++l) out << (l ? "," : "") << f.v(i, l);
    out << "\n";
  }
}

}  // namespace rotostate
