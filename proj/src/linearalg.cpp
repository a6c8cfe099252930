#include "rotostate/linearalg.hpp"

#include <cmath>
#include <numbers>

#include "rotostate/error.hpp"

namespace rotostate {

namespace {

double weighted_mass(const Grid& g, const Profile& profile, const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (int l = 0; l < g.n_s; ++l) sum += g.w[l] * profile.phi(g.s[l]) * v(l);
  return sum;
}

double profile_mass(const Grid& g, const Profile& profile) {
  return weighted_mass(g, profile, Eigen::VectorXd::Ones(g.n_s));
}

}  // namespace

Eigen::VectorXd analytic_linear_mode(int k, const Eigen::VectorXd& gk, const Grid& grid, const Profile& profile,
                                     std::optional<double> lambda0) {
  if (k % grid.m != 0) throw Error(ErrorKind::InvalidParameter, "harmonic must be a multiple of m");
  const double lam = lambda0 ? *lambda0 : (grid.m - 1.0) / (2.0 * grid.m);
  Eigen::VectorXd q = (k * (0.5 - lam)) * gk;
  q.array() += 0.5 * weighted_mass(grid, profile, gk);
  return q;
}

DenseJacobian assemble_jacobian(const Functional& fn, const ModeStack& rtilde, const FunctionalParams& p,
                                AssemblyMethod method) {
  DenseJacobian dj;
  dj.a = p.a;
  dj.method = method;
  dj.J = method == AssemblyMethod::Analytic ? fn.jacobian(make_state(rtilde), p) : fn.jacobian_fd(rtilde, p);
  return dj;
}

Field kernel_vector(int m, GridPtr grid) {
  if (m != grid->m) throw Error(ErrorKind::InvalidParameter, "kernel_vector m differs from grid m");
  ModeStack ms(grid, Parity::Even);
  ms.c.row(0).setConstant(1.0 / std::sqrt(2.0 * std::numbers::pi));
  return from_modes(ms);
}

double solvability_defect(const ModeStack& q, const Profile& profile) {
  if (q.parity != Parity::Odd) throw Error(ErrorKind::InvalidParameter, "solvability_defect needs an odd field");
  return weighted_mass(*q.grid, profile, q.c.row(0).transpose());
}

double solvability_defect(const Field& q, const Profile& profile) { return solvability_defect(to_modes(q), profile); }

ModeStack solve_in_image(const ModeStack& q, const Profile& profile, double tol) {
  if (q.parity != Parity::Odd) throw Error(ErrorKind::InvalidParameter, "solve_in_image needs an odd field");
  const Grid& g = *q.grid;
  const int m = g.m;
  const double M = profile_mass(g, profile);
  double defect = solvability_defect(q, profile);
  if (std::abs(defect) > tol) throw Error(ErrorKind::NotInImage, "solvability defect above tolerance");
  ModeStack out(q.grid, Parity::Even);
  for (int j = 1; j <= g.harmonics; ++j) {
    const int k = j * m;
    Eigen::VectorXd qk = q.c.row(j - 1).transpose();
    const double A = 2.0 * m / k;
    const double den = k + m * M;
    double B = 0.0;
    if (j != 1) B = -2.0 * m * m * weighted_mass(g, profile, qk) / (k * den);
    Eigen::VectorXd gk = A * qk;
    gk.array() += B;
    Eigen::VectorXd back = analytic_linear_mode(k, gk, g, profile);
    if ((back - qk).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + qk.cwiseAbs().maxCoeff()) + tol)
      throw Error(ErrorKind::NotInImage, "preimage does not reproduce the right-hand side");
    out.c.row(j - 1) = gk.transpose();
  }
  return out;
}

Field solve_in_image(const Field& q, const Profile& profile, double tol) {
  return from_modes(solve_in_image(to_modes(q), profile, tol));
}

double transversality_coefficient(const Functional& fn, const FunctionalParams& p) {
  FunctionalParams p0 = p;
  p0.a = 0.0;
  const GridPtr& g = fn.grid();
  Field zero(g, Parity::Even, true);
  ModeStack dir(g, Parity::Even);
  dir.c.row(0).setOnes();
  Field q = fn.eval_d2G_dadr(zero, from_modes(dir), p0);
  return solvability_defect(q, fn.profile());
}

SpectrumReport analyze_spectrum(const Eigen::MatrixXd& J, const Grid& grid, double kernel_tol) {
  SpectrumReport rep;
  const int ns = grid.n_s, H = grid.harmonics;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  const Eigen::Index n = sv.size();
  rep.singular_values = sv.reverse();
  for (Eigen::Index i = 0; i < n; ++i)
    if (sv(i) <= kernel_tol) ++rep.kernel_dimension;
  rep.second_smallest = n > 1 ? rep.singular_values(1) : 0.0;

  Eigen::VectorXd kv = Eigen::VectorXd::Zero(J.cols());
  for (int l = 0; l < ns; ++l) kv(l) = 1.0;
  rep.kernel_residual = (J * kv).norm() / kv.norm();
  Eigen::VectorXd vmin = svd.matrixV().col(n - 1);
  rep.kernel_alignment = std::abs(vmin.dot(kv)) / kv.norm();

  double diag = 0.0, off = 0.0;
  for (int a = 0; a < H; ++a)
    for (int b = 0; b < H; ++b) {
      double f = J.block(a * ns, b * ns, ns, ns).squaredNorm();
      (a == b ? diag : off) += f;
    }
  rep.offdiag_ratio = diag > 0.0 ? std::sqrt(off / diag) : 0.0;
  for (int a = 0; a < H; ++a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> bs(J.block(a * ns, a * ns, ns, ns));
    rep.per_harmonic.push_back(bs.singularValues().reverse());
  }
  return rep;
}

}  // namespace rotostate
