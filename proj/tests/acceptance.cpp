#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "rotostate/error.hpp"
#include "rotostate/euler.hpp"
#include "rotostate/kernel.hpp"
#include "rotostate/linearalg.hpp"

using namespace rotostate;
namespace fs = std::filesystem;

namespace {

// default resolution of the CLI
constexpr int kNAlpha = 256, kNs = 48, kJ = 16;

GridPtr default_grid(int m) { return Grid::make(m, Grid::admissible_n_alpha(kNAlpha, m, kJ), kNs, kJ); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome exact_integrals() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (ExactIntegral id : {ExactIntegral::LogCos, ExactIntegral::LogCosCos, ExactIntegral::LogSinSin,
                           ExactIntegral::CosCos, ExactIntegral::SinSin})
    for (int m = 1; m <= 8; ++m) worst = std::max(worst, std::abs(exact_integral(id, m) - exact_integral_quadrature(id, m)));
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && t < 5.0, "40 cases, worst error " + fmt("%.2e", worst) + " (tol 1e-10), " + fmt("%.2f", t) + " s (< 5 s)"};
}

Outcome kernel_spectrum() {
  bool ok = true;
  std::string d;
  for (int m : {2, 3, 4, 5}) {
    const auto t0 = std::chrono::steady_clock::now();
    auto g = default_grid(m);
    Functional fn(g, Profile::poly4());
    auto p = FunctionalParams::make(m, 1.0, 0.0);
    const bool lam_ok = std::abs(p.lambda() - (m - 1.0) / (2.0 * m)) < 1e-15;
    ModeStack zero(g, Parity::Even);
    SpectrumReport rep = analyze_spectrum(assemble_jacobian(fn, zero, p).J, *g);
    auto shifted = p;
    shifted.lambda_fixed = p.lambda0 + 1e-3;
    SpectrumReport rs = analyze_spectrum(assemble_jacobian(fn, zero, shifted).J, *g);
    const double t = seconds_since(t0);
    const bool mok = lam_ok && rep.kernel_dimension == 1 && rep.kernel_residual <= 1e-8 &&
                     rep.kernel_alignment >= 1.0 - 1e-8 && rep.second_smallest >= 0.01 && rs.kernel_dimension == 0 &&
                     t < 60.0;
    ok = ok && mok;
    d += "m=" + std::to_string(m) + ": dim " + std::to_string(rep.kernel_dimension) + " res " +
         fmt("%.1e", rep.kernel_residual) + " second " + fmt("%.3g", rep.second_smallest) + " shifted dim " +
         std::to_string(rs.kernel_dimension) + " " + fmt("%.1f", t) + " s; ";
  }
  return {ok, d + "tol: sv 1e-8, second 0.01, 60 s per m"};
}

Outcome mode_formula() {
  bool ok = true;
  std::string d;
  // fd needs one residual per column, so it runs on a coarser grid
  struct Case {
    int m;
    AssemblyMethod method;
    GridPtr g;
  };
  const std::vector<Case> cases = {{2, AssemblyMethod::Analytic, default_grid(2)},
                                   {3, AssemblyMethod::Analytic, default_grid(3)},
                                   {2, AssemblyMethod::FiniteDifference, Grid::make(2, 64, 16, 6)},
                                   {3, AssemblyMethod::FiniteDifference, Grid::make(3, 96, 16, 6)}};
  for (const Case& cs : cases) {
    const int m = cs.m;
    const GridPtr& g = cs.g;
    Profile pr = Profile::poly4();
    Functional fn(g, pr);
    auto p = FunctionalParams::make(m, 1.0, 0.0);
    ModeStack zero(g, Parity::Even);
    const int ns = g->n_s;
    // closed form, block diagonal in the harmonics
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(g->harmonics * ns, g->harmonics * ns);
    for (int j = 0; j < g->harmonics; ++j)
      for (int l = 0; l < ns; ++l) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(ns);
        e(l) = 1.0;
        E.block(j * ns, j * ns + l, ns, 1) = analytic_linear_mode((j + 1) * m, e, *g, pr);
      }
    DenseJacobian dj = assemble_jacobian(fn, zero, p, cs.method);
    const double worst = (dj.J - E).cwiseAbs().maxCoeff();
    ok = ok && worst <= 1e-6;
    d += "m=" + std::to_string(m) + (cs.method == AssemblyMethod::Analytic ? " analytic " : " fd ") + "N=" +
         std::to_string(g->n_alpha) + " " + fmt("%.2e", worst) + "; ";
  }
  return {ok, d + "tol 1e-6 entrywise"};
}

Outcome image_codimension() {
  const int m = 3;
  auto g = default_grid(m);
  Profile pr = Profile::poly4();
  Functional fn(g, pr);
  auto p = FunctionalParams::make(m, 1.0, 0.0);
  Field zero(g, Parity::Even, true);
  std::mt19937 rng(2024);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    ModeStack d(g, Parity::Even);
    for (int j = 0; j < g->harmonics; ++j)
      for (int l = 0; l < g->n_s; ++l) d.c(j, l) = nd(rng) / (j + 1.0);
    worst = std::max(worst, std::abs(solvability_defect(fn.eval_dG_dr(zero, from_modes(d), p), pr)));
  }
  Field q(g, Parity::Odd, true);
  for (int i = 0; i < g->n_alpha; ++i)
    for (int l = 0; l < g->n_s; ++l) q.v(i, l) = pr.phi(g->s[l]) * std::sin(m * g->alpha[i]);
  const double off = std::abs(solvability_defect(q, pr)), qn = l2_norm(q);
  return {worst <= 1e-9 && off >= 0.1 * qn, "max defect on 100 images " + fmt("%.2e", worst) + " (tol 1e-9); non-image " +
                                                fmt("%.4f", off) + " >= 0.1*|q| = " + fmt("%.4f", 0.1 * qn)};
}

Outcome transversality() {
  bool ok = true;
  std::string d;
  for (int m : {2, 3})
    for (double dl : {0.5, 1.0}) {
      auto g = default_grid(m);
      Functional fn(g, Profile::poly4());
      const double tc = transversality_coefficient(fn, FunctionalParams::make(m, dl, 0.0));
      const double err = std::abs(std::abs(tc) - m * dl);
      ok = ok && err <= 1e-6;
      d += "m=" + std::to_string(m) + " dl=" + fmt("%.1f", dl) + " err " + fmt("%.1e", err) + "; ";
    }
  return {ok, d + "tol 1e-6"};
}

struct BranchChecks {
  bool reached = false, residuals = false, quadratic = false, psi = false, positive = false;
  double worst_res = 0.0, intercept = 0.0, min_drho_r = 0.0;
  std::string recon;
};

BranchChecks check_branch(const Functional& fn, const BranchFile& f, double xi_target) {
  BranchChecks c;
  const auto& pts = f.points;
  c.reached = !pts.empty() && std::abs(pts.back().xi - xi_target) < 1e-12;
  c.residuals = true;
  c.quadratic = true;
  std::vector<double> xs, ys;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const BranchPoint& p = pts[k];
    c.worst_res = std::max(c.worst_res, p.residual_L2);
    c.residuals = c.residuals && p.residual_L2 <= 1e-10;
    const auto& h = p.residual_history;
    for (std::size_t n = 2; n < h.size(); ++n)
      if (h[n - 1] > 1e-13 && h[n] > 0.1 * h[n - 1]) c.quadratic = false;
    xs.push_back(p.xi);
    ys.push_back(p.w.c.norm() / std::abs(p.xi));
  }
  // linear fit of |psi|/xi against xi, extrapolated to xi = 0
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, ymax = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
    ymax = std::max(ymax, ys[k]);
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  c.intercept = (sy - slope * sx) / n;
  c.psi = xs.size() >= 2 && std::abs(c.intercept) <= 0.05 * ymax + 1e-12;
  try {
    EulerState st = reconstruct(fn, pts.back(), {64, 2.0, 0});
    c.min_drho_r = st.min_drho_r;
    c.positive = st.min_drho_r > 0.0;
    c.recon = "min d_rho r " + fmt("%.4g", st.min_drho_r);
  } catch (const Error& e) {
    c.recon = std::string("no reconstruction (") + e.what() + ")";
  }
  return c;
}

std::string describe(const BranchChecks& c, const BranchFile& f, double seconds) {
  return std::string("xi reached ") + (c.reached ? "yes" : "no") + ", max |G| " + fmt("%.1e", c.worst_res) +
         (c.residuals ? "" : " (above 1e-10)") + ", quadratic " + (c.quadratic ? "yes" : "no") + ", |psi|/xi intercept " +
         fmt("%.1e", c.intercept) + ", a(end) " + fmt("%.3g", f.points.back().a) + ", " + c.recon + ", " +
         fmt("%.1f", seconds) + " s";
}

BranchFile fixed_width_branch(const Functional& fn) {
  Continuation c(fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  return c.continue_branch(0.002, 10);
}

Outcome branch_existence(const Functional& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Continuation c(fn, FunctionalParams::make(3, 1.0));
  BranchFile f = c.continue_branch(0.002, 10);
  BranchChecks k = check_branch(fn, f, 0.02);
  const double t = seconds_since(t0);
  const bool ok = k.reached && k.residuals && k.quadratic && k.psi && k.positive && t < 600.0;
  return {ok, "amplitude branch m=3: " + describe(k, f, t)};
}

Outcome rotation_certificate(const Functional& fn, const BranchFile& fw) {
  EulerState st = reconstruct(fn, fw.points.back(), {128, 2.0, 0});
  const double res = rotation_residual(st, st.lambda);
  AdvectReport rep = advect_check(st);
  const bool ok = res <= 1e-6 && std::isfinite(rep.lambda_fit) && rep.lambda_rel_error <= 0.01;
  return {ok, "fixed-width a=0.2 xi=" + fmt("%.3g", fw.points.back().xi) + ": rotation residual " + fmt("%.2e", res) +
                  " (tol 1e-6), lambda fit rel error " + fmt("%.2e", rep.lambda_rel_error) + " over T=" +
                  fmt("%.4g", rep.T) + " (tol 1e-2)"};
}

Outcome kernel_spot_checks() {
  auto g = default_grid(3);
  Field rt(g, Parity::Even, true);
  for (int i = 0; i < g->n_alpha; ++i)
    for (int l = 0; l < g->n_s; ++l) rt.v(i, l) = 0.05 * (1.0 - g->s[l] * g->s[l]) * std::cos(3.0 * g->alpha[i]);
  BoundsReport br = check_kernel_bounds(10000, 0.1, rt, 12345);
  bool ok = br.ok && br.fitted_c >= 0.25;
  std::string d = "bounds: 10^4 samples c " + fmt("%.3f", br.fitted_c) + " (>= 0.25)" + (br.ok ? "" : " " + br.violation);
  const int cases[][3] = {{0, 1, 1}, {1, 0, 1}, {2, 0, 1}, {1, 2, 2}, {3, 0, 2}, {4, 0, 2}};
  bool sc = true;
  for (const auto& cs : cases) sc = sc && check_kernel_scaling(cs[0], cs[1], cs[2], {1e-2, 1e-3, 1e-4}).ok;
  ok = ok && sc;
  d += std::string("; scaling 6 cases (power/log/const, 20%) ") + (sc ? "ok" : "failed");
  double worst = 0.0;
  for (double b : {1e-4, 1e-2, 0.1, 1.0, 10.0}) worst = std::max(worst, std::abs(check_arcsinh_identity(b)));
  ok = ok && worst <= 1e-8;
  return {ok, d + "; arcsinh identity " + fmt("%.1e", worst) + " (tol 1e-8)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "rotostate_acceptance";
  std::vector<std::string> files;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = base / run;
    fs::remove_all(dir);
    std::vector<std::string> args = {"rotostate", "--log-level", "off", "--out", dir.string(), "branch"};
    std::vector<char*> argv;
    for (auto& s : args) argv.push_back(s.data());
    if (cli::run(static_cast<int>(argv.size()), argv.data()) != 0) return {false, "branch run failed"};
    files.push_back(slurp(dir / "branch.jsonl"));
  }
  fs::remove_all(base);
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same, "two default branch runs, " + std::to_string(files[0].size()) + " bytes, " +
                    (same ? "identical" : "differ")};
}

}  // namespace

int main() {
  auto g3 = default_grid(3);
  Functional fn3(g3, Profile::poly4());
  BranchFile fw;

  struct Item {
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Item> items = {
      {"exact trigonometric-log integrals", exact_integrals},
      {"simple kernel at the trivial state", kernel_spectrum},
      {"linearization mode formula", mode_formula},
      {"range of codimension one", image_codimension},
      {"transversality", transversality},
      {"branch existence", [&] { return branch_existence(fn3); }},
      {"rotation certificate",
       [&] {
         fw = fixed_width_branch(fn3);
         return rotation_certificate(fn3, fw);
       }},
      {"kernel bounds, scaling and arcsinh identity", kernel_spot_checks},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    Outcome o;
    try {
      o = items[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, items[k].name, o.detail.c_str());
    std::fflush(stdout);
    if (k == 5) {
      // same checks on the fixed-width branch, for reference
      const auto t0 = std::chrono::steady_clock::now();
      BranchFile f = fixed_width_branch(fn3);
      BranchChecks c = check_branch(fn3, f, 0.02);
      std::printf("INFO [6] fixed-width branch a=0.2: %s\n", describe(c, f, seconds_since(t0)).c_str());
    }
  }
  std::printf("%d of %zu criteria failed\n", failed, items.size());
  return failed == 0 ? 0 : 1;
}
