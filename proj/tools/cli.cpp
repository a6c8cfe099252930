#include "cli.hpp"

#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rotostate/continuation.hpp"
#include "rotostate/error.hpp"
#include "rotostate/euler.hpp"
#include "rotostate/kernel.hpp"
#include "rotostate/linearalg.hpp"
#include "rotostate/quadrature.hpp"

namespace rotostate::cli {

namespace fs = std::filesystem;

void Config::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorKind::InvalidParameter, why); };
  if (m < 2) bad("m must be >= 2");
  if (n_alpha < 4 || n_s < 2 || harmonics < 1) bad("grid sizes too small");
  if (!(tol > 0.0) || !(step_tol > 0.0) || !(xi_max > 0.0)) bad("tolerances must be positive");
  if (max_iter < 1) bad("max_iter must be >= 1");
  if (mode != "amplitude" && mode != "fixed-width") bad("mode must be amplitude or fixed-width");
  if (mode == "fixed-width" && !(a > 0.0)) bad("fixed-width mode needs a > 0");
  if (xi_step == 0.0 || n_steps < 0) bad("xi_step must be nonzero and n_steps >= 0");
  if (raster_n < 2 || !(extent > 0.0)) bad("raster needs raster_n >= 2 and extent > 0");
  if (raster_format != "csv" && raster_format != "binary") bad("raster_format must be csv or binary");
  if (advect_T < 0.0 || advect_dt < 0.0 || markers < 1) bad("advection settings out of range");
  if (samples < 1 || !(bounds_a > 0.0) || bounds_amplitude < 0.0) bad("check settings out of range");
  if (threads < 1) bad("threads must be >= 1");
  if (spdlog::level::from_str(log_level) == spdlog::level::off && log_level != "off") bad("unknown log level");
}

std::string Config::describe() const {
  std::ostringstream os;
  os << "m=" << m << " profile=" << profile << " dlambda_da=" << dlambda_da << " n_alpha=" << n_alpha
     << " n_s=" << n_s << " harmonics=" << harmonics << " tol=" << tol << " step_tol=" << step_tol
     << " max_iter=" << max_iter << " xi_max=" << xi_max << " mode=" << mode << " a=" << a << " xi_step=" << xi_step
     << " n_steps=" << n_steps << " raster_n=" << raster_n << " extent=" << extent
     << " raster_format=" << raster_format << " point=" << point << " advect_T=" << advect_T
     << " advect_dt=" << advect_dt << " markers=" << markers << " full_biot_savart=" << full_biot_savart
     << " samples=" << samples << " seed=" << seed << " bounds_a=" << bounds_a
     << " bounds_amplitude=" << bounds_amplitude << " out=" << out << " threads=" << threads
     << " log_level=" << log_level;
  return os.str();
}

void load_config(const std::string& path, Config& c) {
  namespace pt = boost::property_tree;
  pt::ptree t;
  try {
    pt::read_ini(path, t);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidParameter, e.what());
  }
  static const char* known[] = {"problem.m", "problem.profile", "problem.dlambda_da", "grid.n_alpha", "grid.n_s",
                                "grid.harmonics", "newton.tol", "newton.step_tol", "newton.max_iter",
                                "newton.xi_max", "branch.mode", "branch.a", "branch.xi_step", "branch.n_steps",
                                "euler.raster_n", "euler.extent", "euler.raster_format", "euler.point",
                                "euler.advect_T", "euler.advect_dt", "euler.markers", "euler.full_biot_savart",
                                "checks.samples", "checks.seed", "checks.bounds_a", "checks.bounds_amplitude",
                                "run.out", "run.threads", "run.log_level"};
  for (const auto& sec : t)
    for (const auto& kv : sec.second) {
      const std::string key = sec.first + "." + kv.first;
      if (std::find(std::begin(known), std::end(known), key) == std::end(known))
        throw Error(ErrorKind::InvalidParameter, path + ": unknown key " + key);
    }
  try {
    c.m = t.get("problem.m", c.m);
    c.profile = t.get("problem.profile", c.profile);
    c.dlambda_da = t.get("problem.dlambda_da", c.dlambda_da);
    c.n_alpha = t.get("grid.n_alpha", c.n_alpha);
    c.n_s = t.get("grid.n_s", c.n_s);
    c.harmonics = t.get("grid.harmonics", c.harmonics);
    c.tol = t.get("newton.tol", c.tol);
    c.step_tol = t.get("newton.step_tol", c.step_tol);
    c.max_iter = t.get("newton.max_iter", c.max_iter);
    c.xi_max = t.get("newton.xi_max", c.xi_max);
    c.mode = t.get("branch.mode", c.mode);
    c.a = t.get("branch.a", c.a);
    c.xi_step = t.get("branch.xi_step", c.xi_step);
    c.n_steps = t.get("branch.n_steps", c.n_steps);
    c.raster_n = t.get("euler.raster_n", c.raster_n);
    c.extent = t.get("euler.extent", c.extent);
    c.raster_format = t.get("euler.raster_format", c.raster_format);
    c.point = t.get("euler.point", c.point);
    c.advect_T = t.get("euler.advect_T", c.advect_T);
    c.advect_dt = t.get("euler.advect_dt", c.advect_dt);
    c.markers = t.get("euler.markers", c.markers);
    c.full_biot_savart = t.get("euler.full_biot_savart", c.full_biot_savart);
    c.samples = t.get("checks.samples", c.samples);
    c.seed = t.get("checks.seed", c.seed);
    c.bounds_a = t.get("checks.bounds_a", c.bounds_a);
    c.bounds_amplitude = t.get("checks.bounds_amplitude", c.bounds_amplitude);
    c.out = t.get("run.out", c.out);
    c.threads = t.get("run.threads", c.threads);
    c.log_level = t.get("run.log_level", c.log_level);
  } catch (const pt::ptree_bad_data& e) {
    throw Error(ErrorKind::InvalidParameter, path + ": " + e.what());
  }
}

namespace {

struct Flags {
  std::string config;
  std::optional<int> m, n_alpha, n_s, harmonics, n_steps, threads, point, raster_n, markers;
  std::optional<double> dlambda_da, xi_step, a, xi_max, T, dt;
  std::optional<std::string> profile, mode, out, raster_format, log_level;
  std::optional<long> samples;
  std::optional<std::uint64_t> seed;
  bool full_biot_savart = false;
  std::string resume, input;
};

template <class T, class U>
void override_with(const std::optional<T>& f, U& dst) {
  if (f) dst = *f;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("rotostate");
  if (!logger) logger = spdlog::stderr_color_mt("rotostate");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

GridPtr make_grid(const Config& c) {
  const int N = Grid::admissible_n_alpha(c.n_alpha, c.m, c.harmonics);
  if (N != c.n_alpha) spdlog::info("n_alpha {} raised to admissible {}", c.n_alpha, N);
  return Grid::make(c.m, N, c.n_s, c.harmonics);
}

NewtonOptions newton_options(const Config& c) {
  NewtonOptions o;
  o.tol = c.tol;
  o.step_tol = c.step_tol;
  o.max_iter = c.max_iter;
  o.xi_max = c.xi_max;
  return o;
}

std::string out_path(const Config& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

int cmd_verify_integrals(const Config&) {
  const ExactIntegral ids[] = {ExactIntegral::LogCos, ExactIntegral::LogCosCos, ExactIntegral::LogSinSin, ExactIntegral::CosCos,
                            ExactIntegral::SinSin};
  std::printf("%-12s %3s %24s %24s %10s\n", "id", "m", "closed", "quadrature", "error");
  double worst = 0.0;
  for (ExactIntegral id : ids)
    for (int m = 1; m <= 8; ++m) {
      const double c = exact_integral(id, m), q = exact_integral_quadrature(id, m);
      const double e = std::abs(c - q);
      worst = std::max(worst, e);
      std::printf("%-12s %3d %24.16e %24.16e %10.3e\n", to_string(id), m, c, q, e);
    }
  const bool ok = worst < 1e-10;
  spdlog::info("verify-integrals: worst error {:.3e} ({})", worst, ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_check_bounds(const Config& c) {
  using nlohmann::ordered_json;
  bool ok = true;
  GridPtr g = make_grid(c);
  Field rt(g, Parity::Even, true);
  for (int i = 0; i < g->n_alpha; ++i)
    for (int l = 0; l < g->n_s; ++l) {
      const double s = g->s[l];
      rt.v(i, l) = c.bounds_amplitude * (1.0 - s * s) * std::cos(c.m * g->alpha[i]);
    }
  BoundsReport br = check_kernel_bounds(c.samples, c.bounds_a, rt, c.seed);
  ok = ok && br.ok && br.fitted_c >= 0.25;
  ordered_json j;
  j["check"] = "bounds";
  j["samples"] = br.samples;
  j["a"] = c.bounds_a;
  j["worst_margin"] = br.worst_margin;
  j["fitted_c"] = br.fitted_c;
  j["fitted_C2"] = br.fitted_C2;
  j["fitted_C3"] = br.fitted_C3;
  j["fitted_C4"] = br.fitted_C4;
  j["ok"] = br.ok;
  if (!br.violation.empty()) j["violation"] = br.violation;
  std::cout << j.dump() << "\n";

  const int cases[][3] = {{0, 1, 1}, {1, 0, 1}, {2, 0, 1}, {1, 2, 2}, {3, 0, 2}, {4, 0, 2}};
  const std::vector<double> bs = {1e-2, 1e-3, 1e-4};
  for (const auto& cs : cases) {
    ScalingReport sr = check_kernel_scaling(cs[0], cs[1], cs[2], bs);
    ok = ok && sr.ok;
    ordered_json k;
    k["check"] = "scaling";
    k["m"] = sr.m;
    k["k"] = sr.k;
    k["l"] = sr.l;
    k["regime"] = sr.regime;
    k["samples"] = sr.b.size();
    if (sr.regime == "power") {
      k["predicted_exponent"] = sr.predicted_exponent;
      k["fitted_exponent"] = sr.fitted_exponent;
      k["worst_margin"] = 0.2 * std::abs(sr.predicted_exponent) - std::abs(sr.fitted_exponent - sr.predicted_exponent);
    } else {
      k["flatness"] = sr.flatness;
      k["worst_margin"] = 1.2 - sr.flatness;
    }
    k["ok"] = sr.ok;
    std::cout << k.dump() << "\n";
  }

  double worst = 0.0;
  for (double b : {1e-4, 1e-2, 0.1, 1.0, 10.0}) worst = std::max(worst, std::abs(check_arcsinh_identity(b)));
  ordered_json l;
  l["check"] = "arcsinh";
  l["samples"] = 5;
  l["max_error"] = worst;
  l["worst_margin"] = 1e-8 - worst;
  l["ok"] = worst <= 1e-8;
  ok = ok && worst <= 1e-8;
  std::cout << l.dump() << "\n";
  return ok ? 0 : 1;
}

int cmd_spectrum(const Config& c) {
  GridPtr g = make_grid(c);
  Functional fn(g, Profile::from_name(c.profile));
  const FunctionalParams p = FunctionalParams::make(c.m, c.dlambda_da, 0.0);
  ModeStack zero(g, Parity::Even);
  DenseJacobian dj = assemble_jacobian(fn, zero, p);
  SpectrumReport sr = analyze_spectrum(dj.J, *g);
  const double tc = transversality_coefficient(fn, p);
  std::printf("m = %d, lambda0 = %.16g, grid %d x %d, J = %d\n", c.m, p.lambda0, g->n_alpha, g->n_s, g->harmonics);
  std::printf("%8s %24s %24s\n", "harmonic", "smallest sv", "largest sv");
  for (std::size_t j = 0; j < sr.per_harmonic.size(); ++j)
    std::printf("%8zu %24.16e %24.16e\n", (j + 1) * c.m, sr.per_harmonic[j](0),
                sr.per_harmonic[j](sr.per_harmonic[j].size() - 1));
  std::printf("smallest singular value   %.6e\n", sr.singular_values(0));
  std::printf("second smallest           %.6e\n", sr.second_smallest);
  std::printf("kernel dimension          %d\n", sr.kernel_dimension);
  std::printf("kernel residual           %.6e\n", sr.kernel_residual);
  std::printf("kernel alignment cos(m a) %.12f\n", sr.kernel_alignment);
  std::printf("off-diagonal ratio        %.3e\n", sr.offdiag_ratio);
  std::printf("transversality            %.12f (m dlambda/da = %.12f)\n", tc, c.m * c.dlambda_da);
  const bool ok = sr.kernel_dimension == 1 && sr.kernel_residual <= 1e-8 && sr.second_smallest >= 0.01;
  return ok ? 0 : 1;
}

int cmd_branch(const Config& c, const Flags& f) {
  GridPtr g = make_grid(c);
  Functional fn(g, Profile::from_name(c.profile));
  const FunctionalParams p = FunctionalParams::make(c.m, c.dlambda_da, 0.0);
  const BranchMode mode = branch_mode_from_string(c.mode);
  Continuation cont(fn, p, mode, mode == BranchMode::FixedWidth ? c.a : 0.0, newton_options(c));
  std::optional<BranchFile> resume;
  if (!f.resume.empty()) {
    resume = load_branch(f.resume, g);
    spdlog::info("resuming from {} with {} points", f.resume, resume->points.size());
  }
  BranchFile bf = cont.continue_branch(c.xi_step, c.n_steps, resume ? &*resume : nullptr, [](const BranchPoint& bp) {
    spdlog::info("xi={:.6g} a={:.6g} lambda={:.12g} iters={} |G|={:.3e} min_ds_r={:.6f}", bp.xi, bp.a, bp.lambda,
                 bp.newton_iters, bp.residual_L2, bp.min_ds_r);
  });
  const std::string path = out_path(c, "branch.jsonl");
  save_branch(bf, path);
  spdlog::info("wrote {} ({} points)", path, bf.points.size());
  bool ok = true;
  for (const BranchPoint& bp : bf.points) ok = ok && bp.residual_L2 <= c.tol;
  return ok ? 0 : 1;
}

struct Loaded {
  BranchFile file;
  std::unique_ptr<Functional> fn;
  BranchPoint point;
};

Loaded load_point(const Config& c, const Flags& f) {
  const std::string path = f.input.empty() ? (fs::path(c.out) / "branch.jsonl").string() : f.input;
  Loaded L;
  L.file = load_branch(path);
  if (L.file.points.empty()) throw Error(ErrorKind::CorruptFile, path + " has no points");
  const BranchHeader& h = L.file.header;
  GridPtr g = L.file.points.front().w.grid;
  L.fn = std::make_unique<Functional>(g, Profile::from_name(h.profile));
  const int n = static_cast<int>(L.file.points.size());
  const int idx = c.point < 0 ? n + c.point : c.point;
  if (idx < 0 || idx >= n) throw Error(ErrorKind::InvalidParameter, "point index out of range");
  L.point = L.file.points[idx];
  spdlog::info("{}: point {} of {}, xi={} a={} lambda={}", path, idx, n, L.point.xi, L.point.a, L.point.lambda);
  return L;
}

int cmd_residual(const Config& c, const Flags& f) {
  Loaded L = load_point(c, f);
  const BranchHeader& h = L.file.header;
  FunctionalParams p = FunctionalParams::make(h.m, h.dlambda_da, L.point.a);
  p.lambda_fixed = L.point.lambda;
  const Field G = L.fn->eval_G(from_modes(L.point.rtilde()), p);
  const double l2 = l2_norm(G), h33 = sobolev_norm_33(G);
  std::printf("xi                %.12g\n", L.point.xi);
  std::printf("a                 %.12g\n", L.point.a);
  std::printf("lambda            %.16g\n", L.point.lambda);
  std::printf("G L2              %.6e\n", l2);
  std::printf("G H33             %.6e\n", h33);
  return l2 <= h.newton_tol ? 0 : 1;
}

EulerState build_state(const Config& c, const Loaded& L) {
  EulerParams ep;
  ep.raster_n = c.raster_n;
  ep.extent = c.extent;
  return reconstruct(*L.fn, L.point, ep);
}

int cmd_reconstruct(const Config& c, const Flags& f) {
  Loaded L = load_point(c, f);
  EulerState st = build_state(c, L);
  if (c.raster_format == "csv") {
    write_raster_csv(st, out_path(c, "raster.csv"));
    write_raster_header(st, out_path(c, "raster.json"), "raster.csv", "csv");
  } else {
    write_raster_binary(st, out_path(c, "raster.bin"));
    write_raster_header(st, out_path(c, "raster.json"), "raster.bin", "f64le");
  }
  write_level_sets(st, out_path(c, "levelsets.csv"));
  write_diagnostics(st, out_path(c, "diagnostics.json"));
  spdlog::info("min d r/d rho {:.6e}, rotation residual {:.3e}, omega in [{:.3g}, {:.3g}]", st.min_drho_r,
               st.rotation_residual, st.omega.minCoeff(), st.omega.maxCoeff());
  return st.rotation_residual <= 1e-6 ? 0 : 1;
}

int cmd_advect(const Config& c, const Flags& f) {
  Loaded L = load_point(c, f);
  Config cc = c;
  cc.raster_n = std::min(c.raster_n, 64);
  EulerState st = build_state(cc, L);
  AdvectOptions o;
  o.T = c.advect_T;
  o.dt = c.advect_dt;
  o.markers_per_level = c.markers;
  o.full_biot_savart = c.full_biot_savart;
  AdvectReport rep = advect_check(st, o);
  write_trajectories(rep, out_path(c, "trajectories.csv"));
  std::printf("T                 %.12g\n", rep.T);
  std::printf("dt                %.12g\n", rep.dt);
  std::printf("steps             %d\n", rep.steps);
  std::printf("max deviation     %.6e\n", rep.max_deviation);
  std::printf("lambda            %.16g\n", st.lambda);
  std::printf("lambda fit        %.16g\n", rep.lambda_fit);
  std::printf("lambda rel error  %.6e\n", rep.lambda_rel_error);
  std::printf("omega drift       %.6e\n", rep.omega_drift);
  const double radius = 1.0 + st.a;
  bool ok = rep.max_deviation <= 1e-4 * radius;
  if (std::isfinite(rep.lambda_fit)) ok = ok && rep.lambda_rel_error <= 0.01;
  return ok ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Rotating smooth vortex states: bifurcation checks, continuation and reconstruction"};
  app.fallthrough();
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "sectioned key=value configuration file");
  app.add_option("--m", f.m, "symmetry order");
  app.add_option("--profile", f.profile, "poly4 or path to an (s, phi) table");
  app.add_option("--dlambda-da", f.dlambda_da, "slope of lambda(a)");
  app.add_option("--n-alpha", f.n_alpha, "alpha nodes (raised to admissible)");
  app.add_option("--n-s", f.n_s, "Gauss-Legendre s nodes");
  app.add_option("--harmonics", f.harmonics, "retained harmonics J");
  app.add_option("--xi-max", f.xi_max, "continuation bound on |xi|");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--threads", f.threads, "worker threads");
  app.add_option("--seed", f.seed, "seed for sampling checks");
  app.add_option("--log-level", f.log_level, "trace, debug, info, warn, error, off");

  app.add_subcommand("verify-integrals", "closed-form integral identities against quadrature");
  auto* cb = app.add_subcommand("check-bounds", "kernel bounds and scaling checks, JSON lines");
  cb->add_option("--samples", f.samples, "random samples for the lower/upper bounds");
  app.add_subcommand("spectrum", "singular values of the linearization at the trivial state");
  auto* br = app.add_subcommand("branch", "continue the m-fold branch and write branch.jsonl");
  br->add_option("--xi-step", f.xi_step, "continuation step in xi");
  br->add_option("--n-steps", f.n_steps, "number of accepted steps");
  br->add_option("--resume", f.resume, "branch file to continue from");
  br->add_option("--mode", f.mode, "amplitude or fixed-width");
  br->add_option("--a", f.a, "width held fixed in fixed-width mode");
  auto* rc = app.add_subcommand("reconstruct", "raster, level sets and diagnostics of a branch point");
  auto* rs = app.add_subcommand("residual", "norms of G at a branch point");
  auto* ad = app.add_subcommand("advect", "advect markers and fit the rotation rate");
  for (auto* sc : {rc, rs, ad}) {
    sc->add_option("--branch", f.input, "branch file (default <out>/branch.jsonl)");
    sc->add_option("--point", f.point, "point index, negative counts from the end");
  }
  rc->add_option("--raster-n", f.raster_n, "raster side length");
  rc->add_option("--raster-format", f.raster_format, "csv or binary");
  ad->add_option("--T", f.T, "final time (0: a tenth of a period)");
  ad->add_option("--dt", f.dt, "time step (0: 0.01 / lambda)");
  ad->add_option("--markers", f.markers, "markers per level set");
  ad->add_flag("--full-biot-savart", f.full_biot_savart, "evaluate the velocity integral at every stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Config c;
  try {
    if (!f.config.empty()) {
      if (!fs::exists(f.config)) {
        std::cerr << "config file not found: " << f.config << "\n\n" << app.help();
        return 2;
      }
      load_config(f.config, c);
    }
    override_with(f.m, c.m);
    override_with(f.profile, c.profile);
    override_with(f.dlambda_da, c.dlambda_da);
    override_with(f.n_alpha, c.n_alpha);
    override_with(f.n_s, c.n_s);
    override_with(f.harmonics, c.harmonics);
    override_with(f.xi_max, c.xi_max);
    override_with(f.out, c.out);
    override_with(f.threads, c.threads);
    override_with(f.seed, c.seed);
    override_with(f.log_level, c.log_level);
    override_with(f.samples, c.samples);
    override_with(f.xi_step, c.xi_step);
    override_with(f.n_steps, c.n_steps);
    override_with(f.mode, c.mode);
    override_with(f.a, c.a);
    override_with(f.point, c.point);
    override_with(f.raster_n, c.raster_n);
    override_with(f.raster_format, c.raster_format);
    override_with(f.T, c.advect_T);
    override_with(f.dt, c.advect_dt);
    override_with(f.markers, c.markers);
    if (f.full_biot_savart) c.full_biot_savart = true;
    if (const char* env = std::getenv("ROTOSTATE_THREADS")) c.threads = std::atoi(env);
    c.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  setup_logging(c.log_level);
  omp_set_num_threads(c.threads);
  spdlog::info("config: {}", c.describe());

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (sub == "verify-integrals") return cmd_verify_integrals(c);
    if (sub == "check-bounds") return cmd_check_bounds(c);
    if (sub == "spectrum") return cmd_spectrum(c);
    if (sub == "branch") return cmd_branch(c, f);
    if (sub == "reconstruct") return cmd_reconstruct(c, f);
    if (sub == "residual") return cmd_residual(c, f);
    if (sub == "advect") return cmd_advect(c, f);
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::InvalidParameter ? 2 : 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

}  // namespace rotostate::cli
