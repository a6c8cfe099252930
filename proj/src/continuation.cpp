#include "rotostate/continuation.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "rotostate/error.hpp"
#include "rotostate/linearalg.hpp"

namespace rotostate {

using nlohmann::json;

const char* const kCodeVersion = "1.0.0";

const char* to_string(BranchMode mode) { return mode == BranchMode::Amplitude ? "amplitude" : "fixed-width"; }

BranchMode branch_mode_from_string(const std::string& s) {
  if (s == "amplitude") return BranchMode::Amplitude;
  if (s == "fixed-width") return BranchMode::FixedWidth;
  throw Error(ErrorKind::InvalidParameter, "unknown branch mode " + s);
}

ModeStack BranchPoint::rtilde() const {
  ModeStack r = w;
  r.c.row(0).array() += xi;
  return r;
}

Continuation::Continuation(const Functional& fn, FunctionalParams params, BranchMode mode, double a_fixed,
                           NewtonOptions opts)
    : fn_(fn), base_(params), mode_(mode), a_fixed_(a_fixed), opts_(opts) {
  if (mode_ == BranchMode::FixedWidth && !(a_fixed_ > 0.0))
    throw Error(ErrorKind::InvalidParameter, "fixed-width mode needs a > 0");
  if (!(opts_.tol > 0.0) || !(opts_.step_tol > 0.0))
    throw Error(ErrorKind::InvalidParameter, "tolerances must be positive");
}

BranchHeader Continuation::header() const {
  const Grid& g = *fn_.grid();
  BranchHeader h;
  h.m = g.m;
  h.n_alpha = g.n_alpha;
  h.n_s = g.n_s;
  h.harmonics = g.harmonics;
  h.profile = fn_.profile().name();
  h.dlambda_da = base_.dlambda_da;
  h.newton_tol = opts_.tol;
  h.step_tol = opts_.step_tol;
  h.mode = mode_;
  h.a_fixed = mode_ == BranchMode::FixedWidth ? a_fixed_ : 0.0;
  h.version = kCodeVersion;
  return h;
}

ModeStack Continuation::g0() const {
  ModeStack ms(fn_.grid(), Parity::Even);
  ms.c.row(0).setOnes();
  return ms;
}

double Continuation::ell(const ModeStack& c) const {
  const Grid& g = *fn_.grid();
  double s = 0.0;
  for (int l = 0; l < g.n_s; ++l) s += g.w[l] * fn_.Fr()[l] * c.c(0, l);
  return s;
}

FunctionalParams Continuation::params_at(double mu) const {
  FunctionalParams p = base_;
  if (mode_ == BranchMode::Amplitude) {
    p.a = mu;
    p.lambda_fixed.reset();
  } else {
    p.a = a_fixed_;
    p.lambda_fixed = mu;
  }
  return p;
}

std::pair<double, ModeStack> Continuation::bifurcation_lambda(double a) const {
  const GridPtr& g = fn_.grid();
  const int ns = g->n_s, m = g->m;
  FunctionalParams p = base_;
  p.a = a;
  p.lambda_fixed = 0.0;
  ModeStack zero(g, Parity::Even);
  Eigen::MatrixXd J = fn_.jacobian(make_state(zero), p);
  Eigen::MatrixXd L0 = J.topLeftCorner(ns, ns);
  // J_1(lambda) = L0 - lambda m diag(1 + b s)
  Eigen::MatrixXd Mx = L0;
  for (int t = 0; t < ns; ++t) Mx.row(t) /= m * (1.0 + a * a * g->s[t]);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Mx);
  const double target = base_.lambda0;
  int best = -1;
  double dist = 1e300;
  for (int k = 0; k < ns; ++k) {
    auto ev = es.eigenvalues()(k);
    if (std::abs(ev.imag()) > 1e-10) continue;
    if (std::abs(ev.real() - target) < dist) {
      dist = std::abs(ev.real() - target);
      best = k;
    }
  }
  if (best < 0) throw Error(ErrorKind::NotABifurcationPoint, "no real eigenvalue in harmonic m");
  double lam = es.eigenvalues()(best).real();
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  ModeStack dir(g, Parity::Even);
  dir.c.row(0) = v.transpose();
  double l = ell(dir);
  if (std::abs(l) < 1e-14) throw Error(ErrorKind::NotABifurcationPoint, "kernel orthogonal to the profile weight");
  dir.c /= -l;
  return {lam, dir};
}

BranchPoint Continuation::trivial_point() const {
  BranchPoint bp;
  bp.xi = 0.0;
  bp.w = ModeStack(fn_.grid(), Parity::Even);
  if (mode_ == BranchMode::Amplitude) {
    bp.a = 0.0;
    bp.lambda = base_.lambda0;
  } else {
    bp.a = a_fixed_;
    bp.lambda = bifurcation_lambda(a_fixed_).first;
  }
  double full = 0.0;
  FunctionalParams p = params_at(mode_ == BranchMode::Amplitude ? 0.0 : bp.lambda);
  bp.residual_L2 = fn_.modes_l2(fn_.residual(make_state(bp.w), p, &full));
  bp.residual_full_L2 = full;
  bp.residual_history = {bp.residual_L2};
  return bp;
}

double Continuation::residual_of(const BranchPoint& bp) const {
  FunctionalParams p = params_at(mode_ == BranchMode::Amplitude ? bp.a : bp.lambda);
  return fn_.modes_l2(fn_.residual(make_state(bp.rtilde()), p));
}

BranchPoint Continuation::newton_at_amplitude(double xi, const ModeStack& guess, double mu_guess) const {
  if (std::abs(xi) > opts_.xi_max) throw Error(ErrorKind::InvalidParameter, "|xi| exceeds xi_max");
  const GridPtr& g = fn_.grid();
  const int n = g->harmonics * g->n_s;
  Eigen::VectorXd ellv = Eigen::VectorXd::Zero(n);
  for (int l = 0; l < g->n_s; ++l) ellv(l) = g->w[l] * fn_.Fr()[l];

  Eigen::VectorXd x(n + 1);
  x.head(n) = guess.flat();
  x(n) = mu_guess;

  auto evaluate = [&](const Eigen::VectorXd& xv, double& band) {
    ModeStack r = ModeStack::from_flat(g, Parity::Even, xv.head(n));
    Eigen::VectorXd F(n + 1);
    F.head(n) = fn_.residual(make_state(r), params_at(xv(n)));
    F(n) = ellv.dot(xv.head(n)) + xi;
    band = fn_.modes_l2(F.head(n));
    return F;
  };
  auto merit = [&](const Eigen::VectorXd& F, double band) { return std::hypot(band, F(static_cast<int>(F.size()) - 1)); };

  BranchPoint bp;
  bp.xi = xi;
  double band = 0.0;
  Eigen::VectorXd F = evaluate(x, band);
  double last_step = 0.0;
  int iter = 0;
  bp.residual_history.push_back(band);
  while (true) {
    const bool converged = merit(F, band) <= opts_.tol && last_step <= opts_.step_tol;
    if (converged) break;
    if (iter >= opts_.max_iter) throw Error(ErrorKind::NonConvergence, "Newton reached the iteration limit");
    ModeStack r = ModeStack::from_flat(g, Parity::Even, x.head(n));
    FunctionalParams p = params_at(x(n));
    State st = make_state(r);
    Eigen::MatrixXd K(n + 1, n + 1);
    K.topLeftCorner(n, n) = fn_.jacobian(st, p);
    K.topRightCorner(n, 1) = mode_ == BranchMode::Amplitude ? fn_.d_da(st, p) : fn_.d_dlambda(st, p);
    K.bottomLeftCorner(1, n) = ellv.transpose();
    K(n, n) = 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    const double rc = lu.rcond();
    if (!(rc > 1.0 / opts_.cond_limit))
      throw Error(ErrorKind::NonConvergence, "bordered Jacobian is near-singular");
    Eigen::VectorXd dx = -lu.solve(F);
    const double m0 = merit(F, band);
    double tstep = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opts_.max_backtracks; ++bt) {
      Eigen::VectorXd xt = x + tstep * dx;
      double bt_band = 0.0;
      Eigen::VectorXd Ft = evaluate(xt, bt_band);
      const double mt = merit(Ft, bt_band);
      if (std::isfinite(mt) && (mt < m0 || mt <= opts_.tol)) {
        x = xt;
        F = Ft;
        band = bt_band;
        accepted = true;
        break;
      }
      tstep *= 0.5;
    }
    if (!accepted) throw Error(ErrorKind::NonConvergence, "backtracking failed to reduce the residual");
    last_step = tstep * dx.norm();
    ++iter;
    bp.residual_history.push_back(band);
  }

  ModeStack r = ModeStack::from_flat(g, Parity::Even, x.head(n));
  double full = 0.0;
  fn_.residual(make_state(r), params_at(x(n)), &full);
  bp.w = r;
  bp.w.c.row(0).array() -= xi;
  if (mode_ == BranchMode::Amplitude) {
    bp.a = x(n);
    bp.lambda = base_.lambda0 + base_.dlambda_da * bp.a;
  } else {
    bp.a = a_fixed_;
    bp.lambda = x(n);
  }
  bp.newton_iters = iter;
  bp.residual_L2 = band;
  bp.residual_full_L2 = full;
  Field rf = from_modes(r);
  Eigen::MatrixXd rs = rf.v * g->D.transpose();
  bp.min_ds_r = 1.0 + rs.minCoeff();
  return bp;
}

BranchFile Continuation::continue_branch(double xi_step, int n_steps, const BranchFile* resume,
                                         const std::function<void(const BranchPoint&)>& on_point) const {
  if (xi_step == 0.0 || n_steps < 0) throw Error(ErrorKind::InvalidParameter, "xi_step must be nonzero, n_steps >= 0");
  if (mode_ == BranchMode::Amplitude) {
    const double tc = transversality_coefficient(fn_, base_);
    if (std::abs(tc) < 1e-12) throw Error(ErrorKind::NotABifurcationPoint, "transversality coefficient vanishes");
  }
  BranchFile out;
  out.header = header();
  if (resume) {
    check_compatible(resume->header, out.header);
    out.points = resume->points;
  }
  if (out.points.empty()) {
    out.points.push_back(trivial_point());
    if (on_point) on_point(out.points.back());
  }

  // tangent direction for the first step
  ModeStack tangent = g0();
  if (mode_ == BranchMode::FixedWidth) tangent = bifurcation_lambda(a_fixed_).second;

  int accepted = 0, failures = 0;
  double h = xi_step;
  const double min_step = 1e-7;
  while (accepted < n_steps) {
    const BranchPoint& last = out.points.back();
    const double xi = last.xi + h;
    if (std::abs(xi) > opts_.xi_max + 1e-15) break;
    ModeStack guess = last.rtilde();
    double mu = mode_ == BranchMode::Amplitude ? last.a : last.lambda;
    if (out.points.size() >= 2) {
      const BranchPoint& prev = out.points[out.points.size() - 2];
      const double f = h / (last.xi - prev.xi);
      guess.c += f * (last.rtilde().c - prev.rtilde().c);
      mu += f * ((mode_ == BranchMode::Amplitude ? last.a - prev.a : last.lambda - prev.lambda));
    } else {
      guess.c += h * tangent.c;
    }
    try {
      BranchPoint bp = newton_at_amplitude(xi, guess, mu);
      out.points.push_back(bp);
      if (on_point) on_point(out.points.back());
      ++accepted;
      failures = 0;
      h = std::copysign(std::min(std::abs(2.0 * h), std::abs(xi_step)), xi_step);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonConvergence) throw;
      ++failures;
      h *= 0.5;
      if (failures >= 3 || std::abs(h) < min_step) break;
    }
  }
  return out;
}

void check_compatible(const BranchHeader& f, const BranchHeader& c) {
  std::ostringstream why;
  if (f.version != c.version) why << "version " << f.version << " != " << c.version << "; ";
  if (f.m != c.m) why << "m " << f.m << " != " << c.m << "; ";
  if (f.n_alpha != c.n_alpha || f.n_s != c.n_s || f.harmonics != c.harmonics) why << "grid differs; ";
  if (f.profile != c.profile) why << "profile differs; ";
  if (f.dlambda_da != c.dlambda_da) why << "dlambda_da differs; ";
  if (f.mode != c.mode || f.a_fixed != c.a_fixed) why << "branch mode differs; ";
  if (f.newton_tol != c.newton_tol || f.step_tol != c.step_tol) why << "tolerances differ; ";
  if (!why.str().empty()) throw Error(ErrorKind::IncompatibleRestart, why.str());
}

std::string header_to_json(const BranchHeader& h) {
  json j;
  j["type"] = "header";
  j["m"] = h.m;
  j["n_alpha"] = h.n_alpha;
  j["n_s"] = h.n_s;
  j["harmonics"] = h.harmonics;
  j["profile"] = h.profile;
  j["dlambda_da"] = h.dlambda_da;
  j["newton_tol"] = h.newton_tol;
  j["step_tol"] = h.step_tol;
  j["mode"] = to_string(h.mode);
  j["a_fixed"] = h.a_fixed;
  j["version"] = h.version;
  return j.dump();
}

std::string point_to_json(const BranchPoint& p, int index) {
  json j;
  j["type"] = "point";
  j["index"] = index;
  j["xi"] = p.xi;
  j["a"] = p.a;
  j["lambda"] = p.lambda;
  j["newton_iters"] = p.newton_iters;
  j["residual_L2"] = p.residual_L2;
  j["residual_full_L2"] = p.residual_full_L2;
  j["min_ds_r"] = p.min_ds_r;
  j["residual_history"] = p.residual_history;
  json w = json::array();
  for (int r = 0; r < p.w.c.rows(); ++r) {
    std::vector<double> row(p.w.c.cols());
    for (int c = 0; c < p.w.c.cols(); ++c) row[c] = p.w.c(r, c);
    w.push_back(row);
  }
  j["w"] = w;
  return j.dump();
}

void save_branch(const BranchFile& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot write " + path);
  out << header_to_json(f.header) << "\n";
  for (std::size_t i = 0; i < f.points.size(); ++i) out << point_to_json(f.points[i], static_cast<int>(i)) << "\n";
}

BranchFile load_branch(const std::string& path, GridPtr grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::CorruptFile, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  BranchFile f;
  std::size_t pos = 0;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << path << ": " << why << " at line " << line_no + 1 << "; last good point index "
       << static_cast<long>(f.points.size()) - 1;
    throw Error(ErrorKind::CorruptFile, os.str());
  };
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) fail("unterminated record");
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception&) {
      fail("malformed JSON");
    }
    try {
      if (line_no == 0) {
        if (j.at("type") != "header") fail("missing header");
        BranchHeader& h = f.header;
        h.m = j.at("m");
        h.n_alpha = j.at("n_alpha");
        h.n_s = j.at("n_s");
        h.harmonics = j.at("harmonics");
        h.profile = j.at("profile");
        h.dlambda_da = j.at("dlambda_da");
        h.newton_tol = j.at("newton_tol");
        h.step_tol = j.at("step_tol");
        h.mode = branch_mode_from_string(j.at("mode"));
        h.a_fixed = j.at("a_fixed");
        h.version = j.at("version");
        if (!grid) grid = Grid::make(h.m, h.n_alpha, h.n_s, h.harmonics);
        if (grid->m != h.m || grid->n_alpha != h.n_alpha || grid->n_s != h.n_s || grid->harmonics != h.harmonics)
          throw Error(ErrorKind::IncompatibleRestart, "branch file grid differs from the requested grid");
      } else {
        if (j.at("type") != "point") fail("unexpected record type");
        if (j.at("index").get<long>() != static_cast<long>(f.points.size())) fail("index out of sequence");
        BranchPoint p;
        p.xi = j.at("xi");
        p.a = j.at("a");
        p.lambda = j.at("lambda");
        p.newton_iters = j.at("newton_iters");
        p.residual_L2 = j.at("residual_L2");
        p.residual_full_L2 = j.at("residual_full_L2");
        p.min_ds_r = j.at("min_ds_r");
        p.residual_history = j.at("residual_history").get<std::vector<double>>();
        p.w = ModeStack(grid, Parity::Even);
        const json& w = j.at("w");
        if (static_cast<int>(w.size()) != grid->harmonics) fail("w has wrong harmonic count");
        for (int r = 0; r < grid->harmonics; ++r) {
          if (static_cast<int>(w[r].size()) != grid->n_s) fail("w has wrong s-node count");
          for (int c = 0; c < grid->n_s; ++c) p.w.c(r, c) = w[r][c].get<double>();
        }
        if (!f.points.empty() && f.points.size() >= 2) {
          const double d0 = f.points[1].xi - f.points[0].xi;
          if ((p.xi - f.points.back().xi) * d0 <= 0.0) fail("xi not strictly monotone");
        }
        f.points.push_back(std::move(p));
      }
    } catch (const nlohmann::json::exception&) {
      fail("missing or mistyped field");
    }
    ++line_no;
  }
  if (line_no == 0) fail("empty file");
  return f;
}

}  // namespace rotostate
