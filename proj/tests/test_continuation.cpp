#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "rotostate/continuation.hpp"
#include "rotostate/error.hpp"

using namespace rotostate;

namespace {

struct Rig {
  GridPtr g;
  Functional fn;
  explicit Rig(int m = 3, int ns = 10, int J = 4) : g(Grid::make(m, 16 * m, ns, J)), fn(g, Profile::poly4()) {}
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Continuation, ZeroStepsGivesTrivialPoint) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0));
  BranchFile f = c.continue_branch(0.01, 0);
  ASSERT_EQ(f.points.size(), 1u);
  EXPECT_EQ(f.points[0].xi, 0.0);
  EXPECT_EQ(f.points[0].a, 0.0);
  EXPECT_EQ(f.points[0].w.c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Continuation, AmplitudeNewtonAtZero) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0));
  BranchPoint bp = c.newton_at_amplitude(0.0, ModeStack(s.g, Parity::Even), 0.0);
  EXPECT_LE(bp.newton_iters, 1);
  EXPECT_EQ(bp.a, 0.0);
  EXPECT_LT(bp.w.c.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(c.newton_at_amplitude(0.5, ModeStack(s.g, Parity::Even), 0.0), Error);
}

TEST(Continuation, RefusesWithoutTransversality) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 0.0));
  try {
    c.continue_branch(0.01, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotABifurcationPoint);
  }
}

TEST(Continuation, FixedWidthQuadraticConvergence) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  BranchFile f = c.continue_branch(0.01, 2);
  ASSERT_EQ(f.points.size(), 3u);
  for (std::size_t k = 1; k < f.points.size(); ++k) {
    const BranchPoint& p = f.points[k];
    EXPECT_LE(p.residual_L2, 1e-10);
    EXPECT_GT(p.min_ds_r, 0.0);
    const auto& h = p.residual_history;
    for (std::size_t n = 2; n < h.size(); ++n)
      if (h[n - 1] > 1e-13) {
        EXPECT_LE(h[n], 0.1 * h[n - 1]) << "point " << k << " iter " << n;
      }
    EXPECT_LT(std::abs(c.ell(p.w)), 1e-10);
  }
}

TEST(Continuation, SignFlipIsHalfPeriodShift) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  auto lam = c.bifurcation_lambda(0.2);
  ModeStack gp = lam.second, gm = lam.second;
  gp.c *= 0.01;
  gm.c *= -0.01;
  BranchPoint p = c.newton_at_amplitude(0.01, gp, lam.first);
  BranchPoint q = c.newton_at_amplitude(-0.01, gm, lam.first);
  ModeStack rp = p.rtilde(), rq = q.rtilde();
  // cos(j m (alpha + pi / m)) = (-1)^j cos(j m alpha)
  for (int j = 0; j < s.g->harmonics; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;
    for (int l = 0; l < s.g->n_s; ++l) EXPECT_NEAR(rq.c(j, l), sign * rp.c(j, l), 1e-8);
  }
  EXPECT_NEAR(p.lambda, q.lambda, 1e-8);
}

TEST(Continuation, SaveLoadRoundTrip) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  BranchFile f = c.continue_branch(0.01, 2);
  const std::string path = ::testing::TempDir() + "roundtrip.jsonl";
  save_branch(f, path);
  BranchFile g = load_branch(path);
  ASSERT_EQ(g.points.size(), f.points.size());
  EXPECT_EQ(header_to_json(g.header), header_to_json(f.header));
  for (std::size_t k = 0; k < f.points.size(); ++k) {
    EXPECT_EQ(point_to_json(g.points[k], static_cast<int>(k)), point_to_json(f.points[k], static_cast<int>(k)));
    EXPECT_EQ((g.points[k].w.c - f.points[k].w.c).cwiseAbs().maxCoeff(), 0.0);
  }
  const std::string path2 = ::testing::TempDir() + "roundtrip2.jsonl";
  save_branch(g, path2);
  EXPECT_EQ(slurp(path), slurp(path2));
}

TEST(Continuation, HeaderMismatchIsRejected) {
  Rig s3;
  Continuation c3(s3.fn, FunctionalParams::make(3, 1.0));
  BranchFile f = c3.continue_branch(0.01, 0);
  Rig s2(2);
  Continuation c2(s2.fn, FunctionalParams::make(2, 1.0));
  try {
    check_compatible(f.header, c2.header());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompatibleRestart);
  }
  EXPECT_THROW(c2.continue_branch(0.01, 1, &f), Error);
}

TEST(Continuation, TruncatedFileIsCorrupt) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  BranchFile f = c.continue_branch(0.01, 2);
  const std::string path = ::testing::TempDir() + "trunc.jsonl";
  save_branch(f, path);
  std::string text = slurp(path);
  {
    std::ofstream out(path, std::ios::binary);
    out << text.substr(0, text.size() - 40);
  }
  try {
    load_branch(path);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorruptFile);
    EXPECT_NE(std::string(e.what()).find("last good point index 1"), std::string::npos) << e.what();
  }
  try {
    load_branch(path + ".missing");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorruptFile);
  }
}

TEST(Continuation, RestartIsBitwise) {
  Rig s;
  Continuation c(s.fn, FunctionalParams::make(3, 1.0), BranchMode::FixedWidth, 0.2);
  BranchFile full = c.continue_branch(0.01, 3);
  BranchFile part = c.continue_branch(0.01, 2);
  const std::string path = ::testing::TempDir() + "restart.jsonl";
  save_branch(part, path);
  BranchFile loaded = load_branch(path, s.g);
  BranchFile resumed = c.continue_branch(0.01, 1, &loaded);
  ASSERT_EQ(resumed.points.size(), full.points.size());
  EXPECT_EQ(point_to_json(resumed.points.back(), 3), point_to_json(full.points.back(), 3));

  BranchFile again = c.continue_branch(0.01, 3);
  for (std::size_t k = 0; k < full.points.size(); ++k)
    EXPECT_EQ(point_to_json(again.points[k], static_cast<int>(k)), point_to_json(full.points[k], static_cast<int>(k)));
}
