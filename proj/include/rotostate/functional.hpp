#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rotostate/discretization.hpp"
#include "rotostate/dual.hpp"
#include "rotostate/profile.hpp"
#include "rotostate/quadrature.hpp"

namespace rotostate {

struct FunctionalParams {
  int m = 3;
  double lambda0 = 1.0 / 3.0;
  double dlambda_da = 1.0;
  double a = 0.0;
  // Replaces lambda(a); then lambda no longer depends on a.
  std::optional<double> lambda_fixed;

  static FunctionalParams make(int m, double dlambda_da = 1.0, double a = 0.0);
  double lambda() const { return lambda_fixed ? *lambda_fixed : lambda0 + dlambda_da * a; }
  double lambda_slope() const { return lambda_fixed ? 0.0 : dlambda_da; }
};

// Samples of u = s + r~ and u_alpha on the full grid.
struct State {
  Eigen::MatrixXd U;
  Eigen::MatrixXd Ua;
  Eigen::MatrixXd Us;
};

State make_state(const Field& rtilde);
State make_state(const ModeStack& rtilde);

// Rescaled functional on the collocation grid. Targets are the interior
// points of the fundamental half period; the rest follow from odd m-fold symmetry.
class Functional {
 public:
  Functional(GridPtr grid, Profile profile);

  const GridPtr& grid() const { return grid_; }
  const Profile& profile() const { return profile_; }
  const std::vector<double>& Fr() const { return Fr_; }

  Field eval_G(const Field& rtilde, const FunctionalParams& p) const;
  Field eval_dG_da(const Field& rtilde, const FunctionalParams& p) const;
  Field eval_dG_dr(const Field& rtilde, const Field& g, const FunctionalParams& p) const;
  Field eval_d2G_dadr(const Field& rtilde, const Field& g, const FunctionalParams& p) const;
  Field eval_dG_dlambda(const Field& rtilde, const FunctionalParams& p) const;

  // sin-mode coordinates (J x n_s, flattened harmonic-major)
  Eigen::VectorXd residual(const State& st, const FunctionalParams& p, double* full_l2 = nullptr) const;
  Eigen::VectorXd d_da(const State& st, const FunctionalParams& p) const;
  Eigen::VectorXd d_dlambda(const State& st, const FunctionalParams& p) const;
  // Columns: cos(j m alpha) times the s-cardinal function of node l.
  Eigen::MatrixXd jacobian(const State& st, const FunctionalParams& p) const;
  Eigen::MatrixXd jacobian_fd(const ModeStack& rtilde, const FunctionalParams& p, double step = 1e-6) const;

  // Values at fundamental targets, [t * half + (i - 1)].
  template <class T>
  std::vector<T> values(const State& st, T b, T lambda) const;
  template <class T>
  std::vector<T> directional(const State& st, const Eigen::MatrixXd& g, const Eigen::MatrixXd& ga, T b,
                             T lambda) const;

  // Biot-Savart velocity at every collocation node of the physical state with width a.
  void node_velocity(const State& st, double a, Eigen::MatrixXd& vx, Eigen::MatrixXd& vy) const;

  Field expand(const std::vector<double>& vals) const;
  Eigen::VectorXd project(const std::vector<double>& vals, double* full_l2 = nullptr) const;
  // L2 norm of a sin-mode vector
  double modes_l2(const Eigen::VectorXd& q) const;

 private:
  template <class T>
  const LineWeights<T>& weights(T b) const;

  GridPtr grid_;
  Profile profile_;
  std::vector<double> Fr_;
  Eigen::MatrixXd kinkfrac_;
  std::vector<double> sig_, cs_, sn_;
  int half_ = 0;  // interior targets per s node: half_period - 1
  mutable std::vector<std::pair<double, LineWeights<double>>> cache_d_;
  mutable std::vector<std::pair<std::pair<double, double>, LineWeights<Dual>>> cache_dual_;
};

}  // namespace rotostate
