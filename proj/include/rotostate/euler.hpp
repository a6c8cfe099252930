#pragma once

#include <array>
#include <string>
#include <vector>

#include "rotostate/continuation.hpp"

namespace rotostate {

struct EulerParams {
  int raster_n = 512;
  double extent = 2.0;  // raster covers [-extent, extent]^2
  int level_points = 0;  // per level-set polyline; 0 means 2 n_alpha
};

// Physical rotating state x(alpha, rho) = r(alpha, rho) (cos alpha, sin alpha).
struct EulerState {
  GridPtr grid;
  Profile profile;
  BranchPoint point;
  int m = 2;
  double a = 0.0;
  double b = 0.0;
  double lambda = 0.0;
  ModeStack rtilde;
  Eigen::MatrixXd U, Ua;     // s + r~ and its alpha derivative at the nodes
  std::vector<double> Fr;    // phi at the s nodes
  std::vector<double> rho;   // 1 + a s_l
  Eigen::MatrixXd r;         // r(alpha_i, rho_l)
  double min_drho_r = 0.0;
  Eigen::MatrixXd vx, vy;    // velocity at the collocation nodes
  Eigen::MatrixXd omega;     // raster, row k is y_k, column j is x_j
  double extent = 2.0;
  double rotation_residual = 0.0;

  // r~ and its alpha derivative at an arbitrary (alpha, s)
  double rt(double alpha, double s, double* rt_alpha = nullptr, double* rt_s = nullptr) const;
  double radius(double alpha, double rho) const;
  // Layer coordinate s of the level curve through (alpha, R); clamps to [-1, 1] outside the layer.
  double invert(double alpha, double R) const;
  double vorticity_at(double x, double y) const;
};

EulerState reconstruct(const Functional& fn, const BranchPoint& bp, const EulerParams& params = {});

// Biot-Savart velocity at the level-set point (alpha, rho), or at a Cartesian point.
std::array<double, 2> velocity_at(const EulerState& st, double alpha, double rho);
std::array<double, 2> velocity_at_point(const EulerState& st, double x, double y);
// Interpolated node velocity field.
std::array<double, 2> interpolate_velocity(const EulerState& st, double x, double y);

// sup over the collocation grid of |lambda x.x_alpha + x_alpha^perp . v|
double rotation_residual(const EulerState& st, double lambda);

struct AdvectOptions {
  double T = 0.0;    // 0 means a tenth of a rotation period
  double dt = 0.0;   // 0 means 0.01 / lambda
  int markers_per_level = 24;
  bool full_biot_savart = false;
};

struct Trajectory {
  int marker = 0;
  double level_s = 0.0;
  std::vector<double> t, x, y;
};

struct AdvectReport {
  double T = 0.0;
  double dt = 0.0;
  int steps = 0;
  double max_deviation = 0.0;  // radial distance to the rotated level curve
  double lambda_fit = 0.0;     // NaN if the shape carries no angular information
  double lambda_rel_error = 0.0;
  double omega_drift = 0.0;    // raster vorticity at the markers vs initial
  std::vector<Trajectory> trajectories;
};

AdvectReport advect_check(const EulerState& st, const AdvectOptions& opts = {});

void write_raster_csv(const EulerState& st, const std::string& path);
void write_raster_binary(const EulerState& st, const std::string& path);
void write_raster_header(const EulerState& st, const std::string& path, const std::string& data_file,
                         const std::string& format);
void write_level_sets(const EulerState& st, const std::string& path, int points = 0);
void write_diagnostics(const EulerState& st, const std::string& path);
void write_trajectories(const AdvectReport& rep, const std::string& path);

}  // namespace rotostate
