#pragma once

#include <Eigen/Dense>
#include <optional>

#include "rotostate/discretization.hpp"
#include "rotostate/functional.hpp"

namespace rotostate {

enum class AssemblyMethod { Analytic, FiniteDifference };

struct DenseJacobian {
  Eigen::MatrixXd J;  // sin-mode rows x cos-mode columns, harmonic-major
  double a = 0.0;
  AssemblyMethod method = AssemblyMethod::Analytic;
};

// q_k(s) = k g_k(s) (1/2 - lambda0) + (1/2) int F_rho g_k ds'; lambda0 = (m-1)/(2m) unless given.
Eigen::VectorXd analytic_linear_mode(int k, const Eigen::VectorXd& gk, const Grid& grid, const Profile& profile,
                                     std::optional<double> lambda0 = std::nullopt);

DenseJacobian assemble_jacobian(const Functional& fn, const ModeStack& rtilde, const FunctionalParams& p,
                                AssemblyMethod method = AssemblyMethod::Analytic);

// cos(m alpha), constant in s, unit discrete L2 norm.
Field kernel_vector(int m, GridPtr grid);

// int F_rho q_m ds for the m-harmonic sin coefficient of q.
double solvability_defect(const Field& q, const Profile& profile);
double solvability_defect(const ModeStack& q, const Profile& profile);

ModeStack solve_in_image(const ModeStack& q, const Profile& profile, double tol = 1e-9);
Field solve_in_image(const Field& q, const Profile& profile, double tol = 1e-9);

double transversality_coefficient(const Functional& fn, const FunctionalParams& p);

struct SpectrumReport {
  Eigen::VectorXd singular_values;  // ascending
  std::vector<Eigen::VectorXd> per_harmonic;  // ascending, per harmonic block
  double kernel_residual = 0.0;
  double kernel_alignment = 0.0;  // |<v_min, kernel_vector>| in mode coordinates
  int kernel_dimension = 0;
  double second_smallest = 0.0;
  double offdiag_ratio = 0.0;
};

SpectrumReport analyze_spectrum(const Eigen::MatrixXd& J, const Grid& grid, double kernel_tol = 1e-8);

}  // namespace rotostate
