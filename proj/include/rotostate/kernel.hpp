#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rotostate/discretization.hpp"

namespace rotostate {

// A = 4 sigma (1 + b u)(1 + b u') + b^2 (u - u')^2, sigma = sin^2(dalpha/2), b = a^2.
double eval_A(double u, double up, double a, double dalpha);
// (1/b) log(A / A[0]); limit u + u' at a = 0.
double log_ratio_over_b(double u, double up, double a, double dalpha);
double eval_dA_da(double u, double up, double a, double dalpha);
double eval_dA_du(double u, double up, double g, double gp, double a, double dalpha);

struct BoundsReport {
  std::string name;
  long samples = 0;
  double worst_margin = 0.0;
  double fitted_c = 0.0;   // min A' / (sin^2 + b^2 s'^2)
  double fitted_C2 = 0.0;  // max log A' - log(sin^2 + b^2 s'^2)
  double fitted_C3 = 0.0;  // max |dA'| / (b (sin^2 + b s'^2))
  double fitted_C4 = 0.0;  // max |d^2 A'| / (b (sin^2 + b(|sin| + |s'| + s'^2)))
  bool ok = true;
  std::string violation;
};

BoundsReport check_kernel_bounds(long samples, double a, const Field& rtilde, std::uint64_t seed = 1);

struct ScalingReport {
  int m = 0, k = 0, l = 0;
  std::string regime;  // "power", "log", "const"
  double predicted_exponent = 0.0;
  double fitted_exponent = 0.0;
  double flatness = 0.0;  // max/min of I(b)/model(b)
  std::vector<double> b, I;
  bool ok = true;
};

ScalingReport check_kernel_scaling(int m, int k, int l, const std::vector<double>& b_list);

// Quadrature of int log(1 + b^2 / sin^2(x/2)) dx minus 4 pi asinh(b).
double check_arcsinh_identity(double b);

}  // namespace rotostate
