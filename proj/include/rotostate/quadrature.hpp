#pragma once

#include <vector>

#include "rotostate/discretization.hpp"
#include "rotostate/profile.hpp"

namespace rotostate {

// int_{-pi}^{pi} log(2 - 2 cos t) cos(k t) dt
double fourier_log_multiplier(int k);

enum class ExactIntegral { LogCos, LogCosCos, LogSinSin, CosCos, SinSin };

const char* to_string(ExactIntegral id);
double exact_integral(ExactIntegral id, int m);
double exact_integral_quadrature(ExactIntegral id, int m);

// int_{-pi}^{pi} log(2 - 2 cos t + 4 c^2) dt = -2 pi log B(c)
double log_diagonal_closed(double c);
double log_diagonal_quadrature(double c);

// Exact alpha'-weights for log M' with M' = 4 p sin^2 + b^2 e^2 on every
// (target s-node t, source s-node l) pair, indexed by the alpha offset k.
template <class T>
struct LineWeights {
  int n_alpha = 0;
  int n_s = 0;
  T b{};
  std::vector<T> W;     // log M' weights, [(t * n_s + l) * n_alpha + k]
  std::vector<T> W3;    // (log M' - log M'[b=0]) / b weights
  std::vector<T> kink;  // s'-kink correction at k = 0, includes F_l, [t * n_s + l]

  const T* w(int t, int l) const { return &W[(static_cast<std::size_t>(t) * n_s + l) * n_alpha]; }
  const T* w3(int t, int l) const { return &W3[(static_cast<std::size_t>(t) * n_s + l) * n_alpha]; }
};

// omega_{t,l} - w_l |s_t - s_l|, omega = int |s_t - s'| ell_l(s') ds'
Eigen::MatrixXd kink_fractions(const Grid& g);

template <class T>
LineWeights<T> build_line_weights(const Grid& g, const std::vector<double>& Fr, const Eigen::MatrixXd& kinkfrac,
                                  T b);

// Same fractions for an arbitrary target s (zero when s lies outside (-1, 1)).
Eigen::VectorXd kink_fraction_at(const Grid& g, double s_t);

// Weights for a target off the collocation grid: W[l * n_alpha + j] and the kink weight per line.
struct TargetWeights {
  std::vector<double> W;
  std::vector<double> kink;
  int alpha_index = -1;  // grid column coinciding with the target angle, if any
};
TargetWeights target_weights(const Grid& g, const std::vector<double>& Fr, double b, double alpha_t, double s_t);

// Stable helpers; limits are taken at b == 0.
template <class T>
T log1p_over(T b, T x);

// log(A'/M') for one pair, cancellation-free in b.
double log_remainder(double u, double st, double up, double sl, double b, double dalpha);

// Near-diagonal alpha'-correction for log(A'/M') on one line: exact integral minus the
// trapezoid sum of the frozen model log(4 q sin^2 + 4 q cA^2) - log(4 p sin^2 + 4 p cM^2),
// with cA = b|d0| / (2 sqrt q), cM = b|e| / (2 sqrt p). The theta = 0 node is skipped.
template <class T>
T diagonal_correction(int N, T q, T p, T cA, T cM);
// Same for nodes offset from the target by phase (mod 2 pi / N); no node is skipped.
double diagonal_correction_offset(int N, double phase, double cA, double cM);

struct SingularResult {
  double value = 0.0;
  double truncation = 0.0;
};

// int int F_rho(s') log(A') f(alpha', s') dalpha' ds' at the grid point (i, t).
SingularResult integrate_singular(const Field& f, const Field& rtilde, double a, int i, int t, const Profile& profile,
                                  bool check_resolution = true);

}  // namespace rotostate
