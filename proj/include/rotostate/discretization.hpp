#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace rotostate {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

// Tensor grid on T x (-1,1): uniform periodic alpha nodes, Gauss-Legendre s nodes.
class Grid {
 public:
  static GridPtr make(int m, int n_alpha, int n_s, int harmonics);
  // Smallest admissible alpha count >= requested.
  static int admissible_n_alpha(int requested, int m, int harmonics);

  int m = 2;
  int n_alpha = 0;
  int n_s = 0;
  int harmonics = 0;
  std::vector<double> alpha;
  std::vector<double> s;
  std::vector<double> w;
  std::vector<double> bary;
  Eigen::MatrixXd D;     // d/ds at the Gauss nodes
  Eigen::MatrixXd cosj;  // cos(j m alpha_i), row j-1
  Eigen::MatrixXd sinj;

  int half_period() const { return n_alpha / (2 * m); }
  // Lagrange basis values (and derivatives) at x.
  void lagrange(double x, Eigen::VectorXd& ell, Eigen::VectorXd* dell = nullptr) const;
};

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

enum class Parity { None, Even, Odd };

struct Field {
  GridPtr grid;
  Eigen::MatrixXd v;  // n_alpha x n_s
  Parity parity = Parity::None;
  bool m_fold = false;

  Field() = default;
  Field(GridPtr g, Parity p = Parity::None, bool fold = false)
      : grid(std::move(g)), v(Eigen::MatrixXd::Zero(grid->n_alpha, grid->n_s)), parity(p), m_fold(fold) {}
};

// Coefficients of cos(j m alpha) (even) or sin(j m alpha) (odd), j = 1..J, per s node.
struct ModeStack {
  GridPtr grid;
  Eigen::MatrixXd c;  // J x n_s
  Parity parity = Parity::Even;

  ModeStack() = default;
  ModeStack(GridPtr g, Parity p)
      : grid(std::move(g)), c(Eigen::MatrixXd::Zero(grid->harmonics, grid->n_s)), parity(p) {}
  Eigen::VectorXd flat() const;
  static ModeStack from_flat(GridPtr g, Parity p, const Eigen::VectorXd& x);
};

ModeStack to_modes(const Field& f, double* truncation = nullptr);
Field from_modes(const ModeStack& ms);
// d/dalpha on the retained band: even <-> odd.
ModeStack d_alpha(const ModeStack& ms);
Field d_alpha(const Field& f);
void symmetrize(Field& f);

double l2_norm(const Field& f);
double sobolev_norm_43(const Field& f);
double sobolev_norm_33(const Field& f);

void write_field_csv(const Field& f, const std::string& path);

}  // namespace rotostate
