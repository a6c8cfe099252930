#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rotostate/functional.hpp"

namespace rotostate {

// Amplitude: unknowns (w, a) with lambda(a) prescribed.
// FixedWidth: a held fixed, unknowns (w, lambda).
enum class BranchMode { Amplitude, FixedWidth };

const char* to_string(BranchMode mode);
BranchMode branch_mode_from_string(const std::string& s);

struct NewtonOptions {
  double tol = 1e-10;
  double step_tol = 1e-12;
  int max_iter = 25;
  int max_backtracks = 8;
  double cond_limit = 1e12;
  double xi_max = 0.05;
};

struct BranchPoint {
  double xi = 0.0;
  double a = 0.0;
  double lambda = 0.0;
  ModeStack w;  // correction in the complement of the kernel
  int newton_iters = 0;
  double residual_L2 = 0.0;       // retained band
  double residual_full_L2 = 0.0;  // all grid content
  double min_ds_r = 1.0;          // min over the grid of 1 + d r~/ds
  std::vector<double> residual_history;

  ModeStack rtilde() const;  // xi g0 + w
};

struct BranchHeader {
  int m = 3;
  int n_alpha = 0;
  int n_s = 0;
  int harmonics = 0;
  std::string profile = "poly4";
  double dlambda_da = 1.0;
  double newton_tol = 1e-10;
  double step_tol = 1e-12;
  BranchMode mode = BranchMode::Amplitude;
  double a_fixed = 0.0;
  std::string version;
};

struct BranchFile {
  BranchHeader header;
  std::vector<BranchPoint> points;
};

extern const char* const kCodeVersion;

class Continuation {
 public:
  Continuation(const Functional& fn, FunctionalParams params, BranchMode mode = BranchMode::Amplitude,
               double a_fixed = 0.0, NewtonOptions opts = {});

  BranchHeader header() const;
  // Kernel basis direction cos(m alpha), constant in s.
  ModeStack g0() const;
  // F_rho-weighted mean of the m-harmonic coefficient; l(g0) = int F_rho = -1.
  double ell(const ModeStack& c) const;

  // Angular velocity at which the trivial state at width a has a kernel in harmonic m, and that kernel.
  std::pair<double, ModeStack> bifurcation_lambda(double a) const;

  BranchPoint trivial_point() const;
  // guess: full r~ coefficients and the second unknown (a or lambda)
  BranchPoint newton_at_amplitude(double xi, const ModeStack& guess, double mu_guess) const;

  BranchFile continue_branch(double xi_step, int n_steps, const BranchFile* resume = nullptr,
                             const std::function<void(const BranchPoint&)>& on_point = {}) const;

  double residual_of(const BranchPoint& bp) const;

 private:
  FunctionalParams params_at(double mu) const;
  const Functional& fn_;
  FunctionalParams base_;
  BranchMode mode_;
  double a_fixed_;
  NewtonOptions opts_;
};

void check_compatible(const BranchHeader& file, const BranchHeader& current);

std::string header_to_json(const BranchHeader& h);
std::string point_to_json(const BranchPoint& p, int index);
void save_branch(const BranchFile& f, const std::string& path);
BranchFile load_branch(const std::string& path, GridPtr grid = nullptr);

}  // namespace rotostate
