#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace qttfit {

/// Objective callback: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iterations = 500;
  int history = 10;
  double c1 = 1e-4;  ///< sufficient decrease
  double c2 = 0.9;   ///< curvature (strong Wolfe)
  int max_line_search = 40;
  /// Stop when (f[k-window] - f[k]) / |f[k-window]| falls below this.
  double rel_decrease_tol = 1e-12;
  int rel_decrease_window = 10;
  /// Stop when ||grad||_inf <= grad_tol.
  double grad_tol = 0.0;
};

struct LbfgsResult {
  Eigen::VectorXd x;             ///< best iterate
  double value = 0.0;            ///< f at x
  std::vector<double> trace;     ///< f after each accepted step, trace[0] = f(x0)
  int iterations = 0;
  bool line_search_failed = false;
  bool converged = false;
};

/// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom
/// with cubic interpolation). Never returns a point worse than x0.
LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opts);

}  // namespace qttfit
