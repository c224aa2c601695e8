#include "qttfit/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace qttfit {

namespace {

struct LinePoint {
  double alpha;
  double value;
  double slope;  // directional derivative
};

// Minimizer of the cubic through (a, fa, ga) and (b, fb, gb), clamped into the
// interior of [min(a,b), max(a,b)]. Falls back to bisection.
double cubic_min(const LinePoint& a, const LinePoint& b) {
  const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double denom = b.slope - a.slope + 2.0 * d2;
    if (denom != 0.0) {
      const double c = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
      if (std::isfinite(c)) t = c;
    }
  }
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

class WolfeSearch {
 public:
  WolfeSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double f0,
              double g0, const LbfgsOptions& opts)
      : f_(f), x_(x), dir_(dir), f0_(f0), g0_(g0), opts_(opts) {}

  // Returns true on success; the accepted point is in (x_new, f_new, grad_new).
  bool search(double alpha0) {
    LinePoint prev{0.0, f0_, g0_};
    double alpha = alpha0;
    for (int it = 0; it < opts_.max_line_search; ++it) {
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.value) || cur.value > f0_ + opts_.c1 * alpha * g0_ ||
          (it > 0 && cur.value >= prev.value))
        return zoom(prev, cur);
      if (std::abs(cur.slope) <= -opts_.c2 * g0_) return accept(cur);
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = cur;
      alpha *= 2.0;
    }
    return false;
  }

  Eigen::VectorXd x_new, grad_new;
  double f_new = 0.0;

 private:
  LinePoint probe(double alpha) {
    trial_x_ = x_ + alpha * dir_;
    trial_g_.resize(x_.size());
    const double v = f_(trial_x_, trial_g_);
    const double s = std::isfinite(v) ? trial_g_.dot(dir_) : 0.0;
    last_alpha_ = alpha;
    return {alpha, std::isfinite(v) ? v : std::numeric_limits<double>::infinity(), s};
  }

  bool accept(const LinePoint& p) {
    if (p.alpha != last_alpha_) probe(p.alpha);
    x_new = trial_x_;
    grad_new = trial_g_;
    f_new = p.value;
    return true;
  }

  // lo satisfies sufficient decrease and has the lower value.
  bool zoom(LinePoint lo, LinePoint hi) {
    for (int it = 0; it < opts_.max_line_search; ++it) {
      double alpha = std::isfinite(hi.value) ? cubic_min(lo, hi) : 0.5 * (lo.alpha + hi.alpha);
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.value) || cur.value > f0_ + opts_.c1 * alpha * g0_ || cur.value >= lo.value) {
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -opts_.c2 * g0_) return accept(cur);
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    // Settle for sufficient decrease if we have it.
    if (lo.alpha > 0.0 && lo.value < f0_) return accept(lo);
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  double f0_, g0_;
  const LbfgsOptions& opts_;
  Eigen::VectorXd trial_x_, trial_g_;
  double last_alpha_ = -1.0;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opts) {
  LbfgsResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(x.size());
  double fx = f(x, g);
  res.trace.push_back(fx);
  res.x = x;
  res.value = fx;

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_buf;

  for (int k = 0; k < opts.max_iterations; ++k) {
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    const std::size_t m = s_hist.size();
    alpha_buf.assign(m, 0.0);
    for (std::size_t i = m; i-- > 0;) {
      alpha_buf[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha_buf[i] * y_hist[i];
    }
    if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_buf[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      // Not a descent direction: restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    const double alpha0 = m == 0 ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;

    WolfeSearch ls(f, x, dir, fx, slope, opts);
    if (!ls.search(alpha0)) {
      // A predicted decrease below the relative tolerance is convergence,
      // not a failure: f cannot resolve it anyway.
      if (-slope * alpha0 <= opts.rel_decrease_tol * std::abs(fx))
        res.converged = true;
      else
        res.line_search_failed = true;
      break;
    }
    Eigen::VectorXd s = ls.x_new - x;
    Eigen::VectorXd y = ls.grad_new - g;
    x = std::move(ls.x_new);
    g = std::move(ls.grad_new);
    fx = ls.f_new;
    res.trace.push_back(fx);
    res.iterations = k + 1;
    if (fx < res.value) {
      res.value = fx;
      res.x = x;
    }
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const int w = opts.rel_decrease_window;
    const auto n = static_cast<int>(res.trace.size());
    if (n > w) {
      const double before = res.trace[static_cast<std::size_t>(n - 1 - w)];
      const double rel = (before - fx) / std::max(std::abs(before), std::numeric_limits<double>::min());
      if (rel < opts.rel_decrease_tol) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace qttfit
