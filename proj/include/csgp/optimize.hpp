#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace csgp {

using Eigen::Index;
using Eigen::VectorXd;

struct OptimOptions {
  Index max_iters = 100;
  double grad_tol = 1e-5;    // on the infinity norm of the gradient
  double f_tol = 1e-9;       // relative objective decrease
  Index history = 10;        // L-BFGS memory
  Index max_line_search = 40;
};

struct OptimResult {
  VectorXd x;
  double fx = std::numeric_limits<double>::infinity();
  Index iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> trace;  // accepted objective values, non-increasing
};

/// Limited-memory BFGS with Armijo backtracking. The callable evaluates
/// f(x) and, when `grad` is non-null, fills the gradient. Non-finite
/// objective values are treated as rejected trial points.
template <typename F>
OptimResult minimize(F&& fg, VectorXd x0, const OptimOptions& opt = {}) {
  OptimResult res;
  const Index n = x0.size();
  VectorXd g(n);
  double fx = fg(x0, &g);
  res.trace.push_back(fx);
  res.x = x0;
  res.fx = fx;
  if (!std::isfinite(fx)) {
    res.line_search_failed = true;
    return res;
  }

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  VectorXd x = x0;

  for (Index iter = 0; iter < opt.max_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    VectorXd q = -g;
    std::vector<double> alpha(s_hist.size());
    for (Index i = static_cast<Index>(s_hist.size()) - 1; i >= 0; --i) {
      const auto ui = static_cast<std::size_t>(i);
      alpha[ui] = rho_hist[ui] * s_hist[ui].dot(q);
      q -= alpha[ui] * y_hist[ui];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }

    double dir_deriv = g.dot(q);
    if (!(dir_deriv < 0.0)) {  // not a descent direction; fall back
      q = -g;
      dir_deriv = -g.squaredNorm();
    }

    // Armijo backtracking.
    double step = (iter == 0 && s_hist.empty())
                      ? 1.0 / std::max(1.0, g.norm())
                      : 1.0;
    const double c1 = 1e-4;
    bool accepted = false;
    VectorXd x_new;
    double f_new = fx;
    for (Index ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = x + step * q;
      const double f_try = fg(x_new, nullptr);
      if (std::isfinite(f_try) && f_try <= fx + c1 * step * dir_deriv) {
        f_new = f_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    VectorXd g_new(n);
    const double f_check = fg(x_new, &g_new);
    // Gradient evaluation reuses the accepted point; keep the line-search value.
    (void)f_check;

    const VectorXd s = x_new - x;
    const VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<Index>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double f_prev = fx;
    x = x_new;
    fx = f_new;
    g = g_new;
    res.trace.push_back(fx);
    res.iterations = iter + 1;
    res.x = x;
    res.fx = fx;
    if (f_prev - fx <= opt.f_tol * (std::abs(f_prev) + 1.0)) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.fx = fx;
  return res;
}

}  // namespace csgp
