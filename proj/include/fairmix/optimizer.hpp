#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fairmix/error.hpp"

namespace fairmix {

struct OptimizerOptions {
  int memory = 10;
  int max_iters = 200;
  // Stop when the projected-gradient infinity norm drops to this.
  double grad_tol = 1e-6;
  // Per-coordinate step is fd_step * (1 + |x_i|).
  double fd_step = 1e-6;
  int restarts = 1;
  // Optional stop on relative objective decrease below this (0 disables).
  double f_rel_tol = 0.0;

  bool valid() const {
    return memory >= 1 && max_iters >= 1 && grad_tol > 0.0 && fd_step > 0.0 && restarts >= 1 &&
           f_rel_tol >= 0.0;
  }
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  std::vector<std::pair<int, double>> trace;
};

namespace detail {

inline double checked(double v, std::span<const double> x) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "objective is not finite at x = [";
    for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
    msg << "]";
    throw NumericError(msg.str());
  }
  return v;
}

inline double lower_at(std::span<const double> lo, std::size_t i) {
  return lo.empty() ? -std::numeric_limits<double>::infinity() : lo[i];
}

inline double upper_at(std::span<const double> hi, std::size_t i) {
  return hi.empty() ? std::numeric_limits<double>::infinity() : hi[i];
}

}  // namespace detail

/// Central differences with h_i = fd_step (1 + |x_i|). Near a bound the
/// stencil is cut at the bound, which turns it one-sided into the feasible
/// region.
template <typename F>
std::vector<double> central_fd_gradient(F&& f, std::span<const double> x, double fd_step,
                                        std::span<const double> lower = {},
                                        std::span<const double> upper = {}) {
  std::vector<double> g(x.size());
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = fd_step * (1.0 + std::abs(x[i]));
    const double xp = std::min(x[i] + h, detail::upper_at(upper, i));
    const double xm = std::max(x[i] - h, detail::lower_at(lower, i));
    probe[i] = xp;
    const double fp = detail::checked(f(std::span<const double>(probe)), probe);
    probe[i] = xm;
    const double fm = detail::checked(f(std::span<const double>(probe)), probe);
    probe[i] = x[i];
    g[i] = xp > xm ? (fp - fm) / (xp - xm) : 0.0;
  }
  return g;
}

/// Projected limited-memory BFGS over the box [lower, upper] (empty spans mean
/// unbounded). The search direction comes from the two-loop recursion with
/// coordinates held at an active bound frozen; trial points are projected onto
/// the box and accepted under the Armijo condition (c1 = 1e-4) with step
/// halving. `grad` maps x to the gradient.
template <typename F, typename G>
MinimizeResult minimize_box_lbfgs(F&& f, G&& grad, std::vector<double> x, std::span<const double> lower,
                                  std::span<const double> upper, const OptimizerOptions& opts = {}) {
  if (!opts.valid()) throw ValidationError("invalid optimizer options");
  const std::size_t n = x.size();
  auto lo = [&](std::size_t i) { return detail::lower_at(lower, i); };
  auto hi = [&](std::size_t i) { return detail::upper_at(upper, i); };
  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo(i), hi(i));
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };
  auto eval = [&](const std::vector<double>& v) { return f(std::span<const double>(v)); };

  project(x);
  MinimizeResult res;
  double fx = eval(x);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.value = fx;
    res.status = "objective not finite at the starting point";
    return res;
  }
  std::vector<double> g = grad(std::span<const double>(x));
  res.trace.emplace_back(0, fx);

  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;
  constexpr double c1 = 1e-4;
  int iter = 0;
  res.status = "iteration limit reached";
  while (true) {
    double pg_inf = 0.0;
    std::vector<bool> frozen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      const double moved = std::clamp(x[i] - g[i], lo(i), hi(i)) - x[i];
      pg_inf = std::max(pg_inf, std::abs(moved));
      frozen[i] = (x[i] <= lo(i) && g[i] > 0.0) || (x[i] >= hi(i) && g[i] < 0.0);
    }
    if (pg_inf <= opts.grad_tol) {
      res.converged = true;
      res.status = "projected gradient below tolerance";
      break;
    }
    if (iter >= opts.max_iters) break;
    ++iter;

    // Two-loop recursion.
    std::vector<double> d = g;
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) d[i] = 0.0;
    }
    std::vector<double> rho(memory.size()), a(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      rho[k] = 1.0 / dot(y, s);
      a[k] = rho[k] * dot(s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= a[k] * y[i];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double scale = dot(s, y) / dot(y, y);
      for (double& v : d) v *= scale;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double b = rho[k] * dot(y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += s[i] * (a[k] - b);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = frozen[i] ? 0.0 : -d[i];
    if (dot(g, d) >= 0.0) {
      memory.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = frozen[i] ? 0.0 : -g[i];
    }

    double step = 1.0;
    if (memory.empty()) {
      double d_inf = 0.0;
      for (double v : d) d_inf = std::max(d_inf, std::abs(v));
      if (d_inf > 1.0) step = 1.0 / d_inf;
    }

    std::vector<double> xt(n);
    double ft = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + step * d[i];
      project(xt);
      if (xt == x) break;
      ft = eval(xt);
      if (!std::isfinite(ft)) continue;
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xt[i] - x[i]);
      if (ft <= fx + c1 * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      res.status = "line search found no acceptable step";
      break;
    }

    std::vector<double> gt = grad(std::span<const double>(xt));
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xt[i] - x[i];
      y[i] = gt[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * dot(y, y) && sy > 0.0) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > static_cast<std::size_t>(opts.memory)) memory.pop_front();
    }
    const double f_prev = fx;
    x = std::move(xt);
    fx = ft;
    g = std::move(gt);
    res.trace.emplace_back(iter, fx);
    if (opts.f_rel_tol > 0.0 &&
        f_prev - fx <= opts.f_rel_tol * std::max({std::abs(f_prev), std::abs(fx), 1.0})) {
      res.converged = true;
      res.status = "relative objective decrease below tolerance";
      break;
    }
  }
  res.x = std::move(x);
  res.value = fx;
  res.iterations = iter;
  return res;
}

/// minimize_box_lbfgs with central finite-difference gradients.
template <typename F>
MinimizeResult minimize_box_lbfgs(F&& f, std::vector<double> x0, std::span<const double> lower,
                                  std::span<const double> upper, const OptimizerOptions& opts = {}) {
  auto grad = [&](std::span<const double> x) {
    return central_fd_gradient(f, x, opts.fd_step, lower, upper);
  };
  return minimize_box_lbfgs(f, grad, std::move(x0), lower, upper, opts);
}

}  // namespace fairmix
