#pragma once

// Box-constrained limited-memory quasi-Newton minimiser with finite-difference
// gradients. Variables at an active bound are frozen for the two-loop
// recursion, the step is projected back into the box, and a backtracking
// Armijo search along the projected path accepts it.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace fourplan {

struct BoxBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static BoxBounds unbounded(std::size_t n) {
    return {std::vector<double>(n, -std::numeric_limits<double>::infinity()),
            std::vector<double>(n, std::numeric_limits<double>::infinity())};
  }
};

struct LbfgsbOptions {
  int memory = 10;
  int max_iterations = 500;
  /// Stop when one accepted step changes f by less than this.
  double f_tol = 1e-9;
  /// Stop when the projected gradient's infinity norm falls below this.
  double pg_tol = 1e-6;
  double fd_rel_step = 1e-6;
  double fd_min_step = 1e-8;
  double armijo_c1 = 1e-4;
  int max_backtracks = 40;
};

struct LbfgsbResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int evaluations = 0;
  std::string stop_reason;
  /// f at the start point and after every accepted step.
  std::vector<double> f_history;
};

/// Central differences; one-sided at a bound so every probe stays feasible.
template <class Objective>
std::vector<double> finite_difference_gradient(Objective& f, const std::vector<double>& x,
                                               const BoxBounds& box, const LbfgsbOptions& opts,
                                               int* evaluations = nullptr) {
  std::vector<double> g(x.size(), 0.0);
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = std::max(opts.fd_rel_step * std::abs(x[i]), opts.fd_min_step);
    const bool room_up = x[i] + h <= box.upper[i];
    const bool room_down = x[i] - h >= box.lower[i];
    double hi = x[i], lo = x[i];
    if (room_up) hi = x[i] + h;
    if (room_down) lo = x[i] - h;
    if (!room_up && !room_down) continue;
    probe[i] = hi;
    const double f_hi = room_up ? f(probe) : 0.0;
    probe[i] = lo;
    const double f_lo = room_down ? f(probe) : 0.0;
    probe[i] = x[i];
    if (evaluations) *evaluations += (room_up ? 1 : 0) + (room_down ? 1 : 0);
    if (room_up && room_down) {
      g[i] = (f_hi - f_lo) / (hi - lo);
    } else {
      const double f0 = f(x);
      if (evaluations) ++*evaluations;
      g[i] = room_up ? (f_hi - f0) / (hi - x[i]) : (f0 - f_lo) / (x[i] - lo);
    }
  }
  return g;
}

namespace detail {

inline void project(std::vector<double>& x, const BoxBounds& box) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], box.lower[i], box.upper[i]);
}

/// A variable is pinned when it sits on a bound and the gradient pushes it out.
inline std::vector<bool> free_set(const std::vector<double>& x, const std::vector<double>& g,
                                  const BoxBounds& box) {
  std::vector<bool> free(x.size(), true);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] <= box.lower[i] && g[i] > 0) || (x[i] >= box.upper[i] && g[i] < 0)) free[i] = false;
  }
  return free;
}

inline double dot_on(const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<bool>& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask[i]) s += a[i] * b[i];
  }
  return s;
}

}  // namespace detail

template <class Objective>
LbfgsbResult minimize_box(Objective&& f, std::vector<double> x0, const BoxBounds& box,
                          const LbfgsbOptions& opts = {}) {
  LbfgsbResult res;
  detail::project(x0, box);
  std::vector<double> x = std::move(x0);
  double fx = f(x);
  res.evaluations = 1;
  res.f_history.push_back(fx);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    res.stop_reason = "nonfinite";
    return res;
  }
  std::vector<double> g = finite_difference_gradient(f, x, box, opts, &res.evaluations);
  std::deque<std::vector<double>> s_hist, y_hist;
  const std::size_t n = x.size();

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const auto free = detail::free_set(x, g, box);
    double pg_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (free[i]) pg_norm = std::max(pg_norm, std::abs(g[i]));
    }
    if (pg_norm < opts.pg_tol) {
      res.stop_reason = "pgtol";
      break;
    }

    // Two-loop recursion restricted to the free variables.
    std::vector<double> q(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) q[i] = free[i] ? g[i] : 0.0;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m, 0.0), rho(m, 0.0);
    for (std::size_t k = m; k-- > 0;) {
      const double sy = detail::dot_on(s_hist[k], y_hist[k], free);
      rho[k] = sy > 1e-300 ? 1.0 / sy : 0.0;
      alpha[k] = rho[k] * detail::dot_on(s_hist[k], q, free);
      for (std::size_t i = 0; i < n; ++i) {
        if (free[i]) q[i] -= alpha[k] * y_hist[k][i];
      }
    }
    if (m > 0) {
      const double yy = detail::dot_on(y_hist.back(), y_hist.back(), free);
      const double sy = detail::dot_on(s_hist.back(), y_hist.back(), free);
      const double scale = yy > 0 && sy > 0 ? sy / yy : 1.0;
      for (auto& v : q) v *= scale;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho[k] * detail::dot_on(y_hist[k], q, free);
      for (std::size_t i = 0; i < n; ++i) {
        if (free[i]) q[i] += s_hist[k][i] * (alpha[k] - beta);
      }
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = free[i] ? -q[i] : 0.0;
    if (detail::dot_on(d, g, free) >= 0) {
      for (std::size_t i = 0; i < n; ++i) d[i] = free[i] ? -g[i] : 0.0;
      s_hist.clear();
      y_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / pg_norm) : 1.0;
    std::vector<double> x_new(n);
    double f_new = fx;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      detail::project(x_new, box);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
      if (decrease >= 0) {
        step *= 0.5;
        continue;
      }
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= fx + opts.armijo_c1 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "linesearch";
      break;
    }

    std::vector<double> g_new = finite_difference_gradient(f, x_new, box, opts, &res.evaluations);
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += s[i] * y[i];
      yy += y[i] * y[i];
    }
    if (sy > 1e-10 * std::max(yy, 1e-300)) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double delta = fx - f_new;
    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);
    res.f_history.push_back(fx);
    if (std::abs(delta) < opts.f_tol) {
      ++res.iterations;
      res.stop_reason = "ftol";
      break;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "maxiter";
  res.x = std::move(x);
  res.f = fx;
  return res;
}

}  // namespace fourplan
