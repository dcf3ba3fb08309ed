#include "lifesat/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lifesat/error.hpp"

namespace lifesat::optimize {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void clamp_into(std::vector<double>& x, const Box& box) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], box.lower[i], box.upper[i]);
}

std::vector<bool> active_set(const std::vector<double>& x, const std::vector<double>& g,
                             const Box& box) {
  std::vector<bool> active(x.size(), false);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eps = 1e-12 * std::max(1.0, std::abs(x[i]));
    active[i] = (x[i] <= box.lower[i] + eps && g[i] > 0) ||
                (x[i] >= box.upper[i] - eps && g[i] < 0);
  }
  return active;
}

using Matrix = std::vector<std::vector<double>>;

Matrix identity(std::size_t n, double scale = 1.0) {
  Matrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = scale;
  return m;
}

}  // namespace

Result minimize(const Objective& f, std::vector<double> x, const Box& box, const Options& opt) {
  const std::size_t n = x.size();
  if (box.lower.size() != n || box.upper.size() != n) {
    throw Error(ErrorCode::ContractViolation, "box dimension mismatch");
  }
  clamp_into(x, box);
  std::vector<double> g(n);
  double fx = f(x, g);
  Matrix h = identity(n);
  bool fresh = true;  // h is a (scaled) identity
  std::vector<bool> last_active = active_set(x, g, box);

  Result result;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const auto active = active_set(x, g, box);
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) pg = std::max(pg, std::abs(g[i]));
    }
    if (pg < opt.gradient_tolerance) {
      result.converged = true;
      break;
    }
    if (active != last_active) {
      h = identity(n);
      fresh = true;
      last_active = active;
    }

    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (!active[j]) d[i] -= h[i][j] * g[j];
      }
    }
    if (dot(d, g) >= 0) {
      h = identity(n);
      fresh = true;
      for (std::size_t i = 0; i < n; ++i) d[i] = active[i] ? 0.0 : -g[i];
    }

    // Projected backtracking line search.
    std::vector<double> x_new(n);
    std::vector<double> g_new(n);
    double f_new = fx;
    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
      clamp_into(x_new, box);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - x[i]);
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        h = identity(n);
        fresh = true;
        continue;
      }
      // No descent possible along the steepest direction: treat as stationary
      // at working precision.
      result.converged = pg < 1e-6;
      break;
    }

    std::vector<double> s(n);
    std::vector<double> y(n);
    double max_step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
      max_step = std::max(max_step, std::abs(s[i]));
    }
    const double df = std::abs(f_new - fx);
    x = x_new;
    g = g_new;
    fx = f_new;

    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      if (fresh) h = identity(n, sy / dot(y, y));
      fresh = false;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hy[i] += h[i][j] * y[j];
      }
      const double yhy = dot(y, hy);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
      }
    }

    if (max_step < opt.step_tolerance && df < opt.objective_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.x = std::move(x);
  result.value = fx;
  return result;
}

Result polish(const Objective& f, std::vector<double> x, const Box& box, double gradient_tolerance,
              int max_steps) {
  const std::size_t n = x.size();
  clamp_into(x, box);
  std::vector<double> g(n), gp(n);
  double fx = f(x, g);
  Result result;
  for (int step = 0; step < max_steps; ++step) {
    result.iterations = step + 1;
    const auto active = active_set(x, g, box);
    std::vector<std::size_t> free;
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) continue;
      free.push_back(i);
      pg = std::max(pg, std::abs(g[i]));
    }
    result.projected_gradient = pg;
    if (pg < gradient_tolerance) {
      result.converged = true;
      break;
    }
    const std::size_t m = free.size();
    Matrix h(m, std::vector<double>(m));
    for (std::size_t a = 0; a < m; ++a) {
      auto probe = x;
      const double e = 1e-6 * std::max(1.0, std::abs(x[free[a]]));
      probe[free[a]] += e;
      f(probe, gp);
      for (std::size_t b = 0; b < m; ++b) h[a][b] = (gp[free[b]] - g[free[b]]) / e;
    }
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) h[a][b] = h[b][a] = 0.5 * (h[a][b] + h[b][a]);
    }

    // Cholesky with growing diagonal shift until positive definite
    std::vector<double> d(n, 0.0);
    double shift = 0.0;
    for (int tries = 0; tries < 40; ++tries) {
      Matrix l(m, std::vector<double>(m, 0.0));
      bool ok = true;
      for (std::size_t i = 0; i < m && ok; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double sum = h[i][j] + (i == j ? shift : 0.0);
          for (std::size_t k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
          if (i == j) {
            if (!(sum > 0)) {
              ok = false;
              break;
            }
            l[i][i] = std::sqrt(sum);
          } else {
            l[i][j] = sum / l[j][j];
          }
        }
      }
      if (ok) {
        std::vector<double> y(m);
        for (std::size_t i = 0; i < m; ++i) {
          double sum = -g[free[i]];
          for (std::size_t k = 0; k < i; ++k) sum -= l[i][k] * y[k];
          y[i] = sum / l[i][i];
        }
        for (std::size_t i = m; i-- > 0;) {
          double sum = y[i];
          for (std::size_t k = i + 1; k < m; ++k) sum -= l[k][i] * d[free[k]];
          d[free[i]] = sum / l[i][i];
        }
        break;
      }
      shift = shift == 0.0 ? 1e-8 : shift * 10;
    }

    // Near the optimum the decrease in f drops under its rounding error; a
    // step that leaves f flat to rounding is then taken if it shrinks the
    // free gradient.
    const double flat = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
    double gnorm = 0.0;
    for (auto i : free) gnorm += g[i] * g[i];
    std::vector<double> x_new(n);
    double f_new = fx;
    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
      clamp_into(x_new, box);
      f_new = f(x_new, gp);
      if (!std::isfinite(f_new)) continue;
      if (f_new < fx) {
        accepted = true;
        break;
      }
      if (f_new <= fx + flat) {
        double gn = 0.0;
        for (auto i : free) gn += gp[i] * gp[i];
        if (gn < gnorm) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted || x_new == x) break;
    x = x_new;
    g = gp;
    fx = f_new;
  }
  {
    const auto active = active_set(x, g, box);
    result.projected_gradient = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) result.projected_gradient = std::max(result.projected_gradient, std::abs(g[i]));
    }
  }
  result.x = std::move(x);
  result.value = fx;
  return result;
}

std::vector<double> numerical_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step) {
  std::vector<double> grad(x.size());
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace lifesat::optimize
