#pragma once

#include "genriesz/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <utility>

namespace genriesz {

/// Settings for the limited-memory BFGS solver.
template <typename Scalar>
struct BasicSolveConfig {
  int max_iter = 500;
  Scalar grad_tol = Scalar(1e-8);  // sup-norm of the gradient
  int memory = 10;                 // stored correction pairs
  Scalar c1 = Scalar(1e-4);        // sufficient decrease
  Scalar c2 = Scalar(0.9);         // curvature
  int max_linesearch = 60;
  int max_halvings = 50;  // non-finite trial points

  void validate() const {
    if (max_iter < 0 || !(grad_tol > 0) || memory < 1 || !(c1 > 0) || !(c2 > c1) || !(c2 < 1))
      throw InvalidArgument("SolveConfig: invalid settings");
  }
};

template <typename Scalar>
struct BasicSolveResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar value = 0;
  Scalar grad_inf = 0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

using SolveConfig = BasicSolveConfig<double>;
using SolveResult = BasicSolveResult<double>;

namespace detail {

template <typename Scalar>
Scalar cubic_minimizer(Scalar a, Scalar fa, Scalar da, Scalar b, Scalar fb, Scalar db) {
  // Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db).
  const Scalar d1 = da + db - 3 * (fa - fb) / (a - b);
  const Scalar disc = d1 * d1 - da * db;
  if (!(disc >= 0)) return std::numeric_limits<Scalar>::quiet_NaN();
  const Scalar d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2 * d2);
}

}  // namespace detail

/// Minimizes a smooth function with L-BFGS and a strong-Wolfe line search.
///
/// `fg(x, grad)` returns f(x) and writes the gradient into `grad`. Trial points
/// where f is not finite are treated as infeasible: the step is halved, up to
/// `max_halvings` times per line search. Accepted steps never raise the
/// objective by more than a few ulps.
template <typename Scalar, typename Fg>
BasicSolveResult<Scalar> minimize(Fg&& fg, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& init,
                                  const BasicSolveConfig<Scalar>& cfg = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  cfg.validate();
  const Eigen::Index p = init.size();
  if (!init.allFinite()) throw InvalidArgument("minimize: non-finite initial point");

  BasicSolveResult<Scalar> res;
  Vec x = init, g(p);
  Scalar f = fg(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite())
    throw InvalidArgument("minimize: objective or gradient not finite at the initial point");

  std::deque<std::pair<Vec, Vec>> pairs;  // (s, y)
  std::deque<Scalar> rhos;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  auto finish = [&](bool converged, std::string msg) {
    res.x = x;
    res.value = f;
    res.grad_inf = p > 0 ? g.cwiseAbs().maxCoeff() : Scalar(0);
    res.converged = converged;
    res.message = std::move(msg);
    return res;
  };

  if (p == 0 || g.cwiseAbs().maxCoeff() <= cfg.grad_tol) return finish(true, "converged");

  Vec d(p), xt(p), gt(p);
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // Two-loop recursion.
    d = -g;
    std::vector<Scalar> alphas(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      alphas[i] = rhos[i] * pairs[i].first.dot(d);
      d -= alphas[i] * pairs[i].second;
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      d *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Scalar beta = rhos[i] * pairs[i].second.dot(d);
      d += (alphas[i] - beta) * pairs[i].first;
    }
    Scalar dphi0 = g.dot(d);
    if (!(dphi0 < 0)) {
      pairs.clear();
      rhos.clear();
      d = -g;
      dphi0 = -g.squaredNorm();
    }

    const Scalar f0 = f;
    const Scalar ftol = 8 * eps * (1 + std::abs(f0));
    auto sufficient = [&](Scalar a, Scalar fa) { return fa <= f0 + cfg.c1 * a * dphi0; };
    // Approximate Wolfe: decrease below rounding resolution, slope test only.
    auto approx_ok = [&](Scalar fa, Scalar dpa) {
      return fa <= f0 + ftol && dpa >= cfg.c2 * dphi0 && dpa <= (2 * cfg.c1 - 1) * dphi0;
    };

    Scalar a = pairs.empty() ? std::min(Scalar(1), Scalar(1) / std::sqrt(-dphi0)) : Scalar(1);
    Scalar a_prev = 0, f_prev = f0, dphi_prev = dphi0;
    bool accepted = false;
    int halvings = 0;
    Scalar fa = 0, dpa = 0;

    auto eval = [&](Scalar step) {
      xt = x + step * d;
      fa = fg(xt, gt);
      ++res.evaluations;
      if (!std::isfinite(fa) || !gt.allFinite()) {
        fa = std::numeric_limits<Scalar>::infinity();
        return false;
      }
      dpa = gt.dot(d);
      return true;
    };

    auto zoom = [&](Scalar lo, Scalar flo, Scalar dlo, Scalar hi, Scalar fhi, Scalar dhi,
                    bool hi_finite) {
      for (int j = 0; j < cfg.max_linesearch; ++j) {
        Scalar trial = std::numeric_limits<Scalar>::quiet_NaN();
        if (hi_finite) trial = detail::cubic_minimizer(lo, flo, dlo, hi, fhi, dhi);
        const Scalar lo_b = std::min(lo, hi), hi_b = std::max(lo, hi);
        const Scalar margin = Scalar(0.1) * (hi_b - lo_b);
        if (!std::isfinite(trial) || trial < lo_b + margin || trial > hi_b - margin)
          trial = (lo + hi) / 2;
        if (trial == lo || trial == hi) return false;
        const bool ok = eval(trial);
        if (ok && approx_ok(fa, dpa)) {
          a = trial;
          return true;
        }
        if (!ok || !sufficient(trial, fa) || fa >= flo) {
          hi = trial;
          fhi = fa;
          dhi = dpa;
          hi_finite = ok;
        } else {
          if (std::abs(dpa) <= -cfg.c2 * dphi0) {
            a = trial;
            return true;
          }
          if (dpa * (hi - lo) >= 0) {
            hi = lo;
            fhi = flo;
            dhi = dlo;
            hi_finite = true;
          }
          lo = trial;
          flo = fa;
          dlo = dpa;
        }
      }
      // Fall back to the best point satisfying sufficient decrease.
      if (lo > 0 && flo < f0) {
        a = lo;
        return eval(lo) && fa <= f0;
      }
      return false;
    };

    for (int ls = 0; ls < cfg.max_linesearch; ++ls) {
      if (!eval(a)) {
        if (++halvings > cfg.max_halvings) break;
        a = (a_prev + a) / 2;
        --ls;
        continue;
      }
      if (approx_ok(fa, dpa)) {
        accepted = true;
        break;
      }
      if (!sufficient(a, fa) || (ls > 0 && fa >= f_prev)) {
        accepted = zoom(a_prev, f_prev, dphi_prev, a, fa, dpa, true);
        break;
      }
      if (std::abs(dpa) <= -cfg.c2 * dphi0) {
        accepted = true;
        break;
      }
      if (dpa >= 0) {
        accepted = zoom(a, fa, dpa, a_prev, f_prev, dphi_prev, true);
        break;
      }
      a_prev = a;
      f_prev = fa;
      dphi_prev = dpa;
      a *= 2;
    }

    if (!accepted || !(fa <= f0 + ftol)) {
      if (!pairs.empty()) {
        pairs.clear();
        rhos.clear();
        continue;  // retry along steepest descent
      }
      res.iterations = iter;
      return finish(false, "line search failed");
    }

    Vec s = xt - x, y = gt - g;
    x = xt;
    g = gt;
    f = fa;
    res.iterations = iter + 1;
    if (g.cwiseAbs().maxCoeff() <= cfg.grad_tol) return finish(true, "converged");
    const Scalar sy = s.dot(y);
    if (sy > eps * y.squaredNorm()) {
      pairs.emplace_back(std::move(s), std::move(y));
      rhos.push_back(1 / sy);
      if (static_cast<int>(pairs.size()) > cfg.memory) {
        pairs.pop_front();
        rhos.pop_front();
      }
    }
  }
  return finish(false, "maximum iterations reached");
}

/// Overload taking the objective and its gradient as separate callables.
template <typename Scalar>
BasicSolveResult<Scalar> minimize(
    const std::function<Scalar(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& f,
    const std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& grad_f,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& init, const BasicSolveConfig<Scalar>& cfg = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  return minimize<Scalar>(
      [&](const Vec& x, Vec& g) {
        const Scalar v = f(x);
        if (std::isfinite(v)) g = grad_f(x);
        else g.setZero(x.size());
        return v;
      },
      init, cfg);
}

/// Value and gradient of Omega(beta) = (1/q) sum |beta_j|^q.
/// For q = 1 the pseudo-Huber form sqrt(beta^2 + mu^2) - mu replaces |beta|.
template <typename Derived>
std::pair<double, Vector> penalty_value_grad(const PenaltySpec& pen,
                                             const Eigen::MatrixBase<Derived>& beta) {
  if (!(pen.p_norm >= 1.0)) throw InvalidArgument("penalty: p_norm must be >= 1");
  const double q = pen.p_norm;
  Vector grad(beta.size());
  double value = 0.0;
  if (q == 1.0) {
    const double mu = pen.smoothing_mu;
    if (!(mu > 0.0)) throw InvalidArgument("penalty: smoothing_mu must be > 0");
    for (Index j = 0; j < beta.size(); ++j) {
      const double r = std::hypot(beta(j), mu);
      value += r - mu;
      grad(j) = beta(j) / r;
    }
  } else if (q == 2.0) {
    value = 0.5 * beta.squaredNorm();
    grad = beta;
  } else {
    for (Index j = 0; j < beta.size(); ++j) {
      const double a = std::abs(beta(j));
      value += std::pow(a, q) / q;
      grad(j) = a == 0.0 ? 0.0 : std::copysign(std::pow(a, q - 1.0), beta(j));
    }
  }
  return {value, grad};
}

}  // namespace genriesz
