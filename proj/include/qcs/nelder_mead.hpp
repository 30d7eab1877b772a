#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "qcs/error.hpp"

namespace qcs {

struct NelderMeadOptions {
  std::size_t budget = 200;   // hard cap on objective evaluations
  double initial_step = 0.5;  // simplex edge along each coordinate
  double tolerance = 1e-10;   // stop when the simplex values agree this closely
};

struct NelderMeadResult {
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

// Minimizes f with the standard reflection (1), expansion (2), contraction
// (1/2) and shrink (1/2) moves, starting from x0 plus one step along each
// axis. The first evaluation is always x0, so the result never scores worse
// than the starting point. NaN objective values count as +inf.
template <typename Objective>
NelderMeadResult nelder_mead(Objective&& f, const std::vector<double>& x0,
                             const NelderMeadOptions& options) {
  using Point = std::vector<double>;
  const std::size_t n = x0.size();
  if (options.budget == 0) throw ParameterError("nelder_mead: budget must be >= 1");

  NelderMeadResult result;
  auto exhausted = [&] { return result.evaluations >= options.budget; };
  auto eval = [&](const Point& p) {
    double v = f(p);
    ++result.evaluations;
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    if (v < result.best_value || result.best.empty()) {
      result.best_value = v;
      result.best = p;
    }
    return v;
  };

  std::vector<Point> simplex;
  std::vector<double> values;
  simplex.reserve(n + 1);
  simplex.push_back(x0);
  values.push_back(eval(x0));
  for (std::size_t i = 0; i < n && !exhausted(); ++i) {
    Point p = x0;
    p[i] += options.initial_step;
    values.push_back(eval(p));
    simplex.push_back(std::move(p));
  }
  if (simplex.size() < n + 1) return result;

  std::vector<std::size_t> order(n + 1);
  auto affine = [&](const Point& base, const Point& toward, double t) {
    Point out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + t * (toward[i] - base[i]);
    return out;
  };

  while (!exhausted()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];
    if (std::fabs(values[worst] - values[best]) <= options.tolerance) break;

    Point centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const Point& p = simplex[order[k]];
      for (std::size_t i = 0; i < n; ++i) centroid[i] += p[i] / static_cast<double>(n);
    }

    const Point reflected = affine(centroid, simplex[worst], -1.0);
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      if (exhausted()) break;
      Point expanded = affine(centroid, simplex[worst], -2.0);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = std::move(expanded);
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    if (exhausted()) break;
    const bool outside = f_reflected < values[worst];
    Point contracted = outside ? affine(centroid, reflected, 0.5) : affine(centroid, simplex[worst], 0.5);
    const double f_contracted = eval(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = std::move(contracted);
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t k = 1; k <= n && !exhausted(); ++k) {
      const std::size_t idx = order[k];
      simplex[idx] = affine(simplex[best], simplex[idx], 0.5);
      values[idx] = eval(simplex[idx]);
    }
  }
  return result;
}

}  // namespace qcs
