#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gemb::quad {

/// Composite Simpson on equally spaced samples with spacing h. An odd number
/// of intervals finishes with the 3/8 rule; a single interval is trapezoidal.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) throw std::invalid_argument("simpson: need at least 2 samples");
  const std::size_t intervals = n - 1;
  if (intervals == 1) return 0.5 * h * (f[0] + f[1]);

  std::size_t even = intervals % 2 == 0 ? intervals : intervals - 3;
  double s = 0.0;
  if (even > 0) {
    double acc = f[0] + f[even];
    for (std::size_t i = 1; i < even; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    s += acc * h / 3.0;
  }
  if (even != intervals) {
    const std::size_t j = even;
    s += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
  }
  return s;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> x(n);
  if (n == 1) {
    x[0] = lo;
    return x;
  }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
  x.back() = hi;
  return x;
}

/// 8-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 15.
struct GaussLegendre8 {
  static constexpr std::array<double, 8> nodes = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
      -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
      0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> weights = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
      0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
      0.2223810344533745, 0.1012285362903763};
};

/// Nodes and weights mapped onto [lo, hi].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

inline Rule gauss_on(double lo, double hi) {
  Rule r;
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < 8; ++i) {
    r.x.push_back(mid + half * GaussLegendre8::nodes[i]);
    r.w.push_back(half * GaussLegendre8::weights[i]);
  }
  return r;
}

/// Gauss rule on [lo, hi] that splits at every breakpoint strictly inside the
/// interval, so piecewise-polynomial integrands are integrated exactly.
inline Rule gauss_piecewise(double lo, double hi,
                            std::span<const double> breakpoints) {
  Rule out;
  double a = lo;
  auto append = [&](double l, double h) {
    if (h <= l) return;
    Rule r = gauss_on(l, h);
    out.x.insert(out.x.end(), r.x.begin(), r.x.end());
    out.w.insert(out.w.end(), r.w.begin(), r.w.end());
  };
  for (double b : breakpoints) {
    if (b > lo && b < hi) {
      append(a, b);
      a = b;
    }
  }
  append(a, hi);
  return out;
}

}  // namespace gemb::quad
