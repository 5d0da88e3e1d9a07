#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gemb/quadrature.hpp"

namespace gemb {

// ---------------------------------------------------------------------------
// Graphon families

/// W(x, y) = p.
struct Constant {
  double p = 0.5;
};

/// Piecewise-constant W on an m x m grid of equal-width cells.
struct StepBlock {
  std::vector<std::vector<double>> values;

  std::size_t blocks() const { return values.size(); }
  std::size_t block_of(double x) const {
    const auto m = blocks();
    return std::min(static_cast<std::size_t>(x * static_cast<double>(m)), m - 1);
  }
  double row_mean(std::size_t r) const {
    double s = 0.0;
    for (double v : values[r]) s += v;
    return s / static_cast<double>(blocks());
  }
};

/// W(x, y) = a + b * x * y.
struct SmoothProduct {
  double a = 0.25;
  double b = 0.5;
};

using GraphonFamily = std::variant<Constant, StepBlock, SmoothProduct>;

/// rho_n = scale * (log n / n)^gamma; gamma = 0 gives a constant schedule.
struct Sparsity {
  double scale = 1.0;
  double gamma = 0.0;

  double rho(std::size_t n) const {
    if (gamma == 0.0) return scale;
    const double nn = static_cast<double>(n);
    return scale * std::pow(std::log(nn) / nn, gamma);
  }
};

/// Smoothness metadata (reported, not enforced).
struct Holder {
  double beta = 1.0;
  double L = 1.0;
};

struct GraphonSpec {
  GraphonFamily family = Constant{};
  Sparsity sparsity{};
  Holder holder{};
};

struct GraphonBounds {
  double lower;
  double upper;
};

inline double evaluate(const GraphonSpec& spec, double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw std::out_of_range("graphon coordinates must lie in [0, 1]");
  }
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return f.p;
        } else if constexpr (std::is_same_v<T, StepBlock>) {
          return f.values[f.block_of(x)][f.block_of(y)];
        } else {
          return f.a + f.b * (x * y);
        }
      },
      spec.family);
}

/// Interior discontinuities of W along either axis.
inline std::vector<double> breakpoints(const GraphonSpec& spec) {
  std::vector<double> b;
  if (const auto* s = std::get_if<StepBlock>(&spec.family)) {
    for (std::size_t i = 1; i < s->blocks(); ++i)
      b.push_back(static_cast<double>(i) / static_cast<double>(s->blocks()));
  }
  return b;
}

inline bool has_closed_form(const GraphonSpec& spec) {
  return !std::holds_alternative<SmoothProduct>(spec.family);
}

/// Exact for Constant/StepBlock, dense-grid search for smooth families.
inline GraphonBounds bounds(const GraphonSpec& spec) {
  return std::visit(
      [&](const auto& f) -> GraphonBounds {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return {f.p, f.p};
        } else if constexpr (std::is_same_v<T, StepBlock>) {
          GraphonBounds out{1e300, -1e300};
          for (const auto& row : f.values)
            for (double v : row) {
              out.lower = std::min(out.lower, v);
              out.upper = std::max(out.upper, v);
            }
          return out;
        } else {
          constexpr std::size_t grid = 257;
          GraphonBounds out{1e300, -1e300};
          for (std::size_t i = 0; i < grid; ++i)
            for (std::size_t j = 0; j < grid; ++j) {
              const double v = evaluate(spec, i / double(grid - 1), j / double(grid - 1));
              out.lower = std::min(out.lower, v);
              out.upper = std::max(out.upper, v);
            }
          return out;
        }
      },
      spec.family);
}

/// Every violated invariant of the spec, empty when valid.
inline std::vector<std::string> validation_errors(const GraphonSpec& spec) {
  std::vector<std::string> errs;
  if (const auto* s = std::get_if<StepBlock>(&spec.family)) {
    const auto m = s->blocks();
    if (m == 0) errs.emplace_back("step block matrix is empty");
    for (const auto& row : s->values)
      if (row.size() != m) {
        errs.emplace_back("step block matrix must be square");
        break;
      }
    if (errs.empty()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j)
          if (s->values[i][j] != s->values[j][i]) {
            errs.emplace_back("step block matrix must be symmetric");
            i = m;
            break;
          }
    }
  }
  if (errs.empty()) {
    const auto b = bounds(spec);
    if (!(b.lower > 0.0)) errs.emplace_back("graphon must be bounded below by C > 0");
    if (!(b.upper < 1.0)) errs.emplace_back("graphon must be bounded above by C' < 1");
  }
  const auto& sp = spec.sparsity;
  if (!(sp.scale > 0.0 && sp.scale <= 1.0))
    errs.emplace_back("sparsity scale must lie in (0, 1]");
  if (!(sp.gamma >= 0.0 && sp.gamma < 1.0))
    errs.emplace_back("sparsity exponent gamma must lie in [0, 1)");
  if (!(spec.holder.beta > 0.0 && spec.holder.beta <= 1.0))
    errs.emplace_back("holder exponent must lie in (0, 1]");
  if (!(spec.holder.L >= 0.0)) errs.emplace_back("holder constant must be >= 0");
  return errs;
}

/// Validation including the n-dependent requirement rho_n * C' < 1.
inline std::vector<std::string> validation_errors(const GraphonSpec& spec, std::size_t n) {
  auto errs = validation_errors(spec);
  if (errs.empty()) {
    const double rho = spec.sparsity.rho(n);
    if (!(rho > 0.0 && rho <= 1.0))
      errs.emplace_back("rho_n = " + std::to_string(rho) + " must lie in (0, 1]");
    if (!(rho * bounds(spec).upper < 1.0))
      errs.emplace_back("rho_n * W must stay below 1");
  }
  return errs;
}

inline void validate(const GraphonSpec& spec) {
  auto errs = validation_errors(spec);
  if (!errs.empty()) throw std::invalid_argument("invalid graphon: " + errs.front());
}

inline void validate(const GraphonSpec& spec, std::size_t n) {
  auto errs = validation_errors(spec, n);
  if (!errs.empty()) throw std::invalid_argument("invalid graphon: " + errs.front());
}

// ---------------------------------------------------------------------------
// Degree function W(lambda, .) and its moments E_W(alpha)

enum class Integration { automatic, quadrature };

/// W(lambda, .) = \int_0^1 W(lambda, x) dx tabulated on quadrature nodes,
/// piecewise over the graphon's discontinuities.
class DegreeFunction {
 public:
  struct Piece {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> x;
    std::vector<double> values;
  };

  DegreeFunction() = default;

  DegreeFunction(GraphonSpec spec, std::size_t quadrature_points,
                 Integration mode = Integration::automatic)
      : spec_(std::move(spec)),
        exact_(mode == Integration::automatic && has_closed_form(spec_)),
        nodes_(quadrature_points) {
    if (quadrature_points < 2)
      throw std::invalid_argument("degree_function: need at least 2 quadrature points");
    auto br = breakpoints(spec_);
    std::vector<double> edges{0.0};
    edges.insert(edges.end(), br.begin(), br.end());
    edges.push_back(1.0);
    const std::size_t npieces = edges.size() - 1;
    const std::size_t per_piece =
        std::max<std::size_t>(br.empty() ? 2 : 3, quadrature_points / npieces);
    pieces_.reserve(npieces);
    for (std::size_t p = 0; p < npieces; ++p) {
      Piece piece{edges[p], edges[p + 1], quad::linspace(edges[p], edges[p + 1], per_piece), {}};
      piece.values.reserve(per_piece);
      for (double lam : piece.x) {
        piece.values.push_back(exact_ ? closed_form(inside(lam, piece)) : integrate_row(inside(lam, piece)));
      }
      pieces_.push_back(std::move(piece));
    }
  }

  const GraphonSpec& spec() const { return spec_; }
  bool exact() const { return exact_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  /// W(lambda, .); closed form when exact, otherwise linear interpolation
  /// within the quadrature piece containing lambda.
  double at(double lambda) const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw std::out_of_range("degree function argument must lie in [0, 1]");
    if (exact_) return closed_form(lambda);
    const Piece& p = piece_of(lambda);
    auto it = std::upper_bound(p.x.begin(), p.x.end(), lambda);
    if (it == p.x.begin()) return p.values.front();
    if (it == p.x.end()) return p.values.back();
    const auto j = static_cast<std::size_t>(it - p.x.begin());
    const double t = (lambda - p.x[j - 1]) / (p.x[j] - p.x[j - 1]);
    return (1.0 - t) * p.values[j - 1] + t * p.values[j];
  }

  /// E_W(alpha) = \int_0^1 W(lambda, .)^alpha d lambda.
  double moment(double alpha) const {
    for (const auto& [a, v] : moments_)
      if (a == alpha) return v;
    return compute_moment(alpha);
  }

  double mean() const { return moment(1.0); }

  void cache_moment(double alpha) {
    for (const auto& m : moments_)
      if (m.first == alpha) return;
    moments_.emplace_back(alpha, compute_moment(alpha));
  }

  const std::vector<std::pair<double, double>>& cached_moments() const { return moments_; }

 private:
  const Piece& piece_of(double lambda) const {
    for (const auto& p : pieces_)
      if (lambda <= p.hi) return p;
    return pieces_.back();
  }

  // Nudges piece endpoints inward so step families report one-sided values.
  double inside(double x, const Piece& p) const {
    if (pieces_.size() <= 1 && p.lo == 0.0 && p.hi == 1.0) return x;
    const double eps = 1e-12 * (p.hi - p.lo);
    return std::clamp(x, p.lo + eps, p.hi - eps);
  }

  double closed_form(double lambda) const {
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return f.p;
          } else if constexpr (std::is_same_v<T, StepBlock>) {
            return f.row_mean(f.block_of(lambda));
          } else {
            return f.a + 0.5 * f.b * lambda;
          }
        },
        spec_.family);
  }

  double integrate_row(double lambda) const {
    auto br = breakpoints(spec_);
    std::vector<double> edges{0.0};
    edges.insert(edges.end(), br.begin(), br.end());
    edges.push_back(1.0);
    const std::size_t per_piece = std::max<std::size_t>(3, nodes_ / (edges.size() - 1));
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const auto xs = quad::linspace(edges[p], edges[p + 1], per_piece);
      std::vector<double> f(xs.size());
      const double eps = br.empty() ? 0.0 : 1e-12 * (edges[p + 1] - edges[p]);
      for (std::size_t i = 0; i < xs.size(); ++i)
        f[i] = evaluate(spec_, lambda, std::clamp(xs[i], edges[p] + eps, edges[p + 1] - eps));
      total += quad::simpson(f, (edges[p + 1] - edges[p]) / double(per_piece - 1));
    }
    return total;
  }

  double compute_moment(double alpha) const {
    if (exact_) {
      return std::visit(
          [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Constant>) {
              return std::pow(f.p, alpha);
            } else if constexpr (std::is_same_v<T, StepBlock>) {
              double s = 0.0;
              for (std::size_t r = 0; r < f.blocks(); ++r) s += std::pow(f.row_mean(r), alpha);
              return s / static_cast<double>(f.blocks());
            } else {
              return 0.0;  // unreachable: smooth families are never exact
            }
          },
          spec_.family);
    }
    double total = 0.0;
    for (const auto& p : pieces_) {
      std::vector<double> f(p.values.size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::pow(p.values[i], alpha);
      total += quad::simpson(f, (p.hi - p.lo) / double(f.size() - 1));
    }
    return total;
  }

  GraphonSpec spec_;
  bool exact_ = false;
  std::size_t nodes_ = 1025;
  std::vector<Piece> pieces_;
  std::vector<std::pair<double, double>> moments_;
};

inline constexpr std::size_t kDefaultQuadraturePoints = 1025;

/// W(lambda, .) tabulated with E_W(alpha) cached for each requested alpha.
inline DegreeFunction degree_function(const GraphonSpec& spec, const std::vector<double>& alphas,
                                      std::size_t quadrature_points = kDefaultQuadraturePoints,
                                      Integration mode = Integration::automatic) {
  validate(spec);
  DegreeFunction deg(spec, quadrature_points, mode);
  deg.cache_moment(1.0);
  for (double a : alphas) deg.cache_moment(a);
  return deg;
}

}  // namespace gemb
