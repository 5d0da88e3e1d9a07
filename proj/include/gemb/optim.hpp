#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace gemb {

class NonFiniteObjective : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProjectedGradientOptions {
  double lr = 1.0;                // initial step
  std::size_t max_iters = 20000;
  double tol = 1e-9;              // relative decrease regarded as stalled
  std::size_t patience = 10;      // consecutive stalled iterations before stopping
  std::size_t max_backtracks = 60;
  bool barzilai_borwein = true;
};

template <class M>
struct ProjectedGradientResult {
  M x;
  double value = 0.0;
  std::vector<double> trace;  // objective after each accepted step, non-increasing
  std::size_t iterations = 0;
  bool converged = false;
};

/// Monotone projected gradient descent.
///
/// Each trial step is projected and accepted only if the objective does not
/// increase; otherwise the step is halved (up to max_backtracks times). Step
/// lengths come from the Barzilai-Borwein rule when enabled.
///
/// `f(x, grad*)` returns the objective and writes the gradient when grad is
/// non-null; `project(x)` maps x onto the feasible set in place.
template <class M, class Objective, class Projection>
ProjectedGradientResult<M> projected_gradient(M x, Objective&& f, Projection&& project,
                                              const ProjectedGradientOptions& opt) {
  ProjectedGradientResult<M> out;
  project(x);
  M grad;
  double fx = f(x, &grad);
  if (!std::isfinite(fx)) throw NonFiniteObjective("objective is not finite at the starting point");
  out.trace.push_back(fx);

  double step = opt.lr;
  std::size_t stalled = 0;
  M trial, trial_grad;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    bool accepted = false;
    double ft = fx;
    for (std::size_t bt = 0; bt <= opt.max_backtracks; ++bt) {
      trial = x - step * grad;
      project(trial);
      ft = f(trial, &trial_grad);
      if (std::isfinite(ft) && ft <= fx) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(ft))
        throw NonFiniteObjective("objective not finite after backtracking; learning rate too large");
      out.converged = true;  // no descent available at this resolution
      break;
    }

    const M s = trial - x;
    const double ss = s.squaredNorm();
    if (opt.barzilai_borwein) {
      const double sy = (s.array() * (trial_grad - grad).array()).sum();
      step = (sy > 0.0 && ss > 0.0) ? ss / sy : 2.0 * step;
      step = std::min(std::max(step, 1e-20), 1e20);
    }
    const double rel = (fx - ft) / std::max(std::abs(fx), std::numeric_limits<double>::min());
    x.swap(trial);
    grad.swap(trial_grad);
    fx = ft;
    out.trace.push_back(fx);
    ++out.iterations;

    stalled = rel < opt.tol ? stalled + 1 : 0;
    if (stalled >= opt.patience || ss == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.value = fx;
  return out;
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Dense Adam state for a parameter matrix.
template <class M>
class Adam {
 public:
  Adam(Eigen::Index rows, Eigen::Index cols, AdamOptions opt)
      : opt_(opt), m_(M::Zero(rows, cols)), v_(M::Zero(rows, cols)) {}

  void step(M& params, const M& grad) {
    ++t_;
    m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grad;
    v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    params.array() -= opt_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.eps);
  }

  std::size_t steps() const { return t_; }

 private:
  AdamOptions opt_;
  M m_;
  M v_;
  std::size_t t_ = 0;
};

}  // namespace gemb
