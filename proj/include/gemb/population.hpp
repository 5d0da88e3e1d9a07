#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gemb/formulas.hpp"
#include "gemb/optim.hpp"
#include "gemb/quadrature.hpp"
#include "gemb/risk.hpp"
#include "json.hpp"

namespace gemb {

/// Cell constants of the stepped population problem on kappa equal-width
/// cells: c_f(l, l', x) is the cell average of f_n(., ., x) (rho W)^x
/// (1 - rho W)^(1 - x) and c_g(l) the cell average of g_n.
struct DiscretizedWeights {
  std::size_t kappa = 0;
  Eigen::MatrixXd cf0;
  Eigen::MatrixXd cf1;
  Eigen::VectorXd cg;
  Eigen::VectorXd mass;  // p_l = 1 / kappa
  std::size_t nodes_per_cell = 0;
};

inline DiscretizedWeights discretize_weights(const GraphonSpec& spec, double rho, const SchemeConfig& scheme,
                                             std::size_t kappa) {
  if (kappa < 1) throw std::invalid_argument("discretize_weights: kappa must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("discretize_weights: rho must be in (0, 1]");
  validate(spec);
  const DegreeFunction deg = degree_function(spec, {scheme.alpha()});
  const SchemeFormula formula = SchemeFormula::for_scheme(scheme, deg, rho);
  const auto br = breakpoints(spec);

  // Quadrature nodes per cell, split at graphon discontinuities.
  std::vector<quad::Rule> rules(kappa);
  std::vector<std::vector<double>> wdeg(kappa), gval(kappa);
  for (std::size_t l = 0; l < kappa; ++l) {
    const double lo = double(l) / double(kappa), hi = double(l + 1) / double(kappa);
    rules[l] = quad::gauss_piecewise(lo, hi, br);
    for (double x : rules[l].x) {
      wdeg[l].push_back(formula.degree_at(x));
      gval[l].push_back(formula.vertex(x));
    }
  }

  DiscretizedWeights out;
  out.kappa = kappa;
  const auto K = static_cast<Eigen::Index>(kappa);
  out.cf0 = Eigen::MatrixXd::Zero(K, K);
  out.cf1 = Eigen::MatrixXd::Zero(K, K);
  out.cg = Eigen::VectorXd::Zero(K);
  out.mass = Eigen::VectorXd::Constant(K, 1.0 / double(kappa));
  out.nodes_per_cell = rules[0].x.size();
  const double width = 1.0 / double(kappa);

  for (std::size_t l = 0; l < kappa; ++l) {
    double g = 0.0;
    for (std::size_t i = 0; i < rules[l].x.size(); ++i) g += rules[l].w[i] * gval[l][i];
    out.cg[static_cast<Eigen::Index>(l)] = g / width;
    for (std::size_t m = l; m < kappa; ++m) {
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t i = 0; i < rules[l].x.size(); ++i) {
        for (std::size_t j = 0; j < rules[m].x.size(); ++j) {
          const double pw = rho * evaluate(spec, rules[l].x[i], rules[m].x[j]);
          const double ww = rules[l].w[i] * rules[m].w[j];
          s1 += ww * formula.edge_weight() * pw;
          s0 += ww * formula.nonedge_weight_from_degrees(wdeg[l][i], wdeg[m][j]) * (1.0 - pw);
        }
      }
      const auto a = static_cast<Eigen::Index>(l), b = static_cast<Eigen::Index>(m);
      out.cf0(a, b) = out.cf0(b, a) = s0 / (width * width);
      out.cf1(a, b) = out.cf1(b, a) = s1 / (width * width);
    }
  }
  return out;
}

/// A kernel constant on the cells of the partition. K is always populated;
/// H holds the cell embeddings when the kernel came from the factored solver.
struct StepKernel {
  std::size_t kappa = 0;
  Eigen::MatrixXd K;
  Matrix H;                 // empty for the full representation
  Eigen::VectorXd cg;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  bool factored() const { return H.size() > 0; }
  static StepKernel full(Eigen::MatrixXd k) {
    StepKernel s;
    s.kappa = static_cast<std::size_t>(k.rows());
    s.K = std::move(k);
    return s;
  }
  static StepKernel from_factor(Matrix h) {
    StepKernel s;
    s.kappa = static_cast<std::size_t>(h.rows());
    s.K = h * h.transpose();
    s.H = std::move(h);
    return s;
  }
};

namespace detail {

inline void check_kappa(const Eigen::MatrixXd& K, const DiscretizedWeights& w) {
  if (K.rows() != static_cast<Eigen::Index>(w.kappa) || K.cols() != K.rows())
    throw std::invalid_argument("kernel and weights disagree on kappa");
}

/// F(K) and, when requested, its gradient with respect to the symmetric K.
inline double population_objective(const Eigen::MatrixXd& K, const DiscretizedWeights& w, double xi,
                                   Eigen::MatrixXd* grad) {
  const auto k = K.rows();
  double value = 0.0;
  if (grad) grad->resize(k, k);
  for (Eigen::Index b = 0; b < k; ++b) {
    for (Eigen::Index a = 0; a < k; ++a) {
      const double pp = w.mass[a] * w.mass[b];
      const auto l1 = cross_entropy_with_slope(K(a, b), 1);
      const auto l0 = cross_entropy_with_slope(K(a, b), 0);
      value += pp * (w.cf1(a, b) * l1.loss + w.cf0(a, b) * l0.loss);
      if (grad) (*grad)(a, b) = pp * (w.cf1(a, b) * l1.slope + w.cf0(a, b) * l0.slope);
    }
  }
  const Eigen::VectorXd pen = w.mass.cwiseProduct(w.cg);
  value += xi * pen.dot(K.diagonal());
  if (grad) grad->diagonal() += xi * pen;
  return value;
}

/// Lipschitz constant of the gradient of F (the loss curvature is at most 1/4).
inline double population_lipschitz(const DiscretizedWeights& w) {
  const Eigen::MatrixXd pp = w.mass * w.mass.transpose();
  const double L = (pp.cwiseProduct(w.cf0 + w.cf1)).maxCoeff() / 4.0;
  return L > 0.0 ? L : 1.0;
}

}  // namespace detail

/// Projection onto the PSD cone; eigenvalues below 1e-12 are set to 0.
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& K) {
  const Eigen::MatrixXd sym = 0.5 * (K + K.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed during PSD projection");
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] < 1e-12) ev[i] = 0.0;
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// I_n[K] + xi I_n^reg[K] for a step kernel.
inline double population_value(const StepKernel& k, const DiscretizedWeights& w, double xi) {
  detail::check_kappa(k.K, w);
  return detail::population_objective(k.K, w, xi, nullptr);
}

/// The discretized I_n^reg[K] = sum_l p_l c_g(l) K(l, l).
inline double population_penalty(const Eigen::MatrixXd& K, const DiscretizedWeights& w) {
  return w.mass.cwiseProduct(w.cg).dot(K.diagonal());
}

/// Projected-gradient fixed-point residual
///   ||K - P_psd(K - s grad F(K))||_F / (1 + ||K||_F)
/// with s = 1/L. The PSD problem carries no entry bound, so `A` only enters
/// through the caller's check of whether the solution exceeds A^2.
inline double kkt_residual(const StepKernel& k, const DiscretizedWeights& w, double xi, double /*A*/) {
  detail::check_kappa(k.K, w);
  Eigen::MatrixXd grad;
  detail::population_objective(k.K, w, xi, &grad);
  const double s = 1.0 / detail::population_lipschitz(w);
  const Eigen::MatrixXd step = project_psd(k.K - s * grad);
  return (k.K - step).norm() / (1.0 + k.K.norm());
}

struct PsdOptions {
  std::size_t max_iters = 100000;
  double tol = 1e-11;  // on the scaled change between iterates
};

/// Accelerated projected gradient over the full symmetric kappa x kappa
/// matrix with adaptive momentum restart.
inline StepKernel minimize_psd(const DiscretizedWeights& w, double xi, const Eigen::MatrixXd* start = nullptr,
                               PsdOptions opt = {}) {
  if (!(xi >= 0.0)) throw std::invalid_argument("minimize_psd: xi must be >= 0");
  const auto k = static_cast<Eigen::Index>(w.kappa);
  const double s = 1.0 / detail::population_lipschitz(w);
  Eigen::MatrixXd x = start ? project_psd(*start) : Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd y = x, grad;
  double t = 1.0;
  double fx = detail::population_objective(x, w, xi, nullptr);
  StepKernel out;
  std::size_t it = 0;
  for (; it < opt.max_iters; ++it) {
    detail::population_objective(y, w, xi, &grad);
    Eigen::MatrixXd next = project_psd(y - s * grad);
    const double fn = detail::population_objective(next, w, xi, nullptr);
    if (!std::isfinite(fn)) throw NonFiniteObjective("minimize_psd: objective not finite");
    if (fn > fx) {
      // Momentum overshot: restart from a plain projected step at x.
      t = 1.0;
      detail::population_objective(x, w, xi, &grad);
      next = project_psd(x - s * grad);
      const double fp = detail::population_objective(next, w, xi, nullptr);
      const double change = (next - x).norm() / (1.0 + next.norm());
      x = std::move(next);
      y = x;
      fx = fp;
      if (change < opt.tol) {
        out.converged = true;
        break;
      }
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double change = (next - x).norm() / (1.0 + next.norm());
    y = next + ((t - 1.0) / tn) * (next - x);
    x = std::move(next);
    t = tn;
    fx = fn;
    if (change < opt.tol) {
      out.converged = true;
      break;
    }
  }
  out.kappa = w.kappa;
  out.K = std::move(x);
  out.cg = w.cg;
  out.objective = fx;
  out.iterations = it;
  return out;
}

struct FactoredOptions {
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
  std::size_t max_iters = 50000;
  double tol = 1e-13;
};

/// Projected gradient over cell embeddings H in ([-A, A]^d)^kappa; best of
/// several random starts.
inline StepKernel minimize_factored(const DiscretizedWeights& w, double xi, std::size_t d, double A,
                                    FactoredOptions opt = {}) {
  if (d < 1) throw std::invalid_argument("minimize_factored: d must be >= 1");
  if (!(A > 0.0)) throw std::invalid_argument("minimize_factored: A must be > 0");
  const auto k = static_cast<Eigen::Index>(w.kappa);
  auto f = [&](const Matrix& h, Matrix* g) {
    const Eigen::MatrixXd K = h * h.transpose();
    Eigen::MatrixXd gk;
    const double v = detail::population_objective(K, w, xi, g ? &gk : nullptr);
    if (g) *g = 2.0 * (gk * h);  // gk is symmetric
    return v;
  };
  auto project = [A](Matrix& h) { h = h.cwiseMax(-A).cwiseMin(A); };
  ProjectedGradientOptions pg;
  pg.lr = 1.0 / detail::population_lipschitz(w);
  pg.max_iters = opt.max_iters;
  pg.tol = opt.tol;

  StepKernel best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(opt.restarts, 1); ++r) {
    Rng rng(opt.seed, Stream::init, r);
    Matrix h(k, static_cast<Eigen::Index>(d));
    const double s0 = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = s0 * rng.normal();
    auto res = projected_gradient(std::move(h), f, project, pg);
    if (res.value < best.objective) {
      best = StepKernel::from_factor(std::move(res.x));
      best.objective = res.value;
      best.iterations = res.iterations;
      best.converged = res.converged;
    }
  }
  best.cg = w.cg;
  return best;
}

struct TraceSpectrum {
  double trace = 0.0;
  Eigen::VectorXd eigenvalues;  // descending
  double penalty = 0.0;         // sum_l p_l c_g(l) K(l, l), for comparison
};

/// Spectrum of M = K diag(p c_g), the discretized integral operator on
/// L^2 with measure g_n d mu; computed through the similar symmetric matrix
/// D^{1/2} K D^{1/2}.
inline TraceSpectrum kernel_trace_spectrum(const StepKernel& k, const Eigen::VectorXd& mass) {
  if (k.cg.size() != k.K.rows() || mass.size() != k.K.rows())
    throw std::invalid_argument("kernel_trace_spectrum: kernel lacks matching penalty weights");
  const Eigen::VectorXd d = mass.cwiseProduct(k.cg);
  const Eigen::VectorXd sq = d.cwiseSqrt();
  const Eigen::MatrixXd sym = sq.asDiagonal() * (0.5 * (k.K + k.K.transpose())) * sq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  TraceSpectrum out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.trace = out.eigenvalues.sum();
  out.penalty = d.dot(k.K.diagonal());
  return out;
}

inline TraceSpectrum kernel_trace_spectrum(const StepKernel& k) {
  return kernel_trace_spectrum(
      k, Eigen::VectorXd::Constant(k.K.rows(), 1.0 / static_cast<double>(std::max<Eigen::Index>(k.K.rows(), 1))));
}

/// Value of the step kernel at latent positions (x, y).
inline double kernel_at(const StepKernel& k, double x, double y) {
  auto cell = [&](double v) {
    const auto c = static_cast<Eigen::Index>(v * static_cast<double>(k.kappa));
    return std::clamp<Eigen::Index>(c, 0, static_cast<Eigen::Index>(k.kappa) - 1);
  };
  return k.K(cell(x), cell(y));
}

inline void write_kernel_csv(const StepKernel& k, std::ostream& os) {
  std::ostringstream buf;
  buf.precision(17);
  for (Eigen::Index i = 0; i < k.K.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.K.cols(); ++j) buf << (j ? "," : "") << k.K(i, j);
    buf << '\n';
  }
  os << buf.str();
}

inline nlohmann::json kernel_sidecar(const StepKernel& k, const DiscretizedWeights& w, double xi, double A) {
  const auto spec = kernel_trace_spectrum(k, w.mass);
  std::vector<double> top;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, spec.eigenvalues.size()); ++i)
    top.push_back(spec.eigenvalues[i]);
  return {
      {"kappa", k.kappa},
      {"xi", xi},
      {"objective", k.objective},
      {"residual", kkt_residual(k, w, xi, A)},
      {"trace", spec.trace},
      {"top_eigenvalues", top},
      {"max_abs_entry", k.K.cwiseAbs().maxCoeff()},
      {"exceeds_box_squared", k.K.cwiseAbs().maxCoeff() > A * A},
      {"converged", k.converged},
  };
}

}  // namespace gemb
