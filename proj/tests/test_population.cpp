#include <cmath>

#include <gtest/gtest.h>

#include "gemb/population.hpp"

using namespace gemb;

namespace {

GraphonSpec constant(double p) { return GraphonSpec{Constant{p}, {}, {}}; }
GraphonSpec smooth(double a, double b) { return GraphonSpec{SmoothProduct{a, b}, {}, {}}; }
const SchemeConfig kUv2{UniformVertex{2}, {}};

double logit(double p) { return std::log(p / (1 - p)); }

Eigen::MatrixXd random_psd(Eigen::Index k, Rng& rng, Eigen::Index rank = -1) {
  if (rank < 0) rank = k;
  Eigen::MatrixXd h(k, rank);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  return h * h.transpose() / double(rank);
}

}  // namespace

TEST(Discretize, ConstantUniformVertex) {
  const double p = 0.3, rho = 0.5;
  const auto w = discretize_weights(constant(p), rho, SchemeConfig{UniformVertex{4}, {}}, 4);
  ASSERT_EQ(w.kappa, 4u);
  EXPECT_NEAR((w.cf1.array() - 12 * rho * p).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((w.cf0.array() - 12 * (1 - rho * p)).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((w.cg.array() - 4.0).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(w.mass.sum(), 1.0, 1e-15);
  EXPECT_THROW(discretize_weights(constant(p), rho, kUv2, 0), std::invalid_argument);
}

TEST(Discretize, SingleCellIsGlobalAverage) {
  const auto spec = smooth(0.2, 0.6);
  const SchemeConfig sc{RandomWalk{5, 5, 0.75}, {}};
  const auto w = discretize_weights(spec, 1.0, sc, 1);
  const auto deg = degree_function(spec, {0.75});
  const auto f = SchemeFormula::for_scheme(sc, deg, 1.0);
  // Midpoint-rule oracle on a fine grid.
  const int m = 600;
  double g = 0.0, c1 = 0.0, c0 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    g += f.vertex(x);
    for (int j = 0; j < m; ++j) {
      const double y = (j + 0.5) / m, W = evaluate(spec, x, y);
      c1 += f.pair(x, y, 1) * W;
      c0 += f.pair(x, y, 0) * (1 - W);
    }
  }
  EXPECT_NEAR(w.cg[0], g / m, 1e-5 * w.cg[0]);
  EXPECT_NEAR(w.cf1(0, 0), c1 / (m * m), 1e-5 * w.cf1(0, 0));
  EXPECT_NEAR(w.cf0(0, 0), c0 / (m * m), 1e-5 * w.cf0(0, 0));
}

TEST(Discretize, RefinementRatioNearTwo) {
  const auto spec = smooth(0.1, 0.8);
  const SchemeConfig sc{UniformEdge{5, 5, 1.0}, {}};
  auto deviation = [&](std::size_t k) {
    const auto a = discretize_weights(spec, 1.0, sc, k), b = discretize_weights(spec, 1.0, sc, 2 * k);
    double dev = 0.0;
    for (Eigen::Index i = 0; i < Eigen::Index(k); ++i) {
      dev = std::max(dev, std::abs(a.cg[i] - b.cg[2 * i]));
      for (Eigen::Index j = 0; j < Eigen::Index(k); ++j) {
        dev = std::max(dev, std::abs(a.cf1(i, j) - b.cf1(2 * i, 2 * j)));
        dev = std::max(dev, std::abs(a.cf0(i, j) - b.cf0(2 * i, 2 * j)));
      }
    }
    return dev;
  };
  const double r = deviation(32) / deviation(64);
  EXPECT_GT(r, 1.8);
  EXPECT_LT(r, 2.2);
}

TEST(MinimizePsd, ScalarOracles) {
  const auto w = discretize_weights(constant(0.8), 1.0, kUv2, 8);
  const auto k0 = minimize_psd(w, 0.0);
  EXPECT_NEAR((k0.K.array() - logit(0.8)).abs().maxCoeff(), 0.0, 1e-4);
  EXPECT_NEAR(logit(0.8), 1.3863, 1e-4);
  // sigma(y) = (a - xi c_g) / (a + b) with a = 1.6, b = 0.4, c_g = 2.
  const auto k1 = minimize_psd(w, 0.1);
  EXPECT_NEAR((k1.K.array() - logit(0.7)).abs().maxCoeff(), 0.0, 1e-4);
  EXPECT_NEAR(logit(0.7), 0.8473, 1e-4);
  EXPECT_LE(kkt_residual(k0, w, 0.0, 10.0), 1e-5);
  EXPECT_LE(kkt_residual(k1, w, 0.1, 10.0), 1e-5);
}

TEST(MinimizePsd, BoundaryAtHalf) {
  const auto w = discretize_weights(constant(0.5), 1.0, kUv2, 4);
  const auto k = minimize_psd(w, 0.0);
  EXPECT_LT(k.K.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(k.objective, 2 * std::log(2.0), 1e-10);
}

TEST(MinimizePsd, HugePenaltyGivesZero) {
  const auto w = discretize_weights(smooth(0.2, 0.6), 1.0, SchemeConfig{RandomWalk{5, 5, 1.0}, {}}, 6);
  const auto k = minimize_psd(w, 1e6);
  EXPECT_EQ(k.K.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE(kkt_residual(StepKernel::full(Eigen::MatrixXd::Zero(6, 6)), w, 1e6, 10.0), 1e-8);
}

TEST(MinimizePsd, UniqueFromDifferentStarts) {
  const auto w = discretize_weights(smooth(0.2, 0.7), 1.0, SchemeConfig{UniformEdge{5, 5, 1.0}, {}}, 8);
  Rng rng(3);
  const Eigen::MatrixXd s1 = 5 * random_psd(8, rng), s2 = random_psd(8, rng, 2);
  const auto a = minimize_psd(w, 0.05, &s1), b = minimize_psd(w, 0.05, &s2);
  EXPECT_LE((a.K - b.K).norm(), 1e-4);
}

TEST(MinimizePsd, NonOptimalPointHasLargeResidual) {
  const auto w = discretize_weights(smooth(0.2, 0.7), 1.0, kUv2, 6);
  Rng rng(9);
  EXPECT_GT(kkt_residual(StepKernel::full(3 * random_psd(6, rng)), w, 0.0, 10.0), 1e-2);
}

TEST(MinimizeFactored, ScalarOracles) {
  const auto w = discretize_weights(constant(0.8), 1.0, kUv2, 8);
  const auto k0 = minimize_factored(w, 0.0, 1, 10.0);
  EXPECT_TRUE(k0.factored());
  EXPECT_NEAR((k0.K.array() - logit(0.8)).abs().maxCoeff(), 0.0, 1e-3);
  const auto k1 = minimize_factored(w, 0.1, 1, 10.0);
  EXPECT_NEAR((k1.K.array() - logit(0.7)).abs().maxCoeff(), 0.0, 1e-3);
}

TEST(MinimizeFactored, AgreesWithPsdAtFullRank) {
  Rng pick(4);
  for (int t = 0; t < 3; ++t) {
    const double a = 0.05 + 0.2 * pick.uniform(), b = 0.3 + 0.5 * pick.uniform();
    const auto w = discretize_weights(smooth(a, b), 1.0, SchemeConfig{RandomWalk{5, 5, 1.0}, {}}, 6);
    const double xi = 0.02 * t;
    const auto p = minimize_psd(w, xi);
    const auto f = minimize_factored(w, xi, 6, 10.0, FactoredOptions{3, std::uint64_t(t)});
    EXPECT_NEAR(f.objective, p.objective, 1e-6) << a << " " << b;
    EXPECT_LE((f.K - p.K).norm(), 1e-3) << a << " " << b;
  }
}

TEST(PopulationValue, ZeroKernel) {
  const auto w = discretize_weights(smooth(0.3, 0.5), 1.0, SchemeConfig{UniformEdge{3, 2, 1.0}, {}}, 5);
  const Eigen::MatrixXd pp = w.mass * w.mass.transpose();
  const double expect = pp.cwiseProduct(w.cf0 + w.cf1).sum() * std::log(2.0);
  EXPECT_NEAR(population_value(StepKernel::full(Eigen::MatrixXd::Zero(5, 5)), w, 0.7), expect, 1e-13);
}

TEST(PopulationValue, SingleRowPenalty) {
  const auto w = discretize_weights(smooth(0.3, 0.5), 1.0, SchemeConfig{RandomWalk{3, 2, 1.0}, {}}, 4);
  Matrix h = Matrix::Zero(4, 3);
  h.row(1) << 0.5, -1.0, 2.0;
  const auto k = StepKernel::from_factor(h);
  EXPECT_NEAR(population_penalty(k.K, w), w.mass[1] * w.cg[1] * 5.25, 1e-14);
  const double v0 = population_value(k, w, 0.0);
  EXPECT_NEAR(population_value(k, w, 0.3) - v0, 0.3 * w.mass[1] * w.cg[1] * 5.25, 1e-12);
}

TEST(PopulationValue, MatchesDirectQuadratureForStepKernel) {
  // Step graphon on aligned cells: the weighted integrand is constant per cell.
  const GraphonSpec spec{StepBlock{{{0.6, 0.2}, {0.2, 0.4}}}, {}, {}};
  const SchemeConfig sc{RandomWalk{5, 4, 1.0}, {}};
  const auto w = discretize_weights(spec, 1.0, sc, 4);
  Rng rng(6);
  const Eigen::MatrixXd K = random_psd(4, rng);
  const double xi = 0.2;
  const auto f = SchemeFormula::for_scheme(sc, degree_function(spec, {1.0}), 1.0);
  const int m = 64;
  double pairs = 0.0, pen = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    pen += f.vertex(x) * K(i * 4 / m, i * 4 / m);
    for (int j = 0; j < m; ++j) {
      const double y = (j + 0.5) / m, W = evaluate(spec, x, y), kv = K(i * 4 / m, j * 4 / m);
      pairs += f.pair(x, y, 1) * W * cross_entropy(kv, 1) + f.pair(x, y, 0) * (1 - W) * cross_entropy(kv, 0);
    }
  }
  const double direct = pairs / (m * m) + xi * pen / m;
  EXPECT_NEAR(population_value(StepKernel::full(K), w, xi), direct, 1e-12 * direct);
}

TEST(TraceSpectrum, ConstantKernel) {
  auto k = StepKernel::full(Eigen::MatrixXd::Constant(5, 5, 0.7));
  k.cg = Eigen::VectorXd::Constant(5, 3.0);
  const auto s = kernel_trace_spectrum(k);
  EXPECT_NEAR(s.eigenvalues[0], 2.1, 1e-12);
  EXPECT_LT(s.eigenvalues.tail(4).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(s.trace, 2.1, 1e-12);

  auto z = StepKernel::full(Eigen::MatrixXd::Zero(3, 3));
  z.cg = Eigen::VectorXd::Ones(3);
  EXPECT_EQ(kernel_trace_spectrum(z).eigenvalues.cwiseAbs().maxCoeff(), 0.0);
}

TEST(TraceSpectrum, RandomPsdKernel) {
  const auto w = discretize_weights(smooth(0.2, 0.6), 1.0, SchemeConfig{RandomWalk{5, 5, 1.0}, {}}, 7);
  Rng rng(8);
  auto k = StepKernel::full(random_psd(7, rng, 3));
  k.cg = w.cg;
  const auto s = kernel_trace_spectrum(k, w.mass);
  EXPECT_GE(s.eigenvalues.minCoeff(), -1e-8);
  EXPECT_NEAR(s.trace, s.penalty, 1e-8 * s.penalty);
  EXPECT_NEAR(s.penalty, population_penalty(k.K, w), 1e-12);
  // Same eigenvalues as the non-symmetric operator K diag(p c_g).
  const Eigen::MatrixXd M = k.K * w.mass.cwiseProduct(w.cg).asDiagonal();
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  Eigen::VectorXd ev = es.eigenvalues().real();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  EXPECT_LT((ev - s.eigenvalues).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Population, PenaltyLinearOnCone) {
  const auto w = discretize_weights(smooth(0.2, 0.6), 1.0, SchemeConfig{UniformEdge{4, 3, 0.75}, {}}, 6);
  Rng rng(2);
  const Eigen::MatrixXd a = random_psd(6, rng), b = random_psd(6, rng, 2);
  const double lhs = population_penalty(0.3 * a + 2.5 * b, w);
  const double rhs = 0.3 * population_penalty(a, w) + 2.5 * population_penalty(b, w);
  EXPECT_NEAR(lhs, rhs, 1e-13 * std::abs(rhs));
}

TEST(Population, TraceShrinksWithPenalty) {
  const auto w = discretize_weights(smooth(0.1, 0.8), 1.0, SchemeConfig{UniformVertex{3}, {}}, 8);
  double last = INFINITY;
  bool hit_zero = false;
  for (double xi : {0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
    const auto k = minimize_psd(w, xi);
    const double tr = population_penalty(k.K, w);
    if (hit_zero) {
      EXPECT_LT(tr, 1e-8);
    } else {
      EXPECT_LT(tr, last) << xi;
    }
    hit_zero = tr < 1e-8;
    last = tr;
  }
  EXPECT_TRUE(hit_zero);
}

TEST(Population, KernelAtAndSidecar) {
  Eigen::MatrixXd K(2, 2);
  K << 1, 2, 2, 5;
  auto k = StepKernel::full(K);
  EXPECT_EQ(kernel_at(k, 0.1, 0.9), 2.0);
  EXPECT_EQ(kernel_at(k, 1.0, 1.0), 5.0);
  const auto w = discretize_weights(constant(0.5), 1.0, kUv2, 2);
  k.cg = w.cg;
  const auto j = kernel_sidecar(k, w, 0.0, 2.0);
  EXPECT_EQ(j.at("kappa"), 2);
  EXPECT_TRUE(j.at("exceeds_box_squared").get<bool>());
}
