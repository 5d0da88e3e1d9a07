#include <cmath>

#include <gtest/gtest.h>

#include "gemb/metrics.hpp"
#include "gemb/rng.hpp"

using namespace gemb;

namespace {

// O(n^2) pair count: P(score_pos > score_neg) + P(tie) / 2.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] && !y[j]) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Precision at each distinct threshold, weighted by the recall gained there.
double brute_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> th(s);
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  double total = 0.0;
  for (int v : y) total += v;
  double ap = 0.0, prev = 0.0;
  for (double t : th) {
    double tp = 0.0, k = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        k += 1;
        tp += y[i];
      }
    ap += (tp / total - prev) * (tp / k);
    prev = tp / total;
  }
  return ap;
}

}  // namespace

TEST(RocAuc, Examples) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{1, 2, 3}, std::vector<int>{0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{1, 1, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{1, 2}, std::vector<int>{1}), std::invalid_argument);
}

TEST(AveragePrecision, Examples) {
  // Ranking pos, neg, pos: precision 1 at recall 1/2, 2/3 at recall 1.
  EXPECT_NEAR(average_precision(std::vector<double>{3, 2, 1}, std::vector<int>{1, 0, 1}), 0.5 + 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{3, 2, 1}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(std::vector<double>{5, 5, 5, 5}, std::vector<int>{1, 0, 0, 1}), 0.5);
  EXPECT_THROW(average_precision(std::vector<double>{1, 2}, std::vector<int>{0, 0}), std::invalid_argument);
}

TEST(Metrics, MatchBruteForceWithTies) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 5 + rng.below(80);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(6 * rng.uniform());  // coarse scores force ties
      y[i] = rng.uniform() < 0.4;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(s, y), brute_auc(s, y), 1e-12);
    EXPECT_NEAR(average_precision(s, y), brute_ap(s, y), 1e-12);
  }
}

TEST(Logistic, SeparableToy) {
  Eigen::MatrixXd X(8, 2);
  X << -2, -1, -1, -2, -1.5, -0.5, -0.5, -1.5, 1, 2, 2, 1, 0.5, 1.5, 1.5, 0.5;
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  const auto m = train_logistic(X, y, LogisticOptions{1e-6, 1e-8, 20000});
  const auto s = logistic_scores(m, X);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(s[i] > 0.0, y[i] == 1) << i;
  EXPECT_GT(m.iterations, 0u);
}

TEST(Logistic, GradientVanishesAtSolution) {
  Rng rng(2);
  const Eigen::Index n = 200;
  Eigen::MatrixXd X(n, 3);
  std::vector<int> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) X(i, k) = rng.normal();
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-(X(i, 0) - 0.5 * X(i, 2))));
  }
  const LogisticOptions opt{1e-3, 1e-9, 50000};
  const auto m = train_logistic(X, y, opt);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = 1.0 / (1.0 + std::exp(-m.score(X.row(i)))) - y[i];
  const Eigen::VectorXd gw = X.transpose() * r / double(n) + opt.l2 * m.weights;
  EXPECT_LT(gw.norm(), 1e-7);
  EXPECT_LT(std::abs(r.mean()), 1e-7);
}

TEST(Logistic, NoSignalGivesChanceAuc) {
  Rng rng(7);
  const Eigen::Index n = 4000;
  Eigen::MatrixXd X(n, 2);
  std::vector<int> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = rng.uniform() < 0.5;
  }
  const auto m = train_logistic(X.topRows(n / 2), std::span<const int>(y).first(n / 2));
  const auto s = logistic_scores(m, X.bottomRows(n / 2));
  EXPECT_NEAR(roc_auc(s, std::span<const int>(y).last(n / 2)), 0.5, 0.05);
}
