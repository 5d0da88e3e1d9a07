#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gemb/risk.hpp"

namespace gemb {

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0;
  if (pos == 0 || pos == labels.size()) throw std::invalid_argument("metric needs both classes");
}

}  // namespace detail

/// Area under the ROC curve via the rank-sum statistic; ties count one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scores(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * double(i + 1 + j);  // average 1-based rank of the tie block
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        rank_sum += mid;
        ++pos;
      }
    i = j;
  }
  const double neg = double(n - pos);
  return (rank_sum - double(pos) * double(pos + 1) / 2.0) / (double(pos) * neg);
}

/// Area under the precision-recall curve as average precision; tied scores
/// are processed as one threshold.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scores(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total_pos = 0;
  for (int y : labels) total_pos += y != 0;
  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t < j; ++t) tp += labels[order[t]] != 0;
    seen += double(j - i);
    const double recall = tp / double(total_pos);
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::size_t iterations = 0;

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return x.dot(weights) + bias; }
};

struct LogisticOptions {
  double l2 = 1e-4;
  double grad_tol = 1e-6;
  std::size_t max_iters = 5000;
};

/// l2-regularized logistic regression fitted by gradient descent with
/// backtracking on the mean log-loss.
inline LogisticModel train_logistic(const Eigen::MatrixXd& X, std::span<const int> y, LogisticOptions opt = {}) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw std::invalid_argument("features and labels differ in length");
  std::size_t pos = 0;
  for (int v : y) pos += v != 0;
  if (pos == 0 || pos == y.size()) throw std::invalid_argument("logistic regression needs both classes");
  const auto m = static_cast<double>(X.rows());
  const auto p = X.cols();
  Eigen::VectorXd lab(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) lab[i] = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  auto loss = [&](const Eigen::VectorXd& w, double b, Eigen::VectorXd* gw, double* gb) {
    const Eigen::VectorXd z = (X * w).array() + b;
    double v = 0.0;
    Eigen::VectorXd r(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto ls = cross_entropy_with_slope(z[i], lab[i] != 0.0);
      v += ls.loss;
      r[i] = ls.slope;
    }
    v = v / m + 0.5 * opt.l2 * w.squaredNorm();
    if (gw) {
      *gw = X.transpose() * r / m + opt.l2 * w;
      *gb = r.sum() / m;
    }
    return v;
  };

  LogisticModel model;
  model.weights = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gw;
  double gb = 0.0;
  double f = loss(model.weights, model.bias, &gw, &gb);
  double step = 1.0;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) < opt.grad_tol) break;
    Eigen::VectorXd w2;
    double b2 = 0.0, f2 = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      w2 = model.weights - step * gw;
      b2 = model.bias - step * gb;
      f2 = loss(w2, b2, nullptr, nullptr);
      if (f2 <= f - 0.5 * step * gnorm2) break;
      step *= 0.5;
    }
    model.weights = std::move(w2);
    model.bias = b2;
    f = loss(model.weights, model.bias, &gw, &gb);
    model.iterations = it + 1;
    step *= 2.0;
  }
  return model;
}

inline std::vector<double> logistic_scores(const LogisticModel& model, const Eigen::MatrixXd& X) {
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  const Eigen::VectorXd z = (X * model.weights).array() + model.bias;
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i];
  return out;
}

}  // namespace gemb
