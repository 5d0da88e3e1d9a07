#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "gemb/formulas.hpp"
#include "gemb/graph.hpp"
#include "gemb/sampler.hpp"

namespace gemb {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// log(1 + e^y) without overflow.
inline double softplus(double y) {
  return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y));
}

inline double sigmoid(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

/// l(y, x) = -x log sigma(y) - (1 - x) log(1 - sigma(y)).
inline double cross_entropy(double y, int x) { return x ? softplus(-y) : softplus(y); }

/// Loss and its derivative sigma(y) - x from one exp and one log1p.
struct LossAndSlope {
  double loss;
  double slope;
};

inline LossAndSlope cross_entropy_with_slope(double y, int x) {
  const double t = std::exp(-std::abs(y));
  const double lp = std::log1p(t);
  const double sig = y >= 0.0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
  const double sp_pos = std::max(y, 0.0) + lp;    // softplus(y)
  const double sp_neg = std::max(-y, 0.0) + lp;   // softplus(-y)
  return x ? LossAndSlope{sp_neg, sig - 1.0} : LossAndSlope{sp_pos, sig};
}

/// Rows omega_i in R^d with every coordinate in [-A, A].
struct EmbeddingMatrix {
  Matrix rows;
  double box = 10.0;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t d, double box_bound)
      : rows(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))), box(box_bound) {}
  EmbeddingMatrix(Matrix r, double box_bound) : rows(std::move(r)), box(box_bound) {}

  std::size_t n() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(rows.cols()); }

  void clip() { rows = rows.cwiseMax(-box).cwiseMin(box); }
  bool in_box() const { return rows.size() == 0 || rows.cwiseAbs().maxCoeff() <= box; }
};

enum class Normalization { per_graph, raw };

struct RiskConfig {
  double xi = 0.0;
  Normalization normalization = Normalization::per_graph;
};

struct LossEval {
  double value = 0.0;
  Matrix gradient;
};

/// Adds the subsample loss gradient into `grad` (n x d) and returns the loss:
/// sum of pair cross-entropies plus xi * sum over V(P u N) of squared row norms.
inline double add_stochastic_loss(const EmbeddingMatrix& emb, const Subsample& s, const RiskConfig& cfg,
                                  Matrix& grad) {
  const auto n = static_cast<Vertex>(emb.n());
  double value = 0.0;
  std::vector<Vertex> touched;
  auto accumulate = [&](const std::vector<Pair>& pairs, int x) {
    for (const auto& p : pairs) {
      if (p.u >= n || p.v >= n) throw std::out_of_range("subsample vertex outside embedding");
      const double y = emb.rows.row(p.u).dot(emb.rows.row(p.v));
      const auto ls = cross_entropy_with_slope(y, x);
      value += ls.loss;
      grad.row(p.u) += ls.slope * emb.rows.row(p.v);
      grad.row(p.v) += ls.slope * emb.rows.row(p.u);
      touched.push_back(p.u);
      touched.push_back(p.v);
    }
  };
  accumulate(s.positives, 1);
  accumulate(s.negatives, 0);
  if (cfg.xi != 0.0) {
    detail::sort_unique(touched);
    for (Vertex i : touched) {
      value += cfg.xi * emb.rows.row(i).squaredNorm();
      grad.row(i) += 2.0 * cfg.xi * emb.rows.row(i);
    }
  }
  return value;
}

inline LossEval stochastic_loss(const EmbeddingMatrix& emb, const Subsample& s, const RiskConfig& cfg) {
  LossEval out;
  out.gradient = Matrix::Zero(emb.rows.rows(), emb.rows.cols());
  out.value = add_stochastic_loss(emb, s, cfg, out.gradient);
  return out;
}

/// The weighted empirical risk
///   (1/n^2) sum_{i != j} f_ij l(<w_i, w_j>, a_ij) + (xi/n) sum_i g_i |w_i|^2
/// prepared for repeated evaluation during training. Pair weights are
/// precomputed densely for n <= 4000 and evaluated lazily beyond that, in which
/// case the graph must outlive the objective.
class EmpiricalObjective {
 public:
  EmpiricalObjective(const RiskWeights& w, const LatentGraph& g, const RiskConfig& cfg)
      : n_(g.n()), xi_(cfg.xi) {
    if (w.n() != g.n()) throw std::invalid_argument("empirical risk: weights and graph disagree on n");
    if (cfg.xi < 0.0) throw std::invalid_argument("empirical risk: xi must be >= 0");
    const auto nn = static_cast<double>(n_);
    const double pair_scale = cfg.normalization == Normalization::per_graph ? 1.0 / (nn * nn) : 1.0;
    const double vertex_scale = cfg.normalization == Normalization::per_graph ? 1.0 / nn : 1.0;
    pair_scale_ = pair_scale;
    if (n_ <= RiskWeights::kDenseLimit) {
      weights_ = w.dense(g) * pair_scale;
      labels_ = Eigen::MatrixXd::Zero(weights_.rows(), weights_.cols());
      for (Vertex i = 0; i < n_; ++i)
        for (Vertex j : g.neighbors(i)) labels_(i, j) = 1.0;
    } else {
      lazy_weights_ = w;
      graph_ = &g;
    }
    penalty_.resize(static_cast<Eigen::Index>(n_));
    for (Vertex i = 0; i < n_; ++i) penalty_[i] = w.vertex_weight(i) * vertex_scale;
  }

  std::size_t n() const { return n_; }
  double xi() const { return xi_; }
  void set_xi(double xi) { xi_ = xi; }
  const Eigen::VectorXd& penalty_weights() const { return penalty_; }

  /// Value, with the gradient written to *grad when non-null.
  double operator()(const Matrix& omega, Matrix* grad) const {
    if (static_cast<std::size_t>(omega.rows()) != n_)
      throw std::invalid_argument("empirical risk: embedding row count mismatch");
    const auto N = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd gram = omega * omega.transpose();
    double value = 0.0;
    Eigen::MatrixXd slope;
    if (grad) slope.resize(N, N);
    if (!graph_) {
      // Column-wise array form so exp and log vectorize; t lies in (0, 1], where
      // log(1 + t) is as accurate as log1p in absolute terms.
      if (grad) slope.setZero();
      Eigen::ArrayXd t, lp, sig;
      for (Eigen::Index j = 0; j + 1 < N; ++j) {
        const Eigen::Index m = N - j - 1;
        const auto y = gram.col(j).tail(m).array();
        const auto x = labels_.col(j).tail(m).array();
        const auto w = weights_.col(j).tail(m).array();
        t = (-y.abs()).exp();
        lp = (1.0 + t).log();
        value += (w * (x * ((-y).max(0.0) + lp) + (1.0 - x) * (y.max(0.0) + lp))).sum();
        if (grad) {
          sig = (y >= 0.0).select(Eigen::ArrayXd::Ones(m), t) / (1.0 + t);
          slope.col(j).tail(m) = (w * (sig - x)).matrix();
        }
      }
      value *= 2.0;
      value += xi_ * (penalty_.array() * omega.rowwise().squaredNorm().array()).sum();
      if (grad) {
        *grad = 2.0 * (slope.selfadjointView<Eigen::Lower>() * omega);
        grad->array() += (2.0 * xi_) * (omega.array().colwise() * penalty_.array());
      }
      return value;
    }
    for (Eigen::Index j = 0; j < N; ++j) {
      if (grad) slope(j, j) = 0.0;
      for (Eigen::Index i = j + 1; i < N; ++i) {
        const auto vi = static_cast<Vertex>(i), vj = static_cast<Vertex>(j);
        const int label = graph_ ? graph_->has_edge(vi, vj) : labels_(i, j) != 0.0;
        const double w = graph_ ? pair_scale_ * lazy_weights_.pair_weight(vi, vj, label) : weights_(i, j);
        if (w == 0.0) {
          if (grad) slope(i, j) = slope(j, i) = 0.0;
          continue;
        }
        const auto ls = cross_entropy_with_slope(gram(i, j), label);
        value += w * ls.loss;
        if (grad) slope(i, j) = slope(j, i) = w * ls.slope;
      }
    }
    value *= 2.0;  // ordered pairs (i, j) and (j, i)
    value += xi_ * (penalty_.array() * omega.rowwise().squaredNorm().array()).sum();
    if (grad) {
      *grad = 2.0 * (slope * omega);
      grad->array() += (2.0 * xi_) * (omega.array().colwise() * penalty_.array());
    }
    return value;
  }

  LossEval evaluate(const EmbeddingMatrix& emb) const {
    LossEval out;
    out.value = (*this)(emb.rows, &out.gradient);
    return out;
  }

 private:
  std::size_t n_;
  double xi_;
  double pair_scale_ = 1.0;
  Eigen::MatrixXd weights_;
  Eigen::MatrixXd labels_;
  RiskWeights lazy_weights_;
  const LatentGraph* graph_ = nullptr;  // set in lazy mode only
  Eigen::VectorXd penalty_;
};

/// Weighted empirical risk and analytic gradient.
inline LossEval empirical_risk(const EmbeddingMatrix& emb, const RiskWeights& w, const LatentGraph& g,
                               const RiskConfig& cfg) {
  if (emb.n() != g.n()) throw std::invalid_argument("empirical risk: embedding and graph disagree on n");
  return EmpiricalObjective(w, g, cfg).evaluate(emb);
}

}  // namespace gemb
