#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gemb/graph.hpp"
#include "gemb/graphon.hpp"
#include "gemb/quadrature.hpp"
#include "gemb/sampler.hpp"

namespace gemb {

/// [f, g]_alpha = f^alpha g + f g^alpha.
inline double bracket_alpha(double f, double g, double alpha) {
  if (f < 0.0 || g < 0.0) throw std::invalid_argument("bracket_alpha: arguments must be >= 0");
  return std::pow(f, alpha) * g + f * std::pow(g, alpha);
}

/// T_n(lambda) = \int_0^1 (1 - rho W(lambda, y)) W(y, .) dy.
///
/// Integrated piecewise over the graphon's discontinuities with Gauss-Legendre
/// panels (exact for step families); smooth families use 64 panels.
inline double tn_integral(const DegreeFunction& deg, double rho, double lambda) {
  const auto& spec = deg.spec();
  if (!(rho * bounds(spec).upper < 1.0)) throw std::invalid_argument("tn_integral: need rho * C' < 1");
  auto br = breakpoints(spec);
  std::vector<double> edges{0.0};
  if (br.empty()) {
    constexpr int panels = 64;
    for (int i = 1; i < panels; ++i) edges.push_back(i / double(panels));
  } else {
    edges.insert(edges.end(), br.begin(), br.end());
  }
  edges.push_back(1.0);
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const auto rule = quad::gauss_on(edges[p], edges[p + 1]);
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      const double y = rule.x[i];
      total += rule.w[i] * (1.0 - rho * evaluate(spec, lambda, y)) * deg.at(y);
    }
  }
  return total;
}

enum class WeightSource { uniform_vertex, uniform_edge, random_walk, monte_carlo };

/// The limit functions f_n(lambda, lambda', x) and g_n(lambda) of a sampling
/// scheme, as functions of latent positions.
class SchemeFormula {
 public:
  /// Uniform vertex: f = k(k-1), g = k.
  static SchemeFormula uniform_vertex(std::size_t k) {
    SchemeFormula f;
    f.source_ = WeightSource::uniform_vertex;
    const auto kk = static_cast<double>(k);
    f.f_edge_ = kk * (kk - 1.0);
    f.f_nonedge_ = f.f_edge_;
    f.g_path_ = kk;
    return f;
  }

  /// Uniform edge with unigram negatives.
  static SchemeFormula uniform_edge(const UniformEdge& cfg, DegreeFunction deg, double rho) {
    const auto k = static_cast<double>(cfg.k), l = static_cast<double>(cfg.l);
    return with_degree(WeightSource::uniform_edge, std::move(deg), rho, cfg.alpha,
                       /*f_edge numerator*/ 2.0 * k,
                       /*f_nonedge scale*/ 2.0 * k * l,
                       /*g path scale*/ 2.0 * k,
                       /*g negative scale*/ 2.0 * k * l);
  }

  /// Random walk with unigram negatives.
  static SchemeFormula random_walk(const RandomWalk& cfg, DegreeFunction deg, double rho) {
    const auto k = static_cast<double>(cfg.k), l = static_cast<double>(cfg.l);
    return with_degree(WeightSource::random_walk, std::move(deg), rho, cfg.alpha, 2.0 * k,
                       l * (k + 1.0), k, (k + 1.0) * l);
  }

  static SchemeFormula for_scheme(const SchemeConfig& cfg, const DegreeFunction& deg, double rho) {
    return std::visit(
        [&](const auto& s) -> SchemeFormula {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, UniformVertex>) return uniform_vertex(s.k);
          else if constexpr (std::is_same_v<T, UniformEdge>) return uniform_edge(s, deg, rho);
          else return random_walk(s, deg, rho);
        },
        cfg.kind);
  }

  WeightSource source() const { return source_; }
  bool uses_degree() const { return source_ != WeightSource::uniform_vertex; }
  double rho() const { return rho_; }
  double alpha() const { return alpha_; }

  /// f_n for an edge (constant across positions).
  double edge_weight() const { return f_edge_; }

  /// f_n(., ., 0) from degree values W(lambda_i, .), W(lambda_j, .).
  double nonedge_weight_from_degrees(double wi, double wj) const {
    if (!uses_degree()) return f_nonedge_;
    return f_nonedge_ * bracket_alpha(wi, wj, alpha_);
  }

  double pair(double li, double lj, int x) const {
    if (x == 1) return f_edge_;
    if (!uses_degree()) return f_nonedge_;
    return nonedge_weight_from_degrees(deg_.at(li), deg_.at(lj));
  }

  /// g_n(lambda).
  double vertex(double lambda) const {
    if (!uses_degree()) return g_path_;
    const double w = deg_.at(lambda);
    return g_path_ * w + g_neg_ * std::pow(w, alpha_) * tn_integral(deg_, rho_, lambda);
  }

  double degree_at(double lambda) const { return uses_degree() ? deg_.at(lambda) : 1.0; }
  const DegreeFunction& degree_function() const { return deg_; }

 private:
  static SchemeFormula with_degree(WeightSource src, DegreeFunction deg, double rho, double alpha,
                                   double edge_num, double nonedge_num, double g_path_num,
                                   double g_neg_num) {
    if (!(rho > 0.0)) throw std::invalid_argument("scheme formula: rho must be > 0");
    deg.cache_moment(1.0);
    deg.cache_moment(alpha);
    const double ew = deg.mean(), ewa = deg.moment(alpha);
    SchemeFormula f;
    f.source_ = src;
    f.rho_ = rho;
    f.alpha_ = alpha;
    f.f_edge_ = edge_num / (ew * rho);
    f.f_nonedge_ = nonedge_num / (ew * ewa);
    f.g_path_ = g_path_num / ew;
    f.g_neg_ = g_neg_num / (ew * ewa);
    f.deg_ = std::move(deg);
    return f;
  }

  WeightSource source_ = WeightSource::uniform_vertex;
  double rho_ = 1.0;
  double alpha_ = 1.0;
  double f_edge_ = 0.0;
  double f_nonedge_ = 0.0;  // constant, or scale on the alpha-bracket
  double g_path_ = 0.0;
  double g_neg_ = 0.0;
  DegreeFunction deg_;
};

/// Per-pair f_n(lambda_i, lambda_j, x) and per-vertex g_n(lambda_i) weights
/// for a concrete vertex set. Pair weights are evaluated lazily; dense()
/// materializes them for small graphs.
class RiskWeights {
 public:
  RiskWeights() = default;

  /// Formula weights at the given latent positions; W(lambda_i, .) and
  /// g_n(lambda_i) are cached per vertex.
  RiskWeights(const SchemeFormula& formula, const std::vector<double>& latents)
      : source_(formula.source()), n_(latents.size()), formula_(formula) {
    degree_.resize(n_);
    vertex_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      degree_[i] = formula.degree_at(latents[i]);
      vertex_[i] = formula.vertex(latents[i]);
    }
  }

  /// Exact-probability weights: n^2 P(pair in S | G) and n P(i in V(S) | G).
  static RiskWeights monte_carlo(const InclusionProbabilities& probs) {
    RiskWeights w;
    w.source_ = WeightSource::monte_carlo;
    w.n_ = probs.n;
    const auto n = static_cast<double>(probs.n);
    w.vertex_.resize(probs.n);
    for (std::size_t i = 0; i < probs.n; ++i) w.vertex_[i] = n * probs.vertex_prob(static_cast<Vertex>(i));
    w.mc_pairs_.reserve(probs.pair_counts.size());
    for (const auto& [p, c] : probs.pair_counts)
      w.mc_pairs_.emplace_back(p, n * n * static_cast<double>(c) / static_cast<double>(probs.reps));
    return w;
  }

  WeightSource source() const { return source_; }
  std::size_t n() const { return n_; }

  double pair_weight(Vertex i, Vertex j, int x) const {
    if (i == j) return 0.0;
    if (source_ == WeightSource::monte_carlo) {
      const Pair p = Pair::of(i, j);
      auto it = std::lower_bound(mc_pairs_.begin(), mc_pairs_.end(), p,
                                 [](const auto& e, const Pair& q) { return e.first < q; });
      return (it != mc_pairs_.end() && it->first == p) ? it->second : 0.0;
    }
    if (x == 1) return formula_.edge_weight();
    return formula_.nonedge_weight_from_degrees(degree_[i], degree_[j]);
  }

  /// f_n(lambda_i, lambda_j, a_ij) for the observed edge indicator.
  double pair_weight(Vertex i, Vertex j, const LatentGraph& g) const {
    return pair_weight(i, j, g.has_edge(i, j) ? 1 : 0);
  }

  double vertex_weight(Vertex i) const { return vertex_[i]; }
  const std::vector<double>& vertex_weights() const { return vertex_; }

  static constexpr std::size_t kDenseLimit = 4000;

  /// Dense symmetric matrix of f_n(lambda_i, lambda_j, a_ij), zero diagonal.
  Eigen::MatrixXd dense(const LatentGraph& g) const {
    if (g.n() != n_) throw std::invalid_argument("risk weights and graph disagree on n");
    if (n_ > kDenseLimit) throw std::length_error("dense weights limited to n <= 4000");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    if (source_ == WeightSource::monte_carlo) {
      for (const auto& [p, w] : mc_pairs_) m(p.u, p.v) = m(p.v, p.u) = w;
      return m;
    }
    for (Vertex i = 0; i < n_; ++i) {
      for (Vertex j = i + 1; j < n_; ++j) m(i, j) = m(j, i) = pair_weight(i, j, 0);
      for (Vertex j : g.neighbors(i)) m(i, j) = formula_.edge_weight();
    }
    return m;
  }

 private:
  WeightSource source_ = WeightSource::uniform_vertex;
  std::size_t n_ = 0;
  SchemeFormula formula_;
  std::vector<double> degree_;
  std::vector<double> vertex_;
  std::vector<std::pair<Pair, double>> mc_pairs_;
};

/// Uniform-vertex weights on n vertices.
inline RiskWeights weights_uniform_vertex(std::size_t k, std::size_t n) {
  if (k < 1) throw std::invalid_argument("weights_uniform_vertex: k must be >= 1");
  return RiskWeights(SchemeFormula::uniform_vertex(k), std::vector<double>(n, 0.5));
}

inline RiskWeights weights_uniform_edge(const UniformEdge& cfg, const DegreeFunction& deg, double rho,
                                        const std::vector<double>& latents) {
  return RiskWeights(SchemeFormula::uniform_edge(cfg, deg, rho), latents);
}

inline RiskWeights weights_random_walk(const RandomWalk& cfg, const DegreeFunction& deg, double rho,
                                       const std::vector<double>& latents) {
  return RiskWeights(SchemeFormula::random_walk(cfg, deg, rho), latents);
}

/// Formula weights for any scheme on a sampled graph.
inline RiskWeights formula_weights(const SchemeConfig& cfg, const GraphonSpec& spec, const LatentGraph& g) {
  if (!g.has_latents())
    throw std::invalid_argument("formula weights need latent positions; real graphs carry none");
  const DegreeFunction deg = degree_function(spec, {cfg.alpha()});
  return RiskWeights(SchemeFormula::for_scheme(cfg, deg, g.rho()), g.latents());
}

}  // namespace gemb
