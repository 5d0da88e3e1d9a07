#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "gemb/graph.hpp"
#include "gemb/rng.hpp"

namespace gemb {

// ---------------------------------------------------------------------------
// Scheme configuration

/// k vertices without replacement, induced subgraph.
struct UniformVertex {
  std::size_t k = 1;
};

/// k edges without replacement plus l unigram negatives per vertex.
struct UniformEdge {
  std::size_t k = 1;
  std::size_t l = 0;
  double alpha = 1.0;
};

/// stationary-start simple random walk of k steps plus l unigram
/// negatives per path vertex.
struct RandomWalk {
  std::size_t k = 1;
  std::size_t l = 0;
  double alpha = 1.0;
};

using SchemeKind = std::variant<UniformVertex, UniformEdge, RandomWalk>;

struct DegreePower {};
struct ExactCombinatorial {};
struct MonteCarloUnigram {
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
};
using UnigramBackend = std::variant<DegreePower, ExactCombinatorial, MonteCarloUnigram>;

struct SchemeConfig {
  SchemeKind kind = UniformVertex{};
  UnigramBackend unigram = DegreePower{};

  std::size_t k() const {
    return std::visit([](const auto& s) { return s.k; }, kind);
  }
  std::size_t negatives() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, UniformVertex>) return 0;
          else return s.l;
        },
        kind);
  }
  double alpha() const {
    return std::visit(
        [](const auto& s) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, UniformVertex>) return 1.0;
          else return s.alpha;
        },
        kind);
  }
};

inline std::string scheme_name(const SchemeConfig& cfg) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformVertex>) return "uniform_vertex";
        else if constexpr (std::is_same_v<T, UniformEdge>) return "uniform_edge";
        else return "random_walk";
      },
      cfg.kind);
}

/// Config-only invariants (k >= 1, alpha > 0).
inline std::vector<std::string> validation_errors(const SchemeConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.k() < 1) errs.emplace_back("scheme k must be >= 1");
  if (!std::holds_alternative<UniformVertex>(cfg.kind) && !(cfg.alpha() > 0.0))
    errs.emplace_back("unigram alpha must be > 0");
  if (const auto* mc = std::get_if<MonteCarloUnigram>(&cfg.unigram); mc && mc->reps < 1)
    errs.emplace_back("unigram Monte Carlo reps must be >= 1");
  return errs;
}

/// Graph-dependent preconditions.
inline std::vector<std::string> validation_errors(const SchemeConfig& cfg, const LatentGraph& g) {
  auto errs = validation_errors(cfg);
  if (std::holds_alternative<UniformVertex>(cfg.kind) && cfg.k() > g.n())
    errs.emplace_back("uniform vertex sampling needs k <= n (k=" + std::to_string(cfg.k()) +
                      ", n=" + std::to_string(g.n()) + ")");
  if (std::holds_alternative<UniformEdge>(cfg.kind) && cfg.k() > g.edge_count())
    errs.emplace_back("uniform edge sampling needs k <= edge count");
  if (std::holds_alternative<RandomWalk>(cfg.kind) && g.edge_count() == 0)
    errs.emplace_back("random walk sampling needs at least one edge");
  if (std::holds_alternative<ExactCombinatorial>(cfg.unigram) &&
      !std::holds_alternative<UniformEdge>(cfg.kind))
    errs.emplace_back("exact combinatorial unigram is only available for uniform edge sampling");
  return errs;
}

// ---------------------------------------------------------------------------
// Subsample

struct Subsample {
  std::vector<Vertex> vertices;  // sorted, unique
  std::vector<Pair> positives;   // sorted, unique
  std::vector<Pair> negatives;   // sorted, unique
};

/// Empty when every subsample invariant holds against the source graph.
inline std::vector<std::string> invariant_violations(const Subsample& s, const LatentGraph& g) {
  std::vector<std::string> out;
  auto in_v = [&](Vertex x) { return std::binary_search(s.vertices.begin(), s.vertices.end(), x); };
  for (const auto& p : s.positives) {
    if (!g.has_edge(p.u, p.v)) out.push_back("positive pair is not an edge");
    if (!in_v(p.u) || !in_v(p.v)) out.push_back("positive endpoint missing from vertex set");
  }
  for (const auto& p : s.negatives) {
    if (p.u == p.v) out.push_back("negative self-pair");
    else if (g.has_edge(p.u, p.v)) out.push_back("negative pair is an edge");
    if (!in_v(p.u) || !in_v(p.v)) out.push_back("negative endpoint missing from vertex set");
  }
  if (!std::is_sorted(s.vertices.begin(), s.vertices.end()) ||
      std::adjacent_find(s.vertices.begin(), s.vertices.end()) != s.vertices.end())
    out.push_back("vertex set not sorted/unique");
  return out;
}

/// Debug export: "u v 1" for positives, "u v 0" for negatives.
inline void write_labeled_pairs(const Subsample& s, std::ostream& os) {
  for (const auto& p : s.positives) os << p.u << ' ' << p.v << " 1\n";
  for (const auto& p : s.negatives) os << p.u << ' ' << p.v << " 0\n";
}

namespace detail {

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

/// k distinct values from [0, N) by sparse partial Fisher-Yates, in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t N, std::size_t k, Rng& rng) {
  std::unordered_map<std::size_t, std::size_t> swapped;
  swapped.reserve(2 * k);
  auto value = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(N - i));
    const std::size_t vi = value(i), vj = value(j);
    out[i] = vj;
    swapped[j] = vi;
  }
  return out;
}

}  // namespace detail

/// Walker alias table for O(1) draws from a discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights) : prob_(weights.size()), alias_(weights.size()) {
    const std::size_t n = weights.size();
    total_ = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (n == 0 || !(total_ > 0.0) || !std::isfinite(total_))
      throw std::invalid_argument("unigram weights must have a positive finite sum");
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] < 0.0) throw std::invalid_argument("unigram weights must be non-negative");
      scaled[i] = weights[i] * static_cast<double>(n) / total_;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0;
    for (auto i : small) prob_[i] = 1.0;
  }

  std::size_t draw(Rng& rng) const {
    const auto i = static_cast<std::size_t>(rng.below(prob_.size()));
    return rng.uniform() < prob_[i] ? i : alias_[i];
  }
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
  double total_ = 0.0;
};

// ---------------------------------------------------------------------------
// Unigram weights

namespace detail {

/// Replicate counts of v entering the positive part S_0 (Monte Carlo unigram).
inline std::vector<std::uint64_t> positive_part_hits(const LatentGraph& g, const SchemeConfig& cfg,
                                                     const MonteCarloUnigram& mc);

}  // namespace detail

/// Per-vertex unigram weight before normalization.
inline std::vector<double> unigram_weights(const LatentGraph& g, const SchemeConfig& cfg) {
  if (std::holds_alternative<UniformVertex>(cfg.kind))
    throw std::invalid_argument("uniform vertex sampling draws no negatives; no unigram");
  const double alpha = cfg.alpha();
  const std::size_t n = g.n();
  std::vector<double> w(n, 0.0);

  if (std::holds_alternative<DegreePower>(cfg.unigram)) {
    for (Vertex v = 0; v < n; ++v) {
      const auto d = static_cast<double>(g.degree(v));
      w[v] = d > 0 ? std::pow(d, alpha) : 0.0;
    }
  } else if (std::holds_alternative<ExactCombinatorial>(cfg.unigram)) {
    if (!std::holds_alternative<UniformEdge>(cfg.kind))
      throw std::invalid_argument("exact combinatorial unigram has no closed form for random walks");
    const auto m = static_cast<double>(g.edge_count());
    const auto k = static_cast<double>(cfg.k());
    if (k > m) throw std::invalid_argument("uniform edge sampling needs k <= edge count");
    for (Vertex v = 0; v < n; ++v) {
      // P(v untouched) = C(m - deg, k) / C(m, k) = prod_{i<k} (m - deg - i) / (m - i)
      const auto d = static_cast<double>(g.degree(v));
      double log_miss = 0.0;
      bool zero = false;
      for (double i = 0; i < k; i += 1.0) {
        const double num = m - d - i;
        if (num <= 0.0) {
          zero = true;
          break;
        }
        log_miss += std::log(num) - std::log(m - i);
      }
      const double hit = zero ? 1.0 : -std::expm1(log_miss);
      w[v] = hit > 0.0 ? std::pow(hit, alpha) : 0.0;
    }
  } else {
    const auto& mc = std::get<MonteCarloUnigram>(cfg.unigram);
    const auto hits = detail::positive_part_hits(g, cfg, mc);
    for (Vertex v = 0; v < n; ++v) {
      const double p = static_cast<double>(hits[v]) / static_cast<double>(mc.reps);
      w[v] = p > 0.0 ? std::pow(p, alpha) : 0.0;
    }
  }
  if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }))
    throw std::invalid_argument("all unigram weights are zero");
  return w;
}

// ---------------------------------------------------------------------------
// Samplers

/// Precomputes per-graph state (edge array, unigram table) so repeated draws
/// are cheap. Holds a reference to the graph, which must outlive it.
class SubsampleDrawer {
 public:
  SubsampleDrawer(const LatentGraph& g, SchemeConfig cfg) : g_(&g), cfg_(std::move(cfg)) {
    auto errs = validation_errors(cfg_, g);
    if (!errs.empty()) throw std::invalid_argument(errs.front());
    if (std::holds_alternative<UniformEdge>(cfg_.kind)) edges_ = g.edges();
    if (cfg_.negatives() > 0) {
      unigram_weights_ = unigram_weights(g, cfg_);
      unigram_ = AliasTable(unigram_weights_);
      unigram_total_ = std::accumulate(unigram_weights_.begin(), unigram_weights_.end(), 0.0);
    }
  }

  const SchemeConfig& config() const { return cfg_; }
  const LatentGraph& graph() const { return *g_; }

  Subsample draw(Rng& rng) const {
    return std::visit([&](const auto& s) { return draw_impl(s, rng); }, cfg_.kind);
  }

  /// Vertices of the positive part only (S_0); used by the Monte Carlo unigram.
  std::vector<Vertex> draw_positive_vertices(Rng& rng) const {
    return std::visit(
        [&](const auto& s) -> std::vector<Vertex> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, UniformVertex>) {
            Subsample sub = draw_impl(s, rng);
            return sub.vertices;
          } else if constexpr (std::is_same_v<T, UniformEdge>) {
            std::vector<Vertex> vs;
            for (const auto& p : draw_edges(s.k, rng)) {
              vs.push_back(p.u);
              vs.push_back(p.v);
            }
            detail::sort_unique(vs);
            return vs;
          } else {
            auto path = walk(s.k, rng);
            path.pop_back();  // only v_1..v_k enter the walk unigram
            detail::sort_unique(path);
            return path;
          }
        },
        cfg_.kind);
  }

  /// Walk of k steps from a degree-proportional start; returns k + 1 vertices.
  std::vector<Vertex> walk(std::size_t k, Rng& rng) const {
    std::vector<Vertex> path;
    path.reserve(k + 1);
    Vertex cur = g_->owner_of_slot(static_cast<std::size_t>(rng.below(g_->adjacency_size())));
    path.push_back(cur);
    for (std::size_t step = 0; step < k; ++step) {
      auto nb = g_->neighbors(cur);
      cur = nb[static_cast<std::size_t>(rng.below(nb.size()))];
      path.push_back(cur);
    }
    return path;
  }

 private:
  Subsample draw_impl(const UniformVertex& s, Rng& rng) const {
    Subsample out;
    for (auto idx : detail::sample_without_replacement(g_->n(), s.k, rng))
      out.vertices.push_back(static_cast<Vertex>(idx));
    std::sort(out.vertices.begin(), out.vertices.end());
    for (std::size_t a = 0; a < out.vertices.size(); ++a)
      for (std::size_t b = a + 1; b < out.vertices.size(); ++b) {
        const Pair p{out.vertices[a], out.vertices[b]};
        (g_->has_edge(p.u, p.v) ? out.positives : out.negatives).push_back(p);
      }
    return out;
  }

  std::vector<Pair> draw_edges(std::size_t k, Rng& rng) const {
    std::vector<Pair> out;
    out.reserve(k);
    for (auto idx : detail::sample_without_replacement(edges_.size(), k, rng))
      out.push_back(edges_[idx]);
    return out;
  }

  Subsample draw_impl(const UniformEdge& s, Rng& rng) const {
    Subsample out;
    out.positives = draw_edges(s.k, rng);
    std::vector<Vertex> base;
    for (const auto& p : out.positives) {
      base.push_back(p.u);
      base.push_back(p.v);
    }
    detail::sort_unique(base);
    add_negatives(base, s.l, rng, out);
    finish(out, base);
    return out;
  }

  Subsample draw_impl(const RandomWalk& s, Rng& rng) const {
    Subsample out;
    const auto path = walk(s.k, rng);
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      out.positives.push_back(Pair::of(path[i], path[i + 1]));
    add_negatives(path, s.l, rng, out);
    finish(out, path);
    return out;
  }

  // For each source vertex, l unigram draws; self-draws are redrawn and
  // drawn edges are discarded.
  void add_negatives(const std::vector<Vertex>& sources, std::size_t l, Rng& rng, Subsample& out) const {
    if (l == 0) return;
    for (Vertex u : sources) {
      if (unigram_weights_[u] >= unigram_total_) continue;  // only u itself has mass
      for (std::size_t t = 0; t < l; ++t) {
        Vertex v;
        do {
          v = static_cast<Vertex>(unigram_.draw(rng));
        } while (v == u);
        if (!g_->has_edge(u, v)) out.negatives.push_back(Pair::of(u, v));
      }
    }
  }

  static void finish(Subsample& out, const std::vector<Vertex>& extra_vertices) {
    detail::sort_unique(out.positives);
    detail::sort_unique(out.negatives);
    out.vertices = extra_vertices;
    for (const auto& p : out.positives) {
      out.vertices.push_back(p.u);
      out.vertices.push_back(p.v);
    }
    for (const auto& p : out.negatives) {
      out.vertices.push_back(p.u);
      out.vertices.push_back(p.v);
    }
    detail::sort_unique(out.vertices);
  }

  const LatentGraph* g_;
  SchemeConfig cfg_;
  std::vector<Pair> edges_;
  std::vector<double> unigram_weights_;
  AliasTable unigram_;
  double unigram_total_ = 0.0;
};

namespace detail {

inline std::vector<std::uint64_t> positive_part_hits(const LatentGraph& g, const SchemeConfig& cfg,
                                                     const MonteCarloUnigram& mc) {
  SchemeConfig positive_only = cfg;
  std::visit(
      [](auto& s) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, UniformVertex>) s.l = 0;
      },
      positive_only.kind);
  positive_only.unigram = DegreePower{};
  const SubsampleDrawer drawer(g, positive_only);
  std::vector<std::uint64_t> hits(g.n(), 0);
  for (std::size_t r = 0; r < mc.reps; ++r) {
    Rng rng(mc.seed, Stream::unigram, r);
    for (Vertex v : drawer.draw_positive_vertices(rng)) ++hits[v];
  }
  return hits;
}

}  // namespace detail

inline Subsample uniform_vertex_sample(const LatentGraph& g, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > g.n()) throw std::invalid_argument("uniform vertex sampling needs 1 <= k <= n");
  Rng rng(seed, Stream::subsample);
  return SubsampleDrawer(g, SchemeConfig{UniformVertex{k}, DegreePower{}}).draw(rng);
}

inline Subsample uniform_edge_sample(const LatentGraph& g, const UniformEdge& cfg, std::uint64_t seed,
                                     UnigramBackend unigram = DegreePower{}) {
  Rng rng(seed, Stream::subsample);
  return SubsampleDrawer(g, SchemeConfig{cfg, unigram}).draw(rng);
}

inline Subsample random_walk_sample(const LatentGraph& g, const RandomWalk& cfg, std::uint64_t seed,
                                    UnigramBackend unigram = DegreePower{}) {
  Rng rng(seed, Stream::subsample);
  return SubsampleDrawer(g, SchemeConfig{cfg, unigram}).draw(rng);
}

// ---------------------------------------------------------------------------
// Monte Carlo inclusion probabilities

enum class Provenance { monte_carlo, formula };

struct InclusionProbabilities {
  std::size_t n = 0;
  std::size_t reps = 0;
  Provenance provenance = Provenance::monte_carlo;
  std::vector<std::pair<Pair, std::uint64_t>> pair_counts;  // sorted by pair, nonzero only
  std::vector<std::uint64_t> vertex_counts;

  double pair_prob(Pair p) const {
    auto it = std::lower_bound(pair_counts.begin(), pair_counts.end(), p,
                               [](const auto& e, const Pair& q) { return e.first < q; });
    if (it == pair_counts.end() || it->first != p) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(reps);
  }
  double vertex_prob(Vertex v) const {
    return static_cast<double>(vertex_counts[v]) / static_cast<double>(reps);
  }
};

namespace detail {

/// Integer tallies for replicate range [first, last).
struct InclusionTally {
  std::vector<std::uint32_t> dense;  // triangular, used when n is small
  std::vector<std::uint64_t> keys;   // sparse fallback
  std::vector<std::uint64_t> vertex;
};

inline constexpr std::size_t kDenseTallyLimit = 4096;

inline std::size_t tri_index(Pair p, std::size_t n) {
  const std::size_t u = p.u, v = p.v;
  return u * (2 * n - u - 1) / 2 + (v - u - 1);
}

inline void tally_range(const SubsampleDrawer& drawer, std::uint64_t seed, std::size_t first,
                        std::size_t last, InclusionTally& t) {
  const std::size_t n = drawer.graph().n();
  const bool dense = n <= kDenseTallyLimit;
  t.vertex.assign(n, 0);
  if (dense) t.dense.assign(n * (n - 1) / 2, 0);
  for (std::size_t r = first; r < last; ++r) {
    Rng rng(seed, Stream::inclusion, r);
    const Subsample s = drawer.draw(rng);
    for (Vertex v : s.vertices) ++t.vertex[v];
    for (const auto* set : {&s.positives, &s.negatives})
      for (const auto& p : *set) {
        if (dense) ++t.dense[tri_index(p, n)];
        else t.keys.push_back(p.key());
      }
  }
}

}  // namespace detail

/// Fraction of replicates containing each pair (in P or N) and each vertex.
/// Replicate r uses a seed derived from (seed, r); tallies are integers, so
/// the result does not depend on `threads`.
inline InclusionProbabilities mc_inclusion_probabilities(const LatentGraph& g, const SchemeConfig& cfg,
                                                         std::size_t reps, std::uint64_t seed,
                                                         unsigned threads = 1) {
  if (reps < 1) throw std::invalid_argument("mc_inclusion_probabilities: reps must be >= 1");
  const SubsampleDrawer drawer(g, cfg);
  const std::size_t n = g.n();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));

  std::vector<detail::InclusionTally> tallies(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t first = reps * t / threads, last = reps * (t + 1) / threads;
      pool.emplace_back([&, t, first, last] { detail::tally_range(drawer, seed, first, last, tallies[t]); });
    }
  }

  InclusionProbabilities out;
  out.n = n;
  out.reps = reps;
  out.vertex_counts.assign(n, 0);
  for (const auto& t : tallies)
    for (std::size_t v = 0; v < n; ++v) out.vertex_counts[v] += t.vertex[v];

  if (n <= detail::kDenseTallyLimit) {
    std::vector<std::uint64_t> total(n * (n - 1) / 2, 0);
    for (const auto& t : tallies)
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += t.dense[i];
    std::size_t idx = 0;
    for (Vertex u = 0; u < n; ++u)
      for (Vertex v = u + 1; v < n; ++v, ++idx)
        if (total[idx] > 0) out.pair_counts.emplace_back(Pair{u, v}, total[idx]);
  } else {
    std::vector<std::uint64_t> keys;
    for (auto& t : tallies) keys.insert(keys.end(), t.keys.begin(), t.keys.end());
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      out.pair_counts.emplace_back(Pair::from_key(keys[i]), j - i);
      i = j;
    }
  }
  return out;
}

}  // namespace gemb
