#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gemb/formulas.hpp"
#include "gemb/graph.hpp"
#include "gemb/metrics.hpp"
#include "gemb/population.hpp"
#include "gemb/risk.hpp"
#include "gemb/sampler.hpp"
#include "gemb/trainer.hpp"
#include "json.hpp"

namespace gemb {

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty range");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::size_t latent_cell(double lambda, std::size_t bins) {
  return std::min(static_cast<std::size_t>(lambda * double(bins)), bins - 1);
}

// ---------------------------------------------------------------------------
// Sampling-rate checks

struct RatioBin {
  std::size_t cell_a = 0;
  std::size_t cell_b = 0;  // equals cell_a for vertex bins
  int label = 0;           // a_ij; unused for vertex bins
  std::size_t members = 0;
  std::uint64_t hits = 0;
  double ratio = 0.0;      // n^2 P / f (pairs) or n P / g (vertices)
  bool undersampled = false;
};

struct InclusionRecord {
  std::size_t n = 0;
  double rho = 0.0;
  std::size_t reps = 0;
  double pair_max_error = 0.0;
  double vertex_max_error = 0.0;
  std::size_t undersampled_bins = 0;
  std::vector<RatioBin> pair_bins;
  std::vector<RatioBin> vertex_bins;
};

inline constexpr std::uint64_t kMinBinHits = 100;

/// Binned comparison of Monte Carlo inclusion probabilities against the
/// scheme's limit formulas on one sampled graph.
inline InclusionRecord inclusion_on_graph(const LatentGraph& g, const GraphonSpec& spec,
                                              const SchemeConfig& scheme, std::size_t reps, std::size_t bins,
                                              std::uint64_t seed, unsigned threads = 1) {
  if (bins < 1) throw std::invalid_argument("verify_assumption1: bins must be >= 1");
  const auto probs = mc_inclusion_probabilities(g, scheme, reps, seed, threads);
  const RiskWeights w = formula_weights(scheme, spec, g);
  const auto& lat = g.latents();
  const std::size_t n = g.n();

  // Pair bins keyed by (cell_a <= cell_b, label).
  const std::size_t nbins = bins * bins * 2;
  std::vector<double> f_sum(nbins, 0.0);
  std::vector<std::uint64_t> members(nbins, 0), hits(nbins, 0);
  auto key = [&](Vertex i, Vertex j, int x) {
    std::size_t a = latent_cell(lat[i], bins), b = latent_cell(lat[j], bins);
    if (a > b) std::swap(a, b);
    return (a * bins + b) * 2 + static_cast<std::size_t>(x);
  };
  for (Vertex i = 0; i < n; ++i)
    for (Vertex j = i + 1; j < n; ++j) {
      const int x = g.has_edge(i, j);
      const auto k = key(i, j, x);
      f_sum[k] += w.pair_weight(i, j, x);
      ++members[k];
    }
  for (const auto& [p, c] : probs.pair_counts) hits[key(p.u, p.v, g.has_edge(p.u, p.v))] += c;

  InclusionRecord rec;
  rec.n = n;
  rec.rho = g.rho();
  rec.reps = reps;
  const double nn = static_cast<double>(n), R = static_cast<double>(reps);
  for (std::size_t k = 0; k < nbins; ++k) {
    if (members[k] == 0 || f_sum[k] == 0.0) continue;
    RatioBin b;
    b.label = static_cast<int>(k % 2);
    b.cell_a = (k / 2) / bins;
    b.cell_b = (k / 2) % bins;
    b.members = members[k];
    b.hits = hits[k];
    b.ratio = nn * nn * static_cast<double>(hits[k]) / (R * f_sum[k]);
    b.undersampled = hits[k] < kMinBinHits;
    if (b.undersampled) ++rec.undersampled_bins;
    else rec.pair_max_error = std::max(rec.pair_max_error, std::abs(b.ratio - 1.0));
    rec.pair_bins.push_back(b);
  }

  std::vector<double> g_sum(bins, 0.0);
  std::vector<std::uint64_t> vmem(bins, 0), vhits(bins, 0);
  for (Vertex i = 0; i < n; ++i) {
    const auto c = latent_cell(lat[i], bins);
    g_sum[c] += w.vertex_weight(i);
    ++vmem[c];
    vhits[c] += probs.vertex_counts[i];
  }
  for (std::size_t c = 0; c < bins; ++c) {
    if (vmem[c] == 0) continue;
    RatioBin b;
    b.cell_a = b.cell_b = c;
    b.members = vmem[c];
    b.hits = vhits[c];
    b.ratio = nn * static_cast<double>(vhits[c]) / (R * g_sum[c]);
    b.undersampled = vhits[c] < kMinBinHits;
    if (b.undersampled) ++rec.undersampled_bins;
    else rec.vertex_max_error = std::max(rec.vertex_max_error, std::abs(b.ratio - 1.0));
    rec.vertex_bins.push_back(b);
  }
  return rec;
}

inline std::vector<InclusionRecord> verify_assumption1(const GraphonSpec& spec, const SchemeConfig& scheme,
                                                         const std::vector<std::size_t>& n_list, std::size_t reps,
                                                         std::size_t bins, std::uint64_t seed,
                                                         unsigned threads = 1) {
  std::vector<InclusionRecord> out;
  for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
    const std::size_t n = n_list[idx];
    const LatentGraph g = sample_graph(spec, n, derive_seed(seed, Stream::edges, n));
    out.push_back(inclusion_on_graph(g, spec, scheme, reps, bins, derive_seed(seed, Stream::inclusion, n), threads));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical against population minimizers

struct ConvergenceRecord {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double rho = 0.0;
  double empirical_min = 0.0;
  double population_min = 0.0;
  double gap = 0.0;             // |empirical_min - population_min|
  double gram_deviation = 0.0;  // (1/n^2) sum_{i,j} |<w_i, w_j> - K*(lambda_i, lambda_j)|
  bool converged = false;
  std::size_t iterations = 0;
  bool d_rate_holds = false;    // d^3 < n rho, a desk-scale proxy for d = o((n rho)^{1/3})
  std::size_t near_box = 0;
  double seconds = 0.0;
};

struct ConvergenceSetup {
  GraphonSpec spec;
  SchemeConfig scheme;
  double xi = 0.0;
  TrainConfig train;  // d, A, restarts, optimizer; xi and seed are overridden per cell
  std::size_t kappa = 64;
};

/// Mean absolute deviation of the gram matrix from a step kernel, including
/// the diagonal.
inline double gram_deviation(const EmbeddingMatrix& emb, const std::vector<double>& latents, const StepKernel& k) {
  const Eigen::MatrixXd G = gram_matrix(emb);
  const auto n = G.rows();
  std::vector<Eigen::Index> cell(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    cell[static_cast<std::size_t>(i)] =
        static_cast<Eigen::Index>(latent_cell(latents[static_cast<std::size_t>(i)], k.kappa));
  double s = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      s += std::abs(G(i, j) - k.K(cell[static_cast<std::size_t>(i)], cell[static_cast<std::size_t>(j)]));
  return s / double(n * n);
}

/// One (n, seed) cell: empirical minimum, population minimum and gram
/// deviation. The population kernel is passed in so it is solved once per n.
inline ConvergenceRecord convergence_cell(const ConvergenceSetup& setup, std::size_t n, std::uint64_t seed,
                                  const StepKernel& population) {
  const auto t0 = std::chrono::steady_clock::now();
  ConvergenceRecord rec;
  rec.n = n;
  rec.seed = seed;
  const LatentGraph g = sample_graph(setup.spec, n, seed);
  rec.rho = g.rho();
  const RiskWeights w = formula_weights(setup.scheme, setup.spec, g);
  TrainConfig cfg = setup.train;
  cfg.xi = setup.xi;
  cfg.seed = derive_seed(seed, Stream::init);
  const auto res = train_full(g, w, cfg);
  rec.empirical_min = res.objective;
  rec.population_min = population.objective;
  rec.gap = std::abs(rec.empirical_min - rec.population_min);
  rec.gram_deviation = gram_deviation(res.embedding, g.latents(), population);
  rec.converged = res.converged;
  rec.iterations = res.iterations;
  const double d = static_cast<double>(cfg.d);
  rec.d_rate_holds = d * d * d < static_cast<double>(n) * rec.rho;
  rec.near_box = near_box_count(res.embedding);
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline StepKernel population_minimizer(const ConvergenceSetup& setup, double rho) {
  const auto w = discretize_weights(setup.spec, rho, setup.scheme, setup.kappa);
  return minimize_psd(w, setup.xi);
}

/// Convergence records for every n in n_list and every seed.
inline std::vector<ConvergenceRecord> verify_convergence(const ConvergenceSetup& setup, const std::vector<std::size_t>& n_list,
                                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<ConvergenceRecord> out;
  for (std::size_t n : n_list) {
    const StepKernel pop = population_minimizer(setup, setup.spec.sparsity.rho(n));
    for (std::uint64_t s : seeds) out.push_back(convergence_cell(setup, n, s, pop));
  }
  return out;
}

/// Median over seeds of a record field, per n.
template <class Field>
std::map<std::size_t, double> median_by_n(const std::vector<ConvergenceRecord>& recs, Field field) {
  std::map<std::size_t, std::vector<double>> groups;
  for (const auto& r : recs) groups[r.n].push_back(field(r));
  std::map<std::size_t, double> out;
  for (auto& [n, v] : groups) out[n] = median(std::move(v));
  return out;
}

// ---------------------------------------------------------------------------
// Shrinkage

struct ShrinkageRecord {
  double xi = 0.0;
  double mean_sq_norm = 0.0;  // (1/n) sum |w_i|^2
  double trace = 0.0;         // trace of the gram matrix
  std::vector<double> top_singular_values;  // of the gram matrix
  double objective = 0.0;
  double objective_at_zero = 0.0;
  bool converged = false;
};

/// Trains once per xi in ascending order, warm-starting each run from the
/// previous solution.
inline std::vector<ShrinkageRecord> shrinkage_curve(const LatentGraph& g, const RiskWeights& w,
                                                    const std::vector<double>& xi_grid, const TrainConfig& cfg) {
  if (!std::is_sorted(xi_grid.begin(), xi_grid.end()))
    throw std::invalid_argument("shrinkage_curve: xi grid must be sorted ascending");
  EmpiricalObjective objective(w, g, RiskConfig{0.0, Normalization::per_graph});
  const Matrix zero = Matrix::Zero(static_cast<Eigen::Index>(g.n()), static_cast<Eigen::Index>(cfg.d));
  std::vector<ShrinkageRecord> out;
  Matrix warm;
  for (std::size_t t = 0; t < xi_grid.size(); ++t) {
    TrainConfig c = cfg;
    c.xi = xi_grid[t];
    objective.set_xi(c.xi);
    const TrainResult res = t == 0 ? train_full(objective, c) : train_full_from(objective, warm, c);
    warm = res.embedding.rows;
    ShrinkageRecord r;
    r.xi = c.xi;
    r.mean_sq_norm = res.embedding.rows.squaredNorm() / static_cast<double>(g.n());
    const auto spec = gram_spectrum(res.embedding);
    r.trace = spec.frobenius_sq;
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, spec.singular_values.size()); ++i)
      r.top_singular_values.push_back(spec.singular_values[i] * spec.singular_values[i]);
    r.objective = res.objective;
    r.objective_at_zero = objective(zero, nullptr);
    r.converged = res.converged;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Link prediction

enum class EmbeddingSource { trained, random };

struct LinkPredictionSetup {
  SchemeConfig scheme;
  TrainConfig train;             // optimizer should be Adam
  std::size_t runs_per_epoch = 50;
  double holdout_frac = 0.1;
  double classifier_frac = 0.1;  // of held-out pairs, used to fit the classifier
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  EmbeddingSource source = EmbeddingSource::trained;
};

struct LinkPredictionResult {
  std::vector<double> roc;
  std::vector<double> pr;
  double roc_mean = 0.0, roc_std = 0.0;
  double pr_mean = 0.0, pr_std = 0.0;
  double holdout_frac = 0.0, classifier_frac = 0.0;
  std::size_t repeats = 0;
  std::size_t isolated_training_vertices = 0;  // summed over repeats
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0};
}

}  // namespace detail

struct HoldoutSplit {
  LatentGraph train;
  std::vector<Pair> edges;     // held-out edges
  std::vector<Pair> nonedges;  // held-out non-edges, sampled uniformly
};

/// Removes holdout_frac of the edges and an equal number of uniformly drawn
/// non-edges (by rejection).
inline HoldoutSplit holdout_split(const LatentGraph& g, double holdout_frac, Rng& rng) {
  const auto all = g.edges();
  const auto m = all.size();
  const auto h = static_cast<std::size_t>(std::llround(holdout_frac * double(m)));
  if (h == 0) throw std::invalid_argument("holdout leaves no held-out edges");
  const std::size_t n = g.n();
  const double total_pairs = double(n) * double(n - 1) / 2.0;
  if (double(h) > total_pairs - double(m)) throw std::invalid_argument("too few non-edges for the holdout");
  HoldoutSplit s;
  std::vector<char> held(m, 0);
  for (std::size_t idx : detail::sample_without_replacement(m, h, rng)) {
    held[idx] = 1;
    s.edges.push_back(all[idx]);
  }
  std::vector<Pair> chosen;
  while (s.nonedges.size() < h) {
    const auto u = static_cast<Vertex>(rng.below(n)), v = static_cast<Vertex>(rng.below(n));
    if (u == v || g.has_edge(u, v)) continue;
    const Pair p = Pair::of(u, v);
    if (std::binary_search(chosen.begin(), chosen.end(), p)) continue;
    chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), p), p);
    s.nonedges.push_back(p);
  }
  std::vector<Pair> keep;
  keep.reserve(m - h);
  for (std::size_t i = 0; i < m; ++i)
    if (!held[i]) keep.push_back(all[i]);
  s.train = LatentGraph(n, keep);
  return s;
}

/// Holdout link prediction with Hadamard pair features and a logistic
/// classifier; mean and standard deviation over repeats.
inline LinkPredictionResult link_prediction_eval(const LatentGraph& g, const LinkPredictionSetup& setup) {
  if (!(setup.holdout_frac > 0.0 && setup.holdout_frac < 1.0))
    throw std::invalid_argument("holdout fraction must be in (0, 1)");
  if (!(setup.classifier_frac > 0.0 && setup.classifier_frac < 1.0))
    throw std::invalid_argument("classifier fraction must be in (0, 1)");
  LinkPredictionResult out;
  out.holdout_frac = setup.holdout_frac;
  out.classifier_frac = setup.classifier_frac;
  out.repeats = setup.repeats;
  for (std::size_t r = 0; r < setup.repeats; ++r) {
    Rng rng(setup.seed, Stream::split, r);
    const HoldoutSplit split = holdout_split(g, setup.holdout_frac, rng);
    for (Vertex v = 0; v < split.train.n(); ++v) out.isolated_training_vertices += split.train.degree(v) == 0;

    TrainConfig cfg = setup.train;
    cfg.seed = derive_seed(setup.seed, Stream::training, r);
    const EmbeddingMatrix emb = setup.source == EmbeddingSource::trained
                                    ? train_sgd(split.train, setup.scheme, cfg, setup.runs_per_epoch)
                                    : EmbeddingMatrix(initial_embedding(g.n(), cfg, 0), cfg.A);

    std::vector<Pair> pairs = split.edges;
    pairs.insert(pairs.end(), split.nonedges.begin(), split.nonedges.end());
    std::vector<int> labels(pairs.size(), 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(split.edges.size()), 1);
    // Shuffle, then the first classifier_frac of pairs train the classifier.
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_fit = std::max<std::size_t>(2, static_cast<std::size_t>(setup.classifier_frac * double(pairs.size())));
    const auto d = static_cast<Eigen::Index>(emb.d());
    Eigen::MatrixXd Xfit(static_cast<Eigen::Index>(n_fit), d), Xtest(static_cast<Eigen::Index>(pairs.size() - n_fit), d);
    std::vector<int> yfit, ytest;
    for (std::size_t t = 0; t < order.size(); ++t) {
      const Pair p = pairs[order[t]];
      const Eigen::RowVectorXd feat = emb.rows.row(p.u).cwiseProduct(emb.rows.row(p.v));
      if (t < n_fit) {
        Xfit.row(static_cast<Eigen::Index>(t)) = feat;
        yfit.push_back(labels[order[t]]);
      } else {
        Xtest.row(static_cast<Eigen::Index>(t - n_fit)) = feat;
        ytest.push_back(labels[order[t]]);
      }
    }
    const auto model = train_logistic(Xfit, yfit);
    const auto scores = logistic_scores(model, Xtest);
    out.roc.push_back(roc_auc(scores, ytest));
    out.pr.push_back(average_precision(scores, ytest));
  }
  std::tie(out.roc_mean, out.roc_std) = detail::mean_std(out.roc);
  std::tie(out.pr_mean, out.pr_std) = detail::mean_std(out.pr);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const RatioBin& b) {
  return {{"cell_a", b.cell_a}, {"cell_b", b.cell_b}, {"label", b.label},       {"members", b.members},
          {"hits", b.hits},     {"ratio", b.ratio},   {"undersampled", b.undersampled}};
}

inline nlohmann::json to_json(const InclusionRecord& r) {
  nlohmann::json pb = nlohmann::json::array(), vb = nlohmann::json::array();
  for (const auto& b : r.pair_bins) pb.push_back(to_json(b));
  for (const auto& b : r.vertex_bins) vb.push_back(to_json(b));
  return {{"n", r.n},
          {"rho", r.rho},
          {"reps", r.reps},
          {"pair_max_error", r.pair_max_error},
          {"vertex_max_error", r.vertex_max_error},
          {"undersampled_bins", r.undersampled_bins},
          {"pair_bins", pb},
          {"vertex_bins", vb}};
}

inline nlohmann::json to_json(const ConvergenceRecord& r) {
  return {{"n", r.n},
          {"seed", r.seed},
          {"rho", r.rho},
          {"empirical_min", r.empirical_min},
          {"population_min", r.population_min},
          {"gap", r.gap},
          {"gram_deviation", r.gram_deviation},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"d_rate_holds", r.d_rate_holds},
          {"near_box", r.near_box}};
}

inline nlohmann::json to_json(const ShrinkageRecord& r) {
  return {{"xi", r.xi},
          {"mean_sq_norm", r.mean_sq_norm},
          {"trace", r.trace},
          {"top_singular_values", r.top_singular_values},
          {"objective", r.objective},
          {"objective_at_zero", r.objective_at_zero},
          {"converged", r.converged}};
}

inline nlohmann::json to_json(const LinkPredictionResult& r) {
  return {{"roc_auc", r.roc},
          {"pr_auc", r.pr},
          {"roc_auc_mean", r.roc_mean},
          {"roc_auc_std", r.roc_std},
          {"pr_auc_mean", r.pr_mean},
          {"pr_auc_std", r.pr_std},
          {"holdout_frac", r.holdout_frac},
          {"classifier_frac", r.classifier_frac},
          {"repeats", r.repeats},
          {"isolated_training_vertices", r.isolated_training_vertices}};
}

inline void write_convergence_csv(const std::vector<ConvergenceRecord>& recs, std::ostream& os) {
  std::ostringstream b;
  b.precision(17);
  b << "n,seed,rho,empirical_min,population_min,gap,gram_deviation,converged,iterations\n";
  for (const auto& r : recs)
    b << r.n << ',' << r.seed << ',' << r.rho << ',' << r.empirical_min << ',' << r.population_min << ',' << r.gap
      << ',' << r.gram_deviation << ',' << r.converged << ',' << r.iterations << '\n';
  os << b.str();
}

inline void write_inclusion_csv(const std::vector<InclusionRecord>& recs, std::ostream& os) {
  std::ostringstream b;
  b.precision(17);
  b << "n,kind,cell_a,cell_b,label,members,hits,ratio,undersampled\n";
  for (const auto& r : recs) {
    for (const auto& x : r.pair_bins)
      b << r.n << ",pair," << x.cell_a << ',' << x.cell_b << ',' << x.label << ',' << x.members << ',' << x.hits
        << ',' << x.ratio << ',' << x.undersampled << '\n';
    for (const auto& x : r.vertex_bins)
      b << r.n << ",vertex," << x.cell_a << ',' << x.cell_b << ",," << x.members << ',' << x.hits << ',' << x.ratio
        << ',' << x.undersampled << '\n';
  }
  os << b.str();
}

inline void write_shrinkage_csv(const std::vector<ShrinkageRecord>& recs, std::ostream& os) {
  std::ostringstream b;
  b.precision(17);
  b << "xi,mean_sq_norm,trace,top_singular_value,objective,objective_at_zero,converged\n";
  for (const auto& r : recs)
    b << r.xi << ',' << r.mean_sq_norm << ',' << r.trace << ','
      << (r.top_singular_values.empty() ? 0.0 : r.top_singular_values.front()) << ',' << r.objective << ','
      << r.objective_at_zero << ',' << r.converged << '\n';
  os << b.str();
}

}  // namespace gemb
