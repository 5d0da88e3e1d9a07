#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "gemb/harness.hpp"

using namespace gemb;

namespace {

GraphonSpec constant(double p) { return GraphonSpec{Constant{p}, {}, {}}; }

ConvergenceSetup uv_setup(double p, double xi) {
  ConvergenceSetup s;
  s.spec = constant(p);
  s.scheme = SchemeConfig{UniformVertex{2}, {}};
  s.xi = xi;
  s.train.d = 2;
  s.train.restarts = 1;
  s.kappa = 8;
  return s;
}

}  // namespace

TEST(Harness, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
  EXPECT_EQ(latent_cell(0.999999, 4), 3u);
  EXPECT_EQ(latent_cell(0.25, 4), 1u);
}

TEST(InclusionRates, UniformVertexWithinMonteCarloNoise) {
  // The limit formula drops the n / (n - 1) factor of the exact pair
  // probability; noise is estimated from independent replicate runs.
  const std::size_t n = 100, bins = 2;
  const auto spec = constant(0.5);
  const SchemeConfig sc{UniformVertex{10}, {}};
  const auto g = sample_graph(spec, n, 1);
  const double exact = double(n) / double(n - 1);
  const std::size_t small = 2000, big = 40000, runs = 12;
  std::vector<std::vector<double>> reps;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto rec = inclusion_on_graph(g, spec, sc, small, bins, 100 + r);
    std::vector<double> v;
    for (const auto& b : rec.pair_bins) v.push_back(b.ratio);
    reps.push_back(v);
  }
  const auto rec = inclusion_on_graph(g, spec, sc, big, bins, 7);
  ASSERT_EQ(rec.pair_bins.size(), reps[0].size());
  EXPECT_EQ(rec.undersampled_bins, 0u);
  for (std::size_t b = 0; b < rec.pair_bins.size(); ++b) {
    double m = 0.0, s2 = 0.0;
    for (const auto& v : reps) m += v[b] / runs;
    for (const auto& v : reps) s2 += (v[b] - m) * (v[b] - m) / (runs - 1);
    const double se = std::sqrt(s2 * double(small) / double(big));
    EXPECT_LE(std::abs(rec.pair_bins[b].ratio - exact), 4 * se) << "bin " << b;
  }
  for (const auto& b : rec.vertex_bins) EXPECT_NEAR(b.ratio, 1.0, 0.02);
}

TEST(InclusionRates, ReproducibleAndSerializable) {
  const auto spec = GraphonSpec{SmoothProduct{0.2, 0.6}, {}, {}};
  const SchemeConfig sc{RandomWalk{5, 2, 1.0}, {}};
  const auto a = verify_assumption1(spec, sc, {150}, 300, 2, 9);
  const auto b = verify_assumption1(spec, sc, {150}, 300, 2, 9);
  EXPECT_EQ(to_json(a[0]).dump(), to_json(b[0]).dump());
  EXPECT_TRUE(std::isfinite(a[0].pair_max_error));
  std::ostringstream os;
  write_inclusion_csv(a, os);
  EXPECT_EQ(os.str().rfind("n,", 0), 0u);
  EXPECT_THROW(verify_assumption1(spec, sc, {50}, 10, 0, 1), std::invalid_argument);
}

TEST(Convergence, HugePenaltyBothSidesAtZero) {
  // Both minimizers are zero; the values differ only by the diagonal the
  // empirical sum skips, 2 log 2 / n here.
  const auto s = uv_setup(0.8, 1e6);
  const auto recs = verify_convergence(s, {2000}, {1});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].gap, 2 * std::log(2.0) / 2000, 1e-9);
  EXPECT_LE(recs[0].gap, 1e-3);
  EXPECT_LE(recs[0].gram_deviation, 1e-2);
  EXPECT_GE(recs[0].gap, 0.0);
}

TEST(Convergence, UniformVertexGapSmallAndShrinking) {
  const auto s = uv_setup(0.8, 0.0);
  const auto recs = verify_convergence(s, {200, 400}, {1});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_LE(recs[0].gap, 0.05);
  EXPECT_LT(recs[1].gap, recs[0].gap);
  EXPECT_LT(recs[1].gram_deviation, recs[0].gram_deviation);
  EXPECT_NEAR(recs[0].population_min, 2 * (-0.8 * std::log(0.8) - 0.2 * std::log(0.2)), 1e-8);
  const auto med = median_by_n(recs, [](const ConvergenceRecord& r) { return r.gap; });
  EXPECT_EQ(med.at(200), recs[0].gap);
}

TEST(Convergence, GramDeviationAgainstConstantKernel) {
  Matrix m(2, 1);
  m << 1.0, 2.0;
  auto k = StepKernel::full(Eigen::MatrixXd::Constant(1, 1, 1.5));
  // gram = [[1, 2], [2, 4]] against 1.5 everywhere.
  EXPECT_DOUBLE_EQ(gram_deviation(EmbeddingMatrix(m, 10.0), {0.2, 0.7}, k), (0.5 + 0.5 + 0.5 + 2.5) / 4.0);
}

TEST(Shrinkage, CurveLaws) {
  const auto spec = GraphonSpec{StepBlock{{{0.7, 0.2}, {0.2, 0.6}}}, {}, {}};
  const auto g = sample_graph(spec, 60, 3);
  const auto w = formula_weights(SchemeConfig{UniformVertex{4}, {}}, spec, g);
  TrainConfig cfg;
  cfg.d = 3;
  cfg.restarts = 1;
  const std::vector<double> grid{0.0, 1e-2, 1e-1, 1.0, 10.0, 1e3};
  const auto recs = shrinkage_curve(g, w, grid, cfg);
  ASSERT_EQ(recs.size(), grid.size());
  for (std::size_t t = 1; t < recs.size(); ++t) {
    EXPECT_LE(recs[t].mean_sq_norm, recs[t - 1].mean_sq_norm + 1e-12);
    EXPECT_LE(recs[t].top_singular_values[0], recs[t - 1].top_singular_values[0] + 1e-12);
    EXPECT_LE(recs[t].trace, recs[0].trace);
    EXPECT_LE(recs[t].mean_sq_norm, recs[t].objective_at_zero / recs[t].xi);
  }
  for (double s : recs.back().top_singular_values) EXPECT_LE(s, 0.1);
  EXPECT_THROW(shrinkage_curve(g, w, {1.0, 0.0}, cfg), std::invalid_argument);
}

TEST(LinkPrediction, HoldoutSplitShape) {
  const auto g = sample_graph(constant(0.2), 100, 4);
  Rng rng(1);
  const auto s = holdout_split(g, 0.1, rng);
  const auto h = std::size_t(std::llround(0.1 * double(g.edge_count())));
  EXPECT_EQ(s.edges.size(), h);
  EXPECT_EQ(s.nonedges.size(), h);
  EXPECT_EQ(s.train.edge_count(), g.edge_count() - h);
  for (const auto& p : s.edges) EXPECT_FALSE(s.train.has_edge(p.u, p.v));
  for (const auto& p : s.nonedges) EXPECT_FALSE(g.has_edge(p.u, p.v));
  auto ne = s.nonedges;
  std::sort(ne.begin(), ne.end());
  EXPECT_EQ(std::adjacent_find(ne.begin(), ne.end()), ne.end());
}

TEST(LinkPrediction, RandomEmbeddingsScoreChance) {
  const auto g = sample_graph(GraphonSpec{StepBlock{{{0.9, 0.05}, {0.05, 0.9}}}, {}, {}}, 600, 2);
  LinkPredictionSetup s;
  s.scheme = SchemeConfig{RandomWalk{5, 5, 1.0}, {}};
  s.train.d = 16;
  s.train.optimizer = AdamConfig{};
  s.source = EmbeddingSource::random;
  s.repeats = 3;
  const auto r = link_prediction_eval(g, s);
  EXPECT_NEAR(r.roc_mean, 0.5, 0.05);
  EXPECT_GE(r.roc_std, 0.0);
  EXPECT_EQ(r.roc.size(), 3u);
  for (double a : r.pr) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  s.holdout_frac = 1.5;
  EXPECT_THROW(link_prediction_eval(g, s), std::invalid_argument);
}

TEST(LinkPrediction, TrainedEmbeddingsBeatChance) {
  const auto g = sample_graph(GraphonSpec{StepBlock{{{0.9, 0.05}, {0.05, 0.9}}}, {}, {}}, 200, 5);
  LinkPredictionSetup s;
  s.scheme = SchemeConfig{RandomWalk{5, 5, 1.0}, {}};
  s.train.d = 8;
  s.train.optimizer = AdamConfig{1e-2};
  s.runs_per_epoch = 10;
  const auto r = link_prediction_eval(g, s);
  EXPECT_GT(r.roc_mean, 0.8);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("repeats"), 1);
}
