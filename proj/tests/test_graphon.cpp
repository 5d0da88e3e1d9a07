#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "gemb/graph.hpp"
#include "gemb/graphon.hpp"

using namespace gemb;

namespace {

GraphonSpec constant(double p) { return GraphonSpec{Constant{p}, {}, {}}; }
GraphonSpec two_block(double in, double out) { return GraphonSpec{StepBlock{{{in, out}, {out, in}}}, {}, {}}; }
GraphonSpec smooth(double a, double b) { return GraphonSpec{SmoothProduct{a, b}, {}, {}}; }

}  // namespace

TEST(Graphon, EvaluateExamples) {
  EXPECT_DOUBLE_EQ(evaluate(constant(0.5), 0.3, 0.9), 0.5);
  EXPECT_DOUBLE_EQ(evaluate(two_block(0.6, 0.2), 0.25, 0.75), 0.2);
  EXPECT_DOUBLE_EQ(evaluate(smooth(0.25, 0.5), 1.0, 1.0), 0.75);
}

TEST(Graphon, EvaluateRejectsOutOfRange) {
  EXPECT_THROW(evaluate(constant(0.5), -0.1, 0.5), std::out_of_range);
  EXPECT_THROW(evaluate(constant(0.5), 0.5, 1.5), std::out_of_range);
}

TEST(Graphon, Symmetric) {
  const GraphonSpec specs[] = {constant(0.3), two_block(0.7, 0.1), smooth(0.2, 0.6),
                               GraphonSpec{StepBlock{{{0.1, 0.2, 0.3}, {0.2, 0.5, 0.4}, {0.3, 0.4, 0.9}}}, {}, {}}};
  Rng rng(7);
  for (const auto& s : specs)
    for (int t = 0; t < 200; ++t) {
      const double x = rng.uniform(), y = rng.uniform();
      EXPECT_EQ(evaluate(s, x, y), evaluate(s, y, x));
    }
}

TEST(Graphon, Validation) {
  EXPECT_TRUE(validation_errors(constant(0.5)).empty());
  EXPECT_FALSE(validation_errors(constant(1.0)).empty());   // C' < 1
  EXPECT_FALSE(validation_errors(constant(0.0)).empty());   // C > 0
  EXPECT_FALSE(validation_errors(GraphonSpec{StepBlock{{{0.5, 0.2}, {0.3, 0.5}}}, {}, {}}).empty());
  EXPECT_FALSE(validation_errors(GraphonSpec{StepBlock{{{0.5, 0.2}, {0.2}}}, {}, {}}).empty());
  auto sp = constant(0.5);
  sp.sparsity.gamma = 1.0;  // rho must decay slower than log n / n
  EXPECT_FALSE(validation_errors(sp).empty());
  auto dense = GraphonSpec{StepBlock{{{0.99, 0.5}, {0.5, 0.99}}}, {1.02, 0.0}, {}};
  EXPECT_THROW(validate(dense, 2), std::invalid_argument);
}

TEST(Graphon, SparsitySchedule) {
  Sparsity s{0.5, 0.5};
  const double n = 1000.0;
  EXPECT_NEAR(s.rho(1000), 0.5 * std::sqrt(std::log(n) / n), 1e-15);
  EXPECT_EQ(Sparsity{}.rho(10), 1.0);
}

TEST(DegreeFunction, ClosedForms) {
  auto c = degree_function(constant(0.3), {2.0});
  EXPECT_DOUBLE_EQ(c.at(0.7), 0.3);
  EXPECT_NEAR(c.moment(2.0), 0.09, 1e-15);

  auto s = degree_function(smooth(0.25, 0.5), {1.0});
  for (double l : {0.0, 0.3, 1.0}) EXPECT_NEAR(s.at(l), 0.25 + 0.25 * l, 1e-10);
  EXPECT_NEAR(s.mean(), 0.375, 1e-10);

  auto b = degree_function(two_block(0.6, 0.2), {2.0});
  for (double l : {0.0, 0.49, 0.5, 0.9, 1.0}) EXPECT_NEAR(b.at(l), 0.4, 1e-15);
  EXPECT_NEAR(b.moment(2.0), 0.16, 1e-15);
}

TEST(DegreeFunction, QuadratureMatchesClosedFormForStepFamilies) {
  const GraphonSpec specs[] = {constant(0.35), two_block(0.6, 0.2),
                               GraphonSpec{StepBlock{{{0.1, 0.2, 0.3}, {0.2, 0.5, 0.4}, {0.3, 0.4, 0.9}}}, {}, {}}};
  for (const auto& s : specs) {
    const auto exact = degree_function(s, {0.5, 2.0});
    const auto quadr = degree_function(s, {0.5, 2.0}, 64, Integration::quadrature);
    ASSERT_TRUE(exact.exact());
    ASSERT_FALSE(quadr.exact());
    for (double l = 0.005; l < 1.0; l += 0.01) EXPECT_NEAR(quadr.at(l), exact.at(l), 1e-12) << l;
    for (double a : {0.5, 1.0, 2.0}) EXPECT_NEAR(quadr.moment(a), exact.moment(a), 1e-12) << a;
  }
}

TEST(DegreeFunction, MeanEqualsAverageOfValues) {
  const auto s = degree_function(smooth(0.1, 0.8), {});
  double sum = 0.0;
  const int m = 100000;
  for (int i = 0; i < m; ++i) sum += s.at((i + 0.5) / m);
  EXPECT_NEAR(s.mean(), sum / m, 1e-8);
  EXPECT_NEAR(s.mean(), 0.1 + 0.8 / 4.0, 1e-10);
}

TEST(DegreeFunction, RejectsTooFewPoints) { EXPECT_THROW(degree_function(constant(0.5), {}, 1), std::invalid_argument); }

TEST(SampleGraph, EdgeDensityWithinBinomialBounds) {
  const std::size_t n = 1000;
  const auto g = sample_graph(constant(0.5), n, 11);
  const double trials = n * (n - 1) / 2.0;
  const double sd = std::sqrt(trials * 0.25);
  EXPECT_LE(std::abs(double(g.edge_count()) - 0.5 * trials), 4.0 * sd);
}

TEST(SampleGraph, Deterministic) {
  const auto a = sample_graph(smooth(0.2, 0.5), 300, 42);
  const auto b = sample_graph(smooth(0.2, 0.5), 300, 42);
  const auto c = sample_graph(smooth(0.2, 0.5), 300, 43);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_EQ(a.latents(), b.latents());
  EXPECT_NE(a.edges(), c.edges());
}

TEST(SampleGraph, AdjacencyInvariants) {
  const auto g = sample_graph(two_block(0.5, 0.1), 200, 3);
  std::size_t deg_sum = 0;
  for (Vertex i = 0; i < g.n(); ++i) {
    EXPECT_FALSE(g.has_edge(i, i));
    deg_sum += g.degree(i);
    for (Vertex j : g.neighbors(i)) EXPECT_TRUE(g.has_edge(j, i));
  }
  EXPECT_EQ(deg_sum, 2 * g.edge_count());
  for (double l : g.latents()) {
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, 1.0);
  }
}

TEST(SampleGraph, BinnedEdgeRateMatchesGraphon) {
  const auto spec = smooth(0.1, 0.8);
  const std::size_t n = 1500, bins = 3;
  const auto g = sample_graph(spec, n, 5);
  const auto& lat = g.latents();
  std::vector<double> trials(bins * bins, 0.0), edges(bins * bins, 0.0), psum(bins * bins, 0.0);
  for (Vertex i = 0; i < n; ++i)
    for (Vertex j = i + 1; j < n; ++j) {
      std::size_t a = std::min<std::size_t>(lat[i] * bins, bins - 1), b = std::min<std::size_t>(lat[j] * bins, bins - 1);
      if (a > b) std::swap(a, b);
      const auto k = a * bins + b;
      trials[k] += 1;
      edges[k] += g.has_edge(i, j);
      psum[k] += evaluate(spec, lat[i], lat[j]);
    }
  for (std::size_t k = 0; k < trials.size(); ++k) {
    if (trials[k] == 0) continue;
    const double p = psum[k] / trials[k];
    const double se = std::sqrt(p * (1 - p) / trials[k]);
    EXPECT_LE(std::abs(edges[k] / trials[k] - p), 3.0 * se) << "bin " << k;
  }
}

TEST(SampleGraph, RequiresTwoVertices) { EXPECT_THROW(sample_graph(constant(0.5), 1, 0), std::invalid_argument); }

TEST(EdgeList, WriteFormats) {
  const Pair e[] = {{0, 1}, {1, 2}};
  LatentGraph g(3, e, std::vector<double>{0.1, 0.5, 0.9});
  std::ostringstream es, ls;
  write_edge_list(g, es);
  write_latents(g, ls);
  EXPECT_EQ(es.str(), "0 1\n1 2\n");
  EXPECT_EQ(ls.str(), "0.10000000000000001\n0.5\n0.90000000000000002\n");
}

TEST(Ingest, SimplePairs) {
  std::istringstream in("0 1\n1 2\n");
  const auto r = ingest_edge_list(in, EdgeListFormat::whitespace_pairs);
  EXPECT_EQ(r.graph.n(), 3u);
  EXPECT_EQ(r.graph.edge_count(), 2u);
  EXPECT_FALSE(r.graph.has_latents());
  EXPECT_THROW(r.graph.latents(), std::logic_error);
}

TEST(Ingest, DuplicatesAndSelfLoops) {
  std::istringstream in("0 1\n1 0\n2 2\n# comment\n\n1 2\n");
  const auto r = ingest_edge_list(in, EdgeListFormat::whitespace_pairs);
  EXPECT_EQ(r.graph.edge_count(), 2u);
  EXPECT_EQ(r.duplicates, 1u);
  EXPECT_EQ(r.self_loops, 1u);
}

TEST(Ingest, NumericIdsRemappedInOrder) {
  std::istringstream in("10 200\n200 35\n");
  const auto r = ingest_edge_list(in, EdgeListFormat::whitespace_pairs);
  ASSERT_EQ(r.graph.n(), 3u);
  EXPECT_EQ(r.original_ids, (std::vector<std::string>{"10", "35", "200"}));
  EXPECT_TRUE(r.graph.has_edge(0, 2));
  EXPECT_TRUE(r.graph.has_edge(1, 2));
  EXPECT_FALSE(r.graph.has_edge(0, 1));
}

TEST(Ingest, CsvWithHeaderAndStringIds) {
  std::istringstream in("source,target\nb,a\nc,b\n");
  const auto r = ingest_edge_list(in, EdgeListFormat::csv_with_header);
  EXPECT_EQ(r.graph.n(), 3u);
  EXPECT_EQ(r.original_ids, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(r.graph.has_edge(0, 1));
}

TEST(Ingest, MalformedLineReportsLineNumber) {
  std::istringstream in("0 1\n1 2\n3\n");
  try {
    ingest_edge_list(in, EdgeListFormat::whitespace_pairs);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Rng, StreamsAreIndependentAndDeterministic) {
  Rng a(1, Stream::edges, 0), b(1, Stream::edges, 0), c(1, Stream::latents, 0);
  for (int i = 0; i < 10; ++i) {
    const auto x = a(), y = b(), z = c();
    EXPECT_EQ(x, y);
    EXPECT_NE(x, z);
  }
  Rng r(9);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}
