#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gemb/harness.hpp"
#include "json.hpp"

namespace gemb {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { generate, sample, train, population, verify_a1, verify_t1, verify_t2, shrinkage, linkpred };

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> names{
      {"generate", ExperimentKind::generate},   {"sample", ExperimentKind::sample},
      {"train", ExperimentKind::train},         {"population", ExperimentKind::population},
      {"verify-a1", ExperimentKind::verify_a1}, {"verify-t1", ExperimentKind::verify_t1},
      {"verify-t2", ExperimentKind::verify_t2}, {"shrinkage", ExperimentKind::shrinkage},
      {"linkpred", ExperimentKind::linkpred}};
  return names;
}

inline std::string experiment_name(ExperimentKind k) {
  for (const auto& [name, kind] : experiment_names())
    if (kind == k) return name;
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment(const std::string& s) {
  for (const auto& [name, kind] : experiment_names())
    if (name == s) return kind;
  return std::nullopt;
}

/// Thresholds checked after a run; any failure makes the run exit nonzero.
struct Assertions {
  std::optional<double> max_pair_error;
  std::optional<double> max_vertex_error;
  std::optional<bool> errors_decreasing;     // verify-a1: first n vs last n
  std::optional<bool> gap_decreasing;        // verify-t1: median gap, first n vs last n
  std::optional<double> max_gap;             // verify-t1: median gap at the last n
  std::optional<bool> deviation_decreasing;  // verify-t2
  std::optional<double> max_deviation;       // verify-t2: median deviation at the last n
  std::optional<bool> shrinkage_monotone;    // shrinkage: norms and top singular value non-increasing
  std::optional<double> max_final_singular;  // shrinkage: at the largest xi
  std::optional<double> min_roc_auc;         // linkpred: best over the xi grid
  std::optional<double> min_pr_auc;
};

struct RunManifest {
  std::optional<ExperimentKind> kind;
  std::string source_path;  // manifest file, for the stamp
  std::string text;         // manifest bytes, hashed into every artifact
  std::uint64_t seed = 0;

  std::optional<GraphonSpec> graphon;
  std::size_t n = 0;
  std::optional<std::string> input;  // edge list of a real graph
  EdgeListFormat input_format = EdgeListFormat::whitespace_pairs;

  SchemeConfig scheme;
  TrainConfig train;
  std::size_t runs_per_epoch = 50;

  std::vector<std::size_t> n_list;
  std::vector<std::uint64_t> seeds;
  std::vector<double> xi_grid;
  std::size_t kappa = 64;
  std::size_t reps = 10000;
  std::size_t bins = 4;
  std::size_t samples = 1;
  double holdout = 0.1;
  double classifier = 0.1;
  std::size_t repeats = 1;
  unsigned threads = 1;
  Assertions asserts;
};

class ManifestError : public std::runtime_error {
 public:
  explicit ManifestError(const std::vector<std::string>& errs)
      : std::runtime_error(join(errs)), errors_(errs) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string s = "invalid manifest:";
    for (const auto& e : errs) s += "\n  " + e;
    return s;
  }
  std::vector<std::string> errors_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string manifest_hash(const RunManifest& m) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(m.text);
  return os.str();
}

namespace detail {

namespace pt = boost::property_tree;

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) {
    auto t = trim(cur);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// Typed access to an INI tree that records every problem instead of
/// stopping at the first.
class ManifestReader {
 public:
  explicit ManifestReader(const pt::ptree& root) : root_(root) {}

  std::optional<std::string> raw(const std::string& path) {
    used_.insert(path);
    if (auto v = root_.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return std::string(trim(*v));
    return std::nullopt;
  }

  template <class T>
  std::optional<T> get(const std::string& path) {
    auto s = raw(path);
    if (!s) return std::nullopt;
    T v{};
    if (!convert(*s, v)) {
      errors.push_back(path + ": cannot parse '" + *s + "'");
      return std::nullopt;
    }
    return v;
  }

  template <class T>
  T get(const std::string& path, T fallback) {
    auto v = get<T>(path);
    return v ? *v : fallback;
  }

  template <class T>
  std::vector<T> list(const std::string& path) {
    std::vector<T> out;
    auto s = raw(path);
    if (!s) return out;
    for (const auto& item : split_list(*s, ',')) {
      T v{};
      if (!convert(item, v)) errors.push_back(path + ": cannot parse list item '" + item + "'");
      else out.push_back(v);
    }
    return out;
  }

  void check_unknown() {
    for (const auto& [sec, child] : root_) {
      if (child.empty()) {
        if (!used_.count(sec)) errors.push_back("unknown key '" + sec + "'");
        continue;
      }
      for (const auto& [key, _] : child)
        if (!used_.count(sec + "." + key)) errors.push_back("unknown key '" + sec + "." + key + "'");
    }
  }

  std::vector<std::string> errors;

 private:
  static bool convert(const std::string& s, std::string& v) {
    v = s;
    return true;
  }
  static bool convert(const std::string& s, bool& v) {
    if (s == "true" || s == "1" || s == "yes") v = true;
    else if (s == "false" || s == "0" || s == "no") v = false;
    else return false;
    return true;
  }
  template <class T>
  static bool convert(const std::string& s, T& v) {
    std::istringstream ss(s);
    ss >> v;
    return ss && ss.peek() == std::char_traits<char>::eof() && !(std::is_unsigned_v<T> && s.front() == '-');
  }

  const pt::ptree& root_;
  std::set<std::string> used_;
};

inline std::optional<GraphonSpec> read_graphon(ManifestReader& r) {
  auto family = r.raw("graphon.family");
  if (!family) return std::nullopt;
  GraphonSpec spec;
  if (*family == "constant") {
    spec.family = Constant{r.get<double>("graphon.p", 0.5)};
  } else if (*family == "step") {
    StepBlock b;
    if (auto rows = r.raw("graphon.blocks")) {
      for (const auto& row : split_list(*rows, ';')) {
        std::vector<double> vals;
        for (const auto& v : split_list(row, ',')) {
          try {
            vals.push_back(std::stod(v));
          } catch (const std::exception&) {
            r.errors.push_back("graphon.blocks: cannot parse '" + v + "'");
          }
        }
        b.values.push_back(std::move(vals));
      }
    } else {
      r.errors.push_back("graphon.blocks: required for family = step");
    }
    spec.family = std::move(b);
  } else if (*family == "smooth") {
    spec.family = SmoothProduct{r.get<double>("graphon.a", 0.25), r.get<double>("graphon.b", 0.5)};
  } else {
    r.errors.push_back("graphon.family: expected constant, step or smooth, got '" + *family + "'");
  }
  spec.sparsity.scale = r.get<double>("graphon.scale", 1.0);
  spec.sparsity.gamma = r.get<double>("graphon.gamma", 0.0);
  spec.holder.beta = r.get<double>("graphon.beta", spec.holder.beta);
  spec.holder.L = r.get<double>("graphon.L", spec.holder.L);
  for (const auto& e : validation_errors(spec)) r.errors.push_back("graphon: " + e);
  return spec;
}

inline SchemeConfig read_scheme(ManifestReader& r) {
  SchemeConfig cfg;
  const auto kind = r.get<std::string>("scheme.kind", "uniform-vertex");
  const auto k = r.get<std::size_t>("scheme.k", 5);
  const auto l = r.get<std::size_t>("scheme.l", 5);
  const auto alpha = r.get<double>("scheme.alpha", 1.0);
  if (kind == "uniform-vertex") cfg.kind = UniformVertex{k};
  else if (kind == "uniform-edge") cfg.kind = UniformEdge{k, l, alpha};
  else if (kind == "random-walk") cfg.kind = RandomWalk{k, l, alpha};
  else r.errors.push_back("scheme.kind: expected uniform-vertex, uniform-edge or random-walk, got '" + kind + "'");
  const auto uni = r.get<std::string>("scheme.unigram", "degree");
  if (uni == "degree") cfg.unigram = DegreePower{};
  else if (uni == "exact") cfg.unigram = ExactCombinatorial{};
  else if (uni == "monte-carlo")
    cfg.unigram = MonteCarloUnigram{r.get<std::size_t>("scheme.unigram_reps", 10000), r.get<std::uint64_t>("scheme.unigram_seed", 0)};
  else r.errors.push_back("scheme.unigram: expected degree, exact or monte-carlo, got '" + uni + "'");
  for (const auto& e : validation_errors(cfg)) r.errors.push_back("scheme: " + e);
  return cfg;
}

inline TrainConfig read_train(ManifestReader& r, bool stochastic_default) {
  TrainConfig cfg;
  cfg.d = r.get<std::size_t>("train.d", 2);
  cfg.A = r.get<double>("train.A", 10.0);
  cfg.xi = r.get<double>("train.xi", 0.0);
  cfg.restarts = r.get<std::size_t>("train.restarts", 3);
  const auto opt = r.get<std::string>("train.optimizer", stochastic_default ? "adam" : "projected-gradient");
  if (opt == "adam") {
    AdamConfig a;
    a.lr = r.get<double>("train.lr", a.lr);
    a.beta1 = r.get<double>("train.beta1", a.beta1);
    a.beta2 = r.get<double>("train.beta2", a.beta2);
    a.eps = r.get<double>("train.eps", a.eps);
    a.epochs = r.get<std::size_t>("train.epochs", a.epochs);
    a.batch = r.get<std::size_t>("train.batch", a.batch);
    cfg.optimizer = a;
  } else if (opt == "projected-gradient") {
    ProjectedGradientConfig p;
    p.lr = r.get<double>("train.lr", p.lr);
    p.max_iters = r.get<std::size_t>("train.max_iters", p.max_iters);
    p.tol = r.get<double>("train.tol", p.tol);
    cfg.optimizer = p;
  } else {
    r.errors.push_back("train.optimizer: expected adam or projected-gradient, got '" + opt + "'");
  }
  const auto init = r.get<std::string>("train.init", "gaussian");
  if (init == "gaussian") cfg.init = GaussianScaled{r.get<double>("train.sigma0", -1.0)};
  else if (init == "zero") cfg.init = ZeroInit{};
  else r.errors.push_back("train.init: expected gaussian or zero, got '" + init + "'");
  // Keys owned by the other optimizer are accepted and ignored.
  for (const char* key : {"lr", "beta1", "beta2", "eps", "epochs", "batch", "max_iters", "tol", "sigma0"})
    r.raw(std::string("train.") + key);
  for (auto e : validation_errors(cfg)) {
    if (e.rfind("xi", 0) == 0) e = "xi must satisfy ξ ≥ 0";
    r.errors.push_back("train: " + e);
  }
  return cfg;
}

}  // namespace detail

/// Parses and validates a manifest. Syntax errors carry the line number;
/// semantic errors are collected and reported together.
inline RunManifest parse_manifest(const std::string& text, const std::string& source = "<memory>",
                                  std::optional<ExperimentKind> kind_override = std::nullopt) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  detail::ManifestReader r(root);
  RunManifest m;
  m.source_path = source;
  m.text = text;

  if (auto k = r.raw("kind")) {
    m.kind = parse_experiment(*k);
    if (!m.kind) r.errors.push_back("kind: unknown experiment '" + *k + "'");
  }
  if (kind_override) {
    if (m.kind && *m.kind != *kind_override)
      r.errors.push_back("kind: manifest declares '" + experiment_name(*m.kind) + "' but '" +
                         experiment_name(*kind_override) + "' was requested");
    m.kind = kind_override;
  }
  if (auto s = r.get<std::uint64_t>("seed")) m.seed = *s;
  else r.errors.push_back("seed: required (no ambient entropy)");

  m.graphon = detail::read_graphon(r);
  m.n = r.get<std::size_t>("graph.n", 0);
  m.input = r.get<std::string>("graph.input");
  const auto fmt = r.get<std::string>("graph.format", "whitespace");
  if (fmt == "csv") m.input_format = EdgeListFormat::csv_with_header;
  else if (fmt != "whitespace") r.errors.push_back("graph.format: expected whitespace or csv");

  const bool stochastic = m.kind == ExperimentKind::linkpred;
  m.scheme = detail::read_scheme(r);
  m.train = detail::read_train(r, stochastic);
  m.runs_per_epoch = r.get<std::size_t>("train.runs_per_epoch", 50);

  m.n_list = r.list<std::size_t>("experiment.n_list");
  m.seeds = r.list<std::uint64_t>("experiment.seeds");
  m.xi_grid = r.list<double>("experiment.xi_grid");
  m.kappa = r.get<std::size_t>("experiment.kappa", 64);
  m.reps = r.get<std::size_t>("experiment.reps", 10000);
  m.bins = r.get<std::size_t>("experiment.bins", 4);
  m.samples = r.get<std::size_t>("experiment.samples", 1);
  m.holdout = r.get<double>("experiment.holdout", 0.1);
  m.classifier = r.get<double>("experiment.classifier", 0.1);
  m.repeats = r.get<std::size_t>("experiment.repeats", 1);
  m.threads = r.get<unsigned>("experiment.threads", 1);

  auto& a = m.asserts;
  a.max_pair_error = r.get<double>("assert.max_pair_error");
  a.max_vertex_error = r.get<double>("assert.max_vertex_error");
  a.errors_decreasing = r.get<bool>("assert.errors_decreasing");
  a.gap_decreasing = r.get<bool>("assert.gap_decreasing");
  a.max_gap = r.get<double>("assert.max_gap");
  a.deviation_decreasing = r.get<bool>("assert.deviation_decreasing");
  a.max_deviation = r.get<double>("assert.max_deviation");
  a.shrinkage_monotone = r.get<bool>("assert.shrinkage_monotone");
  a.max_final_singular = r.get<double>("assert.max_final_singular");
  a.min_roc_auc = r.get<double>("assert.min_roc_auc");
  a.min_pr_auc = r.get<double>("assert.min_pr_auc");
  r.check_unknown();

  // Cross-field validation.
  auto& errs = r.errors;
  if (!m.kind) errs.push_back("kind: required");
  if (m.graphon && m.input) errs.push_back("graph: give either a graphon or graph.input, not both");
  if (m.input && !std::filesystem::exists(*m.input)) errs.push_back("graph.input: no such file '" + *m.input + "'");
  if (m.kappa < 1) errs.push_back("experiment.kappa: must be >= 1");
  if (m.bins < 1) errs.push_back("experiment.bins: must be >= 1");
  if (m.reps < 1) errs.push_back("experiment.reps: must be >= 1");
  if (m.threads < 1) errs.push_back("experiment.threads: must be >= 1");
  for (double x : m.xi_grid)
    if (!(x >= 0.0)) errs.push_back("experiment.xi_grid: every entry must satisfy ξ ≥ 0");
  if (!(m.holdout > 0.0 && m.holdout < 1.0)) errs.push_back("experiment.holdout: must be in (0, 1)");
  if (!(m.classifier > 0.0 && m.classifier < 1.0)) errs.push_back("experiment.classifier: must be in (0, 1)");

  if (m.kind) {
    using K = ExperimentKind;
    const K k = *m.kind;
    const bool needs_latents = k == K::population || k == K::verify_a1 || k == K::verify_t1 || k == K::verify_t2;
    const bool needs_graph = k == K::generate || k == K::sample || k == K::train || k == K::shrinkage || k == K::linkpred;
    if (needs_latents && !m.graphon)
      errs.push_back("graphon: '" + experiment_name(k) + "' needs latent positions, so a graphon is required");
    if (k == K::generate && !m.graphon) errs.push_back("graphon: required for generate");
    if (needs_graph && !m.graphon && !m.input) errs.push_back("graph: a graphon or graph.input is required");
    if (m.graphon && (needs_graph || k == K::population) && m.n < 2)
      errs.push_back("graph.n: must be >= 2");
    if (k == K::shrinkage && m.input) errs.push_back("graph.input: shrinkage uses formula weights, which need latents");
    if ((k == K::verify_a1 || k == K::verify_t1 || k == K::verify_t2) && m.n_list.empty())
      errs.push_back("experiment.n_list: must be non-empty");
    if ((k == K::verify_t1 || k == K::verify_t2) && m.seeds.empty()) errs.push_back("experiment.seeds: must be non-empty");
    if (k == K::shrinkage && m.xi_grid.empty()) errs.push_back("experiment.xi_grid: must be non-empty");

    // Scheme size against every graph size the run will use.
    std::vector<std::size_t> sizes = m.n_list;
    if (m.n >= 2) sizes.push_back(m.n);
    if (const auto* uv = std::get_if<UniformVertex>(&m.scheme.kind))
      for (std::size_t n : sizes)
        if (uv->k > n) {
          errs.push_back("scheme.k: uniform-vertex needs k <= n (k = " + std::to_string(uv->k) +
                         ", n = " + std::to_string(n) + ")");
          break;
        }
    if (m.graphon && errs.empty())
      for (std::size_t n : sizes)
        for (const auto& e : validation_errors(*m.graphon, n)) errs.push_back("graphon at n = " + std::to_string(n) + ": " + e);
  }
  if (!errs.empty()) throw ManifestError(errs);
  return m;
}

inline RunManifest load_manifest(const std::string& path, std::optional<ExperimentKind> kind = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path, kind);
}

// ---------------------------------------------------------------------------
// Running

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  std::vector<std::string> artifacts;
  std::vector<AssertionResult> assertions;
  bool ok() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
  }
};

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
    std::filesystem::create_directories(dir_);
  }

  /// Text artifact whose first line is a comment naming the manifest hash.
  void text(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(dir_ / name, std::ios::binary);
    os << "# manifest " << hash_ << '\n';
    body(os);
    done(name, os);
  }

  void json(const std::string& name, nlohmann::json j) {
    j["manifest_hash"] = hash_;
    std::ofstream os(dir_ / name, std::ios::binary);
    os << j.dump(2) << '\n';
    done(name, os);
  }

  void binary(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(dir_ / name, std::ios::binary);
    body(os);
    done(name, os);
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  void done(const std::string& name, std::ostream& os) {
    if (!os) throw std::runtime_error("failed writing " + (dir_ / name).string());
    names_.push_back(name);
  }
  std::filesystem::path dir_;
  std::string hash_;
  std::vector<std::string> names_;
};

inline std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

struct GraphInput {
  LatentGraph graph;
  nlohmann::json info;
};

inline GraphInput load_graph(const RunManifest& m) {
  GraphInput gi;
  if (m.input) {
    auto r = ingest_edge_list(*m.input, m.input_format);
    gi.info = {{"source", *m.input}, {"duplicates", r.duplicates}, {"self_loops", r.self_loops}};
    gi.graph = std::move(r.graph);
  } else {
    gi.graph = sample_graph(*m.graphon, m.n, derive_seed(m.seed, Stream::edges, m.n));
    gi.info = {{"source", "graphon"}, {"rho", gi.graph.rho()}};
  }
  gi.info["n"] = gi.graph.n();
  gi.info["edges"] = gi.graph.edge_count();
  return gi;
}

inline void require_valid_scheme(const SchemeConfig& s, const LatentGraph& g) {
  const auto errs = validation_errors(s, g);
  if (!errs.empty()) throw ManifestError(errs);
}

}  // namespace detail

/// Executes a validated manifest, writing artifacts under out_dir.
inline RunResult run(const RunManifest& m, const std::filesystem::path& out_dir) {
  using K = ExperimentKind;
  const std::string hash = manifest_hash(m);
  detail::ArtifactWriter w(out_dir, hash);
  RunResult res;
  auto check = [&](const std::string& name, bool passed, const std::string& detail) {
    res.assertions.push_back({name, passed, detail});
  };
  const auto t0 = std::chrono::steady_clock::now();
  const K kind = *m.kind;
  nlohmann::json report;
  report["experiment"] = experiment_name(kind);

  switch (kind) {
    case K::generate: {
      const auto gi = detail::load_graph(m);
      w.text("edges.txt", [&](std::ostream& os) { write_edge_list(gi.graph, os); });
      w.text("latents.txt", [&](std::ostream& os) { write_latents(gi.graph, os); });
      report["graph"] = gi.info;
      break;
    }
    case K::sample: {
      const auto gi = detail::load_graph(m);
      detail::require_valid_scheme(m.scheme, gi.graph);
      const SubsampleDrawer drawer(gi.graph, m.scheme);
      nlohmann::json sizes = nlohmann::json::array();
      for (std::size_t s = 0; s < m.samples; ++s) {
        Rng rng(m.seed, Stream::subsample, s);
        const Subsample sub = drawer.draw(rng);
        w.text("subsample_" + std::to_string(s) + ".txt", [&](std::ostream& os) { write_labeled_pairs(sub, os); });
        sizes.push_back({{"vertices", sub.vertices.size()}, {"positives", sub.positives.size()},
                         {"negatives", sub.negatives.size()}});
      }
      report["graph"] = gi.info;
      report["scheme"] = scheme_name(m.scheme);
      report["subsamples"] = sizes;
      break;
    }
    case K::train: {
      const auto gi = detail::load_graph(m);
      detail::require_valid_scheme(m.scheme, gi.graph);
      TrainConfig cfg = m.train;
      cfg.seed = derive_seed(m.seed, Stream::init);
      EmbeddingMatrix emb;
      if (std::holds_alternative<AdamConfig>(cfg.optimizer)) {
        emb = train_sgd(gi.graph, m.scheme, cfg, m.runs_per_epoch);
        report["mode"] = "stochastic";
      } else {
        if (!gi.graph.has_latents())
          throw std::invalid_argument("full-batch training needs formula weights, which need latents; use optimizer = adam");
        const auto r = train_full(gi.graph, formula_weights(m.scheme, *m.graphon, gi.graph), cfg);
        emb = r.embedding;
        report["mode"] = "full";
        report["objective"] = r.objective;
        report["trace"] = r.trace;
        report["converged"] = r.converged;
        report["iterations"] = r.iterations;
      }
      const auto spec = gram_spectrum(emb);
      std::vector<double> sv(spec.singular_values.data(), spec.singular_values.data() + spec.singular_values.size());
      report["frobenius_sq"] = spec.frobenius_sq;
      report["singular_values"] = sv;
      report["near_box"] = near_box_count(emb);
      report["graph"] = gi.info;
      w.text("embedding.csv", [&](std::ostream& os) { write_embedding_csv(emb, os); });
      w.binary("embedding.gemb", [&](std::ostream& os) { write_embedding_binary(emb, os); });
      break;
    }
    case K::population: {
      const double rho = m.graphon->sparsity.rho(m.n);
      const auto dw = discretize_weights(*m.graphon, rho, m.scheme, m.kappa);
      const std::vector<double> grid = m.xi_grid.empty() ? std::vector<double>{m.train.xi} : m.xi_grid;
      nlohmann::json solves = nlohmann::json::array();
      for (std::size_t t = 0; t < grid.size(); ++t) {
        const auto k = minimize_psd(dw, grid[t]);
        const std::string base = "kernel_" + std::to_string(t);
        w.text(base + ".csv", [&](std::ostream& os) { write_kernel_csv(k, os); });
        auto side = kernel_sidecar(k, dw, grid[t], m.train.A);
        w.json(base + ".json", side);
        solves.push_back(side);
      }
      report["rho"] = rho;
      report["solves"] = solves;
      break;
    }
    case K::verify_a1: {
      const auto recs = verify_assumption1(*m.graphon, m.scheme, m.n_list, m.reps, m.bins, m.seed, m.threads);
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : recs) arr.push_back(to_json(r));
      report["records"] = arr;
      w.text("inclusion.csv", [&](std::ostream& os) { write_inclusion_csv(recs, os); });
      const auto& last = recs.back();
      if (m.asserts.max_pair_error)
        check("max_pair_error", last.pair_max_error <= *m.asserts.max_pair_error,
              detail::fmt(last.pair_max_error) + " <= " + detail::fmt(*m.asserts.max_pair_error));
      if (m.asserts.max_vertex_error)
        check("max_vertex_error", last.vertex_max_error <= *m.asserts.max_vertex_error,
              detail::fmt(last.vertex_max_error) + " <= " + detail::fmt(*m.asserts.max_vertex_error));
      if (m.asserts.errors_decreasing && *m.asserts.errors_decreasing)
        check("errors_decreasing",
              last.pair_max_error < recs.front().pair_max_error && last.vertex_max_error < recs.front().vertex_max_error,
              "pair " + detail::fmt(recs.front().pair_max_error) + " -> " + detail::fmt(last.pair_max_error) +
                  ", vertex " + detail::fmt(recs.front().vertex_max_error) + " -> " + detail::fmt(last.vertex_max_error));
      break;
    }
    case K::verify_t1:
    case K::verify_t2: {
      ConvergenceSetup setup{*m.graphon, m.scheme, m.train.xi, m.train, m.kappa};
      const auto recs = verify_convergence(setup, m.n_list, m.seeds);
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : recs) arr.push_back(to_json(r));
      report["records"] = arr;
      report["assumptions"] = {{"note", "regularity constants beta*, L*, A' are not computable; A is a run parameter"},
                               {"A", m.train.A}};
      w.text("convergence.csv", [&](std::ostream& os) { write_convergence_csv(recs, os); });
      const auto gap = median_by_n(recs, [](const ConvergenceRecord& r) { return r.gap; });
      const auto dev = median_by_n(recs, [](const ConvergenceRecord& r) { return r.gram_deviation; });
      const std::size_t first = m.n_list.front(), last = m.n_list.back();
      nlohmann::json med;
      for (std::size_t n : m.n_list) med[std::to_string(n)] = {{"gap", gap.at(n)}, {"gram_deviation", dev.at(n)}};
      report["medians"] = med;
      if (m.asserts.gap_decreasing && *m.asserts.gap_decreasing)
        check("gap_decreasing", gap.at(last) < gap.at(first), detail::fmt(gap.at(first)) + " -> " + detail::fmt(gap.at(last)));
      if (m.asserts.max_gap)
        check("max_gap", gap.at(last) <= *m.asserts.max_gap, detail::fmt(gap.at(last)) + " <= " + detail::fmt(*m.asserts.max_gap));
      if (m.asserts.deviation_decreasing && *m.asserts.deviation_decreasing)
        check("deviation_decreasing", dev.at(last) < dev.at(first),
              detail::fmt(dev.at(first)) + " -> " + detail::fmt(dev.at(last)));
      if (m.asserts.max_deviation)
        check("max_deviation", dev.at(last) <= *m.asserts.max_deviation,
              detail::fmt(dev.at(last)) + " <= " + detail::fmt(*m.asserts.max_deviation));
      break;
    }
    case K::shrinkage: {
      const auto gi = detail::load_graph(m);
      TrainConfig cfg = m.train;
      cfg.seed = derive_seed(m.seed, Stream::init);
      const auto recs = shrinkage_curve(gi.graph, formula_weights(m.scheme, *m.graphon, gi.graph), m.xi_grid, cfg);
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : recs) arr.push_back(to_json(r));
      report["records"] = arr;
      w.text("shrinkage.csv", [&](std::ostream& os) { write_shrinkage_csv(recs, os); });
      if (m.asserts.shrinkage_monotone && *m.asserts.shrinkage_monotone) {
        bool ok = true;
        for (std::size_t t = 1; t < recs.size(); ++t) {
          const double tol = 1e-9;
          ok = ok && recs[t].mean_sq_norm <= recs[t - 1].mean_sq_norm * (1 + tol) + tol;
          ok = ok && recs[t].top_singular_values.front() <= recs[t - 1].top_singular_values.front() * (1 + tol) + tol;
        }
        for (const auto& r : recs)
          if (r.xi > 0.0) ok = ok && r.mean_sq_norm <= r.objective_at_zero / r.xi;
        check("shrinkage_monotone", ok, "norms and top singular value non-increasing in xi, bounded by objective(0)/xi");
      }
      if (m.asserts.max_final_singular) {
        const double s = recs.back().top_singular_values.front();
        check("max_final_singular", s <= *m.asserts.max_final_singular,
              detail::fmt(s) + " <= " + detail::fmt(*m.asserts.max_final_singular));
      }
      break;
    }
    case K::linkpred: {
      const auto gi = detail::load_graph(m);
      detail::require_valid_scheme(m.scheme, gi.graph);
      const std::vector<double> grid = m.xi_grid.empty() ? std::vector<double>{m.train.xi} : m.xi_grid;
      nlohmann::json arr = nlohmann::json::array();
      double best_roc = 0.0, best_pr = 0.0;
      std::ostringstream csv;
      csv.precision(17);
      csv << "xi,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std\n";
      for (double xi : grid) {
        LinkPredictionSetup setup{m.scheme, m.train, m.runs_per_epoch, m.holdout, m.classifier, m.repeats,
                                  derive_seed(m.seed, Stream::split)};
        setup.train.xi = xi;
        const auto r = link_prediction_eval(gi.graph, setup);
        auto j = to_json(r);
        j["xi"] = xi;
        arr.push_back(j);
        best_roc = std::max(best_roc, r.roc_mean);
        best_pr = std::max(best_pr, r.pr_mean);
        csv << xi << ',' << r.roc_mean << ',' << r.roc_std << ',' << r.pr_mean << ',' << r.pr_std << '\n';
      }
      report["graph"] = gi.info;
      report["records"] = arr;
      w.text("linkpred.csv", [&](std::ostream& os) { os << csv.str(); });
      if (m.asserts.min_roc_auc)
        check("min_roc_auc", best_roc >= *m.asserts.min_roc_auc, detail::fmt(best_roc) + " >= " + detail::fmt(*m.asserts.min_roc_auc));
      if (m.asserts.min_pr_auc)
        check("min_pr_auc", best_pr >= *m.asserts.min_pr_auc, detail::fmt(best_pr) + " >= " + detail::fmt(*m.asserts.min_pr_auc));
      break;
    }
  }

  nlohmann::json asserts = nlohmann::json::array();
  for (const auto& a : res.assertions) asserts.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  report["assertions"] = asserts;
  w.json("report.json", report);

  // Timestamps and runtimes live only in the stamp so the other artifacts
  // stay byte-identical across reruns.
  const auto now = std::chrono::system_clock::now();
  w.json("stamp.json", {{"manifest", m.source_path},
                        {"seed", m.seed},
                        {"seeds", m.seeds},
                        {"version", kVersion},
                        {"artifacts", w.names()},
                        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                        {"unix_time", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()}});
  res.artifacts = w.names();
  return res;
}

}  // namespace gemb
