#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gemb/optim.hpp"
#include "gemb/risk.hpp"
#include "gemb/sampler.hpp"

namespace gemb {

struct ProjectedGradientConfig {
  double lr = 1.0;
  std::size_t max_iters = 20000;
  double tol = 1e-9;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 5;
  std::size_t batch = 64;
};

using OptimizerConfig = std::variant<ProjectedGradientConfig, AdamConfig>;

struct GaussianScaled {
  double sigma0 = -1.0;  // negative means 0.1 / sqrt(d)
};
struct ZeroInit {};
using InitConfig = std::variant<GaussianScaled, ZeroInit>;

struct TrainConfig {
  std::size_t d = 2;
  double A = 10.0;
  double xi = 0.0;
  OptimizerConfig optimizer = ProjectedGradientConfig{};
  InitConfig init = GaussianScaled{};
  std::uint64_t seed = 0;
  std::size_t restarts = 3;
};

inline std::vector<std::string> validation_errors(const TrainConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.d < 1) errs.push_back("d must be >= 1");
  if (!(cfg.A > 0.0)) errs.push_back("A must be > 0");
  if (!(cfg.xi >= 0.0)) errs.push_back("xi must be >= 0");
  if (cfg.restarts < 1) errs.push_back("restarts must be >= 1");
  std::visit(
      [&](const auto& o) {
        if (!(o.lr > 0.0)) errs.push_back("lr must be > 0");
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, AdamConfig>) {
          if (o.batch < 1) errs.push_back("batch must be >= 1");
        } else {
          if (!(o.tol >= 0.0)) errs.push_back("tol must be >= 0");
        }
      },
      cfg.optimizer);
  return errs;
}

inline void validate(const TrainConfig& cfg) {
  const auto errs = validation_errors(cfg);
  if (errs.empty()) return;
  std::string msg = "invalid training config:";
  for (const auto& e : errs) msg += "\n  " + e;
  throw std::invalid_argument(msg);
}

inline Matrix initial_embedding(std::size_t n, const TrainConfig& cfg, std::uint64_t restart) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.d));
  if (const auto* g = std::get_if<GaussianScaled>(&cfg.init)) {
    const double s = g->sigma0 >= 0.0 ? g->sigma0 : 0.1 / std::sqrt(static_cast<double>(cfg.d));
    Rng rng(cfg.seed, Stream::init, restart);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  }
  return m.cwiseMax(-cfg.A).cwiseMin(cfg.A);
}

struct TrainResult {
  EmbeddingMatrix embedding;
  std::vector<double> trace;  // objective values of the kept run
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t restart = 0;
};

namespace detail {

inline ProjectedGradientOptions pg_options(const TrainConfig& cfg) {
  ProjectedGradientOptions opt;
  if (const auto* pg = std::get_if<ProjectedGradientConfig>(&cfg.optimizer)) {
    opt.lr = pg->lr;
    opt.max_iters = pg->max_iters;
    opt.tol = pg->tol;
  }
  return opt;
}

}  // namespace detail

/// Projected descent on a prepared objective from a given start.
inline TrainResult train_full_from(const EmpiricalObjective& objective, Matrix start, const TrainConfig& cfg) {
  validate(cfg);
  const double A = cfg.A;
  auto f = [&](const Matrix& x, Matrix* g) { return objective(x, g); };
  auto project = [A](Matrix& x) { x = x.cwiseMax(-A).cwiseMin(A); };
  auto r = projected_gradient(std::move(start), f, project, detail::pg_options(cfg));
  TrainResult out;
  out.embedding = EmbeddingMatrix(std::move(r.x), A);
  out.trace = std::move(r.trace);
  out.objective = r.value;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

/// Minimizes the weighted empirical risk over ([-A, A]^d)^n, keeping the best
/// of cfg.restarts random starts (a zero start is run once).
inline TrainResult train_full(const EmpiricalObjective& objective, const TrainConfig& cfg) {
  validate(cfg);
  const std::size_t runs = std::holds_alternative<ZeroInit>(cfg.init) ? 1 : cfg.restarts;
  TrainResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < runs; ++r) {
    auto res = train_full_from(objective, initial_embedding(objective.n(), cfg, r), cfg);
    if (res.objective < best.objective) {
      best = std::move(res);
      best.restart = r;
    }
  }
  return best;
}

inline TrainResult train_full(const LatentGraph& g, const RiskWeights& w, const TrainConfig& cfg) {
  const EmpiricalObjective objective(w, g, RiskConfig{cfg.xi, Normalization::per_graph});
  return train_full(objective, cfg);
}

/// Stochastic training over freshly drawn subsamples. Each epoch draws
/// runs_per_epoch subsamples per vertex; gradients of the subsample loss are
/// averaged over minibatches of cfg.batch subsamples and applied with Adam,
/// clipping to the box after every step.
inline EmbeddingMatrix train_sgd(const LatentGraph& g, const SchemeConfig& scheme, const TrainConfig& cfg,
                                 std::size_t runs_per_epoch) {
  validate(cfg);
  if (const auto errs = validation_errors(scheme, g); !errs.empty())
    throw std::invalid_argument("train_sgd: " + errs.front());
  const AdamConfig adam_cfg =
      std::holds_alternative<AdamConfig>(cfg.optimizer) ? std::get<AdamConfig>(cfg.optimizer) : AdamConfig{};

  EmbeddingMatrix emb(initial_embedding(g.n(), cfg, 0), cfg.A);
  Adam<Matrix> adam(emb.rows.rows(), emb.rows.cols(),
                    AdamOptions{adam_cfg.lr, adam_cfg.beta1, adam_cfg.beta2, adam_cfg.eps});
  const SubsampleDrawer drawer(g, scheme);
  const RiskConfig rc{cfg.xi, Normalization::raw};
  const std::size_t per_epoch = runs_per_epoch * g.n();
  Matrix grad = Matrix::Zero(emb.rows.rows(), emb.rows.cols());

  for (std::size_t epoch = 0; epoch < adam_cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, Stream::training, epoch);
    std::size_t in_batch = 0;
    for (std::size_t t = 0; t < per_epoch; ++t) {
      const Subsample s = drawer.draw(rng);
      add_stochastic_loss(emb, s, rc, grad);
      if (++in_batch == adam_cfg.batch || t + 1 == per_epoch) {
        grad /= static_cast<double>(in_batch);
        adam.step(emb.rows, grad);
        emb.clip();
        if (!emb.rows.allFinite()) throw NonFiniteObjective("train_sgd: embeddings became non-finite");
        grad.setZero();
        in_batch = 0;
      }
    }
  }
  return emb;
}

struct GramSpectrum {
  double frobenius_sq = 0.0;            // ||Omega||_F^2 = trace(Omega^T Omega)
  Eigen::VectorXd singular_values;      // of Omega, descending
  bool consistent = true;               // sum sigma^2 == ||Omega||_F^2 to 1e-8
};

inline GramSpectrum gram_spectrum(const EmbeddingMatrix& emb) {
  GramSpectrum out;
  out.frobenius_sq = emb.rows.squaredNorm();
  if (emb.rows.size() == 0) {
    out.singular_values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.d()));
    return out;
  }
  const Eigen::MatrixXd dense = emb.rows;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  out.singular_values = svd.singularValues();
  const double s2 = out.singular_values.squaredNorm();
  out.consistent = std::abs(s2 - out.frobenius_sq) <= 1e-8 * std::max(1.0, out.frobenius_sq);
  return out;
}

inline Eigen::MatrixXd gram_matrix(const EmbeddingMatrix& emb) { return emb.rows * emb.rows.transpose(); }

/// Count of coordinates within 1% of the box bound.
inline std::size_t near_box_count(const EmbeddingMatrix& emb) {
  return static_cast<std::size_t>((emb.rows.array().abs() >= 0.99 * emb.box).count());
}

// ---------------------------------------------------------------------------
// Embedding persistence

inline void write_embedding_csv(const EmbeddingMatrix& emb, std::ostream& os) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "id";
  for (std::size_t k = 0; k < emb.d(); ++k) buf << ",dim" << k;
  buf << '\n';
  for (Eigen::Index i = 0; i < emb.rows.rows(); ++i) {
    buf << i;
    for (Eigen::Index k = 0; k < emb.rows.cols(); ++k) buf << ',' << emb.rows(i, k);
    buf << '\n';
  }
  os << buf.str();
}

inline EmbeddingMatrix read_embedding_csv(std::istream& in, double box) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("id", 0) != 0) throw ParseError("expected header 'id,dim0,...'", 1);
  const auto d = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("bad number '" + cell + "'", lineno);
      }
    }
    if (row.size() != d) throw ParseError("expected " + std::to_string(d) + " coordinates", lineno);
    rows.push_back(std::move(row));
  }
  EmbeddingMatrix emb(rows.size(), d, box);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) emb.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return emb;
}

inline constexpr char kEmbeddingMagic[5] = {'G', 'E', 'M', 'B', '1'};

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline std::uint64_t get_le(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated embedding file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void write_embedding_binary(const EmbeddingMatrix& emb, std::ostream& os) {
  os.write(kEmbeddingMagic, 5);
  detail::put_le(os, emb.n());
  detail::put_le(os, emb.d());
  for (Eigen::Index i = 0; i < emb.rows.size(); ++i)
    detail::put_le(os, std::bit_cast<std::uint64_t>(emb.rows.data()[i]));
}

inline EmbeddingMatrix read_embedding_binary(std::istream& is, double box) {
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kEmbeddingMagic, 5) != 0)
    throw std::runtime_error("not a GEMB1 embedding file");
  const auto n = detail::get_le(is), d = detail::get_le(is);
  EmbeddingMatrix emb(n, d, box);
  for (Eigen::Index i = 0; i < emb.rows.size(); ++i) emb.rows.data()[i] = std::bit_cast<double>(detail::get_le(is));
  return emb;
}

}  // namespace gemb
