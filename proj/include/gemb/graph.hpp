#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <compare>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gemb/graphon.hpp"
#include "gemb/rng.hpp"

namespace gemb {

using Vertex = std::uint32_t;

/// Unordered vertex pair stored canonically with u < v.
struct Pair {
  Vertex u = 0;
  Vertex v = 0;

  static Pair of(Vertex a, Vertex b) { return a < b ? Pair{a, b} : Pair{b, a}; }
  std::uint64_t key() const { return (std::uint64_t{u} << 32) | v; }
  static Pair from_key(std::uint64_t k) {
    return {static_cast<Vertex>(k >> 32), static_cast<Vertex>(k & 0xffffffffu)};
  }
  auto operator<=>(const Pair&) const = default;
};

/// Simple undirected graph in CSR form with sorted neighbour lists, plus the
/// latent positions it was drawn from (absent for ingested real graphs).
class LatentGraph {
 public:
  LatentGraph() = default;

  /// Builds from canonical (u < v), deduplicated edges.
  LatentGraph(std::size_t n, std::span<const Pair> edges,
              std::optional<std::vector<double>> latents = std::nullopt, double rho = 1.0)
      : n_(n), rho_(rho), latents_(std::move(latents)), edge_count_(edges.size()) {
    if (latents_ && latents_->size() != n)
      throw std::invalid_argument("latent vector length must equal vertex count");
    offsets_.assign(n + 1, 0);
    for (const auto& e : edges) {
      if (e.u >= e.v || e.v >= n) throw std::invalid_argument("edges must be canonical u < v < n");
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
    neighbors_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& e : edges) {
      neighbors_[fill[e.u]++] = e.v;
      neighbors_[fill[e.v]++] = e.u;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto first = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
      auto last = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
      std::sort(first, last);
      if (std::adjacent_find(first, last) != last)
        throw std::invalid_argument("duplicate edge");
    }
  }

  std::size_t n() const { return n_; }
  std::size_t edge_count() const { return edge_count_; }
  double rho() const { return rho_; }
  bool has_latents() const { return latents_.has_value(); }

  const std::vector<double>& latents() const {
    if (!latents_) throw std::logic_error("graph carries no latent positions");
    return *latents_;
  }

  std::size_t degree(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const Vertex> neighbors(Vertex v) const {
    return {neighbors_.data() + offsets_[v], degree(v)};
  }

  bool has_edge(Vertex a, Vertex b) const {
    if (a == b) return false;
    auto nb = degree(a) <= degree(b) ? neighbors(a) : neighbors(b);
    const Vertex target = degree(a) <= degree(b) ? b : a;
    return std::binary_search(nb.begin(), nb.end(), target);
  }

  /// Vertex owning position `slot` of the concatenated adjacency array; drawing
  /// slot uniformly samples a vertex proportionally to its degree.
  Vertex owner_of_slot(std::size_t slot) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), slot);
    return static_cast<Vertex>((it - offsets_.begin()) - 1);
  }
  std::size_t adjacency_size() const { return neighbors_.size(); }
  Vertex slot(std::size_t s) const { return neighbors_[s]; }

  std::vector<Pair> edges() const {
    std::vector<Pair> out;
    out.reserve(edge_count_);
    for (Vertex u = 0; u < n_; ++u)
      for (Vertex v : neighbors(u))
        if (u < v) out.push_back({u, v});
    return out;
  }

 private:
  std::size_t n_ = 0;
  double rho_ = 1.0;
  std::optional<std::vector<double>> latents_;
  std::size_t edge_count_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Vertex> neighbors_;
};

/// lambda_i ~ U(0,1) i.i.d.; a_ij ~ Bernoulli(rho_n W(lambda_i, lambda_j)).
/// Row i draws from its own derived stream, so the result is independent of
/// evaluation order.
inline LatentGraph sample_graph(const GraphonSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_graph: need n >= 2");
  validate(spec, n);
  const double rho = spec.sparsity.rho(n);

  std::vector<double> lat(n);
  Rng lrng(seed, Stream::latents);
  for (auto& l : lat) l = lrng.uniform();

  std::vector<Pair> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Rng row(seed, Stream::edges, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (row.bernoulli(rho * evaluate(spec, lat[i], lat[j])))
        edges.push_back({static_cast<Vertex>(i), static_cast<Vertex>(j)});
    }
  }
  return LatentGraph(n, edges, std::move(lat), rho);
}

// ---------------------------------------------------------------------------
// Edge-list text formats

inline void write_edge_list(const LatentGraph& g, std::ostream& os) {
  for (const auto& e : g.edges()) os << e.u << ' ' << e.v << '\n';
}

inline void write_latents(const LatentGraph& g, std::ostream& os) {
  std::ostringstream buf;
  buf.precision(17);
  for (double l : g.latents()) buf << l << '\n';
  os << buf.str();
}

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class EdgeListFormat { whitespace_pairs, csv_with_header };

struct IngestResult {
  LatentGraph graph;
  std::size_t duplicates = 0;
  std::size_t self_loops = 0;
  std::vector<std::string> original_ids;  // index = remapped vertex id
};

namespace detail {

inline bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads an edge list into a simple undirected graph. Ids are remapped to
/// 0..n-1 in ascending order (numerically when every id is an integer).
inline IngestResult ingest_edge_list(std::istream& in, EdgeListFormat format) {
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = format != EdgeListFormat::csv_with_header;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#' || s.front() == '%') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> tok;
    if (format == EdgeListFormat::csv_with_header) {
      std::string cell;
      std::istringstream ss{std::string(s)};
      while (std::getline(ss, cell, ',')) tok.emplace_back(detail::trim(cell));
    } else {
      std::istringstream ss{std::string(s)};
      std::string t;
      while (ss >> t) tok.push_back(t);
    }
    if (tok.size() < 2 || tok[0].empty() || tok[1].empty())
      throw ParseError("expected two vertex ids, got '" + std::string(s) + "'", lineno);
    if (tok.size() > 3)
      throw ParseError("too many fields in '" + std::string(s) + "'", lineno);
    raw.emplace_back(tok[0], tok[1]);
  }

  std::vector<std::string> ids;
  for (const auto& [a, b] : raw) {
    ids.push_back(a);
    ids.push_back(b);
  }
  std::vector<long long> numeric_ids;
  for (const auto& id : ids) {
    long long x;
    if (!detail::parse_int(id, x)) {
      numeric_ids.clear();
      break;
    }
    numeric_ids.push_back(x);
  }
  const bool numeric = !ids.empty() && numeric_ids.size() == ids.size();
  if (numeric) {
    std::sort(numeric_ids.begin(), numeric_ids.end());
    numeric_ids.erase(std::unique(numeric_ids.begin(), numeric_ids.end()), numeric_ids.end());
    ids.clear();
    for (long long x : numeric_ids) ids.push_back(std::to_string(x));
  } else {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  auto lookup = [&](const std::string& id) -> Vertex {
    if (numeric) {
      long long x = 0;
      detail::parse_int(id, x);
      return static_cast<Vertex>(
          std::lower_bound(numeric_ids.begin(), numeric_ids.end(), x) - numeric_ids.begin());
    }
    return static_cast<Vertex>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  IngestResult out;
  std::vector<Pair> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) {
    const Vertex u = lookup(a), v = lookup(b);
    if (u == v) {
      ++out.self_loops;
      continue;
    }
    edges.push_back(Pair::of(u, v));
  }
  std::sort(edges.begin(), edges.end());
  const auto before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  out.duplicates = before - edges.size();
  out.graph = LatentGraph(ids.size(), edges);
  out.original_ids = std::move(ids);
  return out;
}

inline IngestResult ingest_edge_list(const std::string& path, EdgeListFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list '" + path + "'");
  return ingest_edge_list(in, format);
}

}  // namespace gemb
