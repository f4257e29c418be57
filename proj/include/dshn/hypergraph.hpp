#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dshn/dense.hpp"

namespace dshn {

class HypergraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role { tail, head };

struct Hyperedge {
  std::vector<Index> tail;
  std::vector<Index> head;  // empty for undirected hyperedges

  Index degree() const { return tail.size() + head.size(); }
  bool directed() const { return !head.empty(); }

  std::optional<Role> role_of(Index u) const {
    if (std::binary_search(tail.begin(), tail.end(), u)) return Role::tail;
    if (std::binary_search(head.begin(), head.end(), u)) return Role::head;
    return std::nullopt;
  }
  bool contains(Index u) const { return role_of(u).has_value(); }

  bool operator==(const Hyperedge&) const = default;
};

/// Vertices 0..n-1 plus an ordered multiset of hyperedges. Immutable once
/// built through make_hypergraph; the raw constructor is for tests that
/// need to hold an invalid instance.
class DirectedHypergraph {
 public:
  DirectedHypergraph() = default;
  DirectedHypergraph(Index num_vertices, std::vector<Hyperedge> edges, std::vector<double> weights = {})
      : n_(num_vertices), edges_(std::move(edges)), weights_(std::move(weights)) {
    if (weights_.empty()) weights_.assign(edges_.size(), 1.0);
    if (weights_.size() != edges_.size()) {
      throw HypergraphError("hyperedge weight count does not match hyperedge count");
    }
  }

  Index num_vertices() const { return n_; }
  Index num_hyperedges() const { return edges_.size(); }
  const std::vector<Hyperedge>& hyperedges() const { return edges_; }
  const Hyperedge& hyperedge(Index e) const { return edges_.at(e); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(Index e) const { return weights_.at(e); }

  bool operator==(const DirectedHypergraph&) const = default;

 private:
  Index n_ = 0;
  std::vector<Hyperedge> edges_;
  std::vector<double> weights_;
};

/// Throws HypergraphError naming the first violated invariant.
inline void validate(const DirectedHypergraph& h) {
  const Index n = h.num_vertices();
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    const auto& edge = h.hyperedge(e);
    const std::string where = "hyperedge " + std::to_string(e) + ": ";
    for (const auto* part : {&edge.tail, &edge.head}) {
      for (Index i = 0; i < part->size(); ++i) {
        if ((*part)[i] >= n) {
          throw HypergraphError(where + "vertex index " + std::to_string((*part)[i]) +
                                " out of range for " + std::to_string(n) + " vertices");
        }
        if (i > 0 && (*part)[i - 1] >= (*part)[i]) {
          throw HypergraphError(where + "vertex sets must be sorted and duplicate-free");
        }
      }
    }
    for (Index u : edge.tail) {
      if (std::binary_search(edge.head.begin(), edge.head.end(), u)) {
        throw HypergraphError(where + "tail and head overlap at vertex " + std::to_string(u));
      }
    }
    if (edge.degree() < 2) {
      throw HypergraphError(where + "degree " + std::to_string(edge.degree()) + " < 2");
    }
    if (edge.tail.empty()) throw HypergraphError(where + "empty tail (undirected edges are all-tail)");
    if (!std::isfinite(h.weight(e))) throw HypergraphError(where + "non-finite weight");
  }
}

/// Sorts vertex sets, canonicalizes undirected hyperedges to all-tail form,
/// and validates. Duplicate vertices within one set are rejected by validate.
inline DirectedHypergraph make_hypergraph(Index num_vertices, std::vector<Hyperedge> edges,
                                          std::vector<double> weights = {}) {
  for (auto& e : edges) {
    std::sort(e.tail.begin(), e.tail.end());
    std::sort(e.head.begin(), e.head.end());
    if (e.tail.empty()) std::swap(e.tail, e.head);
  }
  DirectedHypergraph h(num_vertices, std::move(edges), std::move(weights));
  validate(h);
  return h;
}

inline double vertex_degree(const DirectedHypergraph& h, Index u) {
  if (u >= h.num_vertices()) throw HypergraphError("vertex " + std::to_string(u) + " out of range");
  double d = 0.0;
  for (Index e = 0; e < h.num_hyperedges(); ++e)
    if (h.hyperedge(e).contains(u)) d += std::abs(h.weight(e));
  return d;
}

/// Number of hyperedges containing each vertex (multiplicity counted).
inline std::vector<Index> incidence_counts(const DirectedHypergraph& h) {
  std::vector<Index> counts(h.num_vertices(), 0);
  for (const auto& e : h.hyperedges()) {
    for (Index u : e.tail) ++counts[u];
    for (Index u : e.head) ++counts[u];
  }
  return counts;
}

/// Flat incidence list. Within each hyperedge, tail members come first
/// (ascending), then head members (ascending). Every per-incidence array in
/// the library (restriction maps, predicted sheaves) uses this order.
struct Incidences {
  Index num_vertices = 0;
  std::vector<Index> edge_offset;  // size m + 1
  std::vector<Index> vertex;       // per incidence
  std::vector<Index> edge;         // per incidence
  std::vector<Role> role;          // per incidence
  std::vector<std::vector<Index>> by_vertex;  // incidence ids touching each vertex

  Index size() const { return vertex.size(); }
  Index num_edges() const { return edge_offset.empty() ? 0 : edge_offset.size() - 1; }
  Index edge_degree(Index e) const { return edge_offset[e + 1] - edge_offset[e]; }

  std::optional<Index> find(Index u, Index e) const {
    if (e >= num_edges()) return std::nullopt;
    for (Index k = edge_offset[e]; k < edge_offset[e + 1]; ++k)
      if (vertex[k] == u) return k;
    return std::nullopt;
  }

  bool operator==(const Incidences&) const = default;
};

inline Incidences incidences_of(const DirectedHypergraph& h) {
  Incidences inc;
  inc.num_vertices = h.num_vertices();
  inc.by_vertex.resize(h.num_vertices());
  inc.edge_offset.reserve(h.num_hyperedges() + 1);
  inc.edge_offset.push_back(0);
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    const auto& edge = h.hyperedge(e);
    auto push = [&](Index u, Role r) {
      inc.by_vertex[u].push_back(inc.vertex.size());
      inc.vertex.push_back(u);
      inc.edge.push_back(e);
      inc.role.push_back(r);
    };
    for (Index u : edge.tail) push(u, Role::tail);
    for (Index u : edge.head) push(u, Role::head);
    inc.edge_offset.push_back(inc.vertex.size());
  }
  return inc;
}

struct DirectedGraph {
  Index num_vertices = 0;
  std::vector<std::pair<Index, Index>> arcs;
};

inline void validate(const DirectedGraph& g) {
  for (Index i = 0; i < g.arcs.size(); ++i) {
    const auto [u, w] = g.arcs[i];
    if (u >= g.num_vertices || w >= g.num_vertices) {
      throw HypergraphError("arc " + std::to_string(i) + ": endpoint out of range");
    }
    if (u == w) throw HypergraphError("arc " + std::to_string(i) + ": self-loop");
  }
}

/// One forward hyperedge ({v}, N_out(v)) per vertex with outgoing arcs.
inline DirectedHypergraph from_directed_graph(const DirectedGraph& g) {
  validate(g);
  std::vector<std::vector<Index>> out(g.num_vertices);
  for (const auto& [u, w] : g.arcs) out[u].push_back(w);
  std::vector<Hyperedge> edges;
  for (Index v = 0; v < g.num_vertices; ++v) {
    auto& nbrs = out[v];
    if (nbrs.empty()) continue;
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    edges.push_back({{v}, nbrs});
  }
  return make_hypergraph(g.num_vertices, std::move(edges));
}

// ---------------------------------------------------------------------------
// Text formats. Vertex indices are 1-based on disk.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, const std::string& ctx) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = first + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw ParseError(ctx + ": bad number '" + tok + "'");
  return v;
}

inline Index parse_index(const std::string& tok, const std::string& ctx) {
  Index v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError(ctx + ": bad integer '" + tok + "'");
  }
  return v;
}

inline Index parse_vertex(const std::string& tok, Index n, const std::string& ctx) {
  const Index v = parse_index(tok, ctx);
  if (v == 0 || v > n) {
    throw ParseError(ctx + ": vertex " + tok + " outside 1.." + std::to_string(n));
  }
  return v - 1;
}

inline bool next_content_line(std::istream& in, std::string& line, Index& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

inline std::vector<std::string> tokens(const std::string& line) {
  std::string spaced;
  for (char c : line) {
    if (c == ':' || c == '|') {
      spaced += ' ';
      spaced += c;
      spaced += ' ';
    } else {
      spaced += c;
    }
  }
  std::istringstream ss(spaced);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace detail

inline DirectedHypergraph read_hypergraph(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  Index lineno = 0;
  if (!detail::next_content_line(in, line, lineno)) throw ParseError(name + ": empty file");
  auto head = detail::tokens(line);
  const std::string ctx0 = name + ":" + std::to_string(lineno);
  if (head.size() != 2) throw ParseError(ctx0 + ": expected header 'n m'");
  const Index n = detail::parse_index(head[0], ctx0);
  const Index m = detail::parse_index(head[1], ctx0);

  std::vector<Hyperedge> edges;
  std::vector<double> weights;
  while (detail::next_content_line(in, line, lineno)) {
    const std::string ctx = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(line);
    if (tok.size() < 3 || tok[0] != "e" || tok[2] != ":") {
      throw ParseError(ctx + ": expected 'e <weight> : <tail> | <head>'");
    }
    weights.push_back(detail::parse_double(tok[1], ctx));
    Hyperedge edge;
    bool in_head = false;
    for (Index i = 3; i < tok.size(); ++i) {
      if (tok[i] == "|") {
        if (in_head) throw ParseError(ctx + ": more than one '|'");
        in_head = true;
        continue;
      }
      (in_head ? edge.head : edge.tail).push_back(detail::parse_vertex(tok[i], n, ctx));
    }
    edges.push_back(std::move(edge));
  }
  if (edges.size() != m) {
    throw ParseError(name + ": header declares " + std::to_string(m) + " hyperedges, found " +
                     std::to_string(edges.size()));
  }
  try {
    return make_hypergraph(n, std::move(edges), std::move(weights));
  } catch (const HypergraphError& err) {
    throw ParseError(name + ": " + err.what());
  }
}

inline void write_hypergraph(const DirectedHypergraph& h, std::ostream& out) {
  out << h.num_vertices() << ' ' << h.num_hyperedges() << '\n';
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    const auto& edge = h.hyperedge(e);
    out << "e " << detail::format_double(h.weight(e)) << " :";
    for (Index u : edge.tail) out << ' ' << u + 1;
    out << " |";
    for (Index u : edge.head) out << ' ' << u + 1;
    out << '\n';
  }
}

inline DirectedHypergraph read_hypergraph(const std::string& path) {
  auto in = detail::open_in(path);
  return read_hypergraph(in, path);
}

inline void write_hypergraph(const DirectedHypergraph& h, const std::string& path) {
  auto out = detail::open_out(path);
  write_hypergraph(h, out);
}

/// Arc list: header "n m", then m lines "u w" (1-based).
inline DirectedGraph read_arc_list(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  Index lineno = 0;
  if (!detail::next_content_line(in, line, lineno)) throw ParseError(name + ": empty file");
  auto head = detail::tokens(line);
  const std::string ctx0 = name + ":" + std::to_string(lineno);
  if (head.size() != 2) throw ParseError(ctx0 + ": expected header 'n m'");
  DirectedGraph g;
  g.num_vertices = detail::parse_index(head[0], ctx0);
  const Index m = detail::parse_index(head[1], ctx0);
  while (detail::next_content_line(in, line, lineno)) {
    const std::string ctx = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(line);
    if (tok.size() != 2) throw ParseError(ctx + ": expected 'u w'");
    const Index u = detail::parse_vertex(tok[0], g.num_vertices, ctx);
    const Index w = detail::parse_vertex(tok[1], g.num_vertices, ctx);
    if (u == w) throw ParseError(ctx + ": self-loop");
    g.arcs.emplace_back(u, w);
  }
  if (g.arcs.size() != m) {
    throw ParseError(name + ": header declares " + std::to_string(m) + " arcs, found " +
                     std::to_string(g.arcs.size()));
  }
  return g;
}

inline DirectedGraph read_arc_list(const std::string& path) {
  auto in = detail::open_in(path);
  return read_arc_list(in, path);
}

inline void write_arc_list(const DirectedGraph& g, std::ostream& out) {
  out << g.num_vertices << ' ' << g.arcs.size() << '\n';
  for (const auto& [u, w] : g.arcs) out << u + 1 << ' ' << w + 1 << '\n';
}

}  // namespace dshn
