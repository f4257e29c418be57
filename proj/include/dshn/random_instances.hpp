#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "dshn/hypergraph.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/rng.hpp"
#include "dshn/sheaf.hpp"

namespace dshn {

struct RandomHypergraphOptions {
  Index min_vertices = 4;
  Index max_vertices = 16;
  Index min_edges = 2;
  Index max_edges = 12;
  Index max_initial_size = 5;
  double directed_prob = 0.5;
  bool cover_all_vertices = true;
};

/// Random hypergraph. With cover_all_vertices, every vertex missing from the
/// initial draw is appended to a random hyperedge so every D_u is nonzero.
inline DirectedHypergraph random_hypergraph(Rng& rng, const RandomHypergraphOptions& opt = {}) {
  const Index n = rng.uniform_int(opt.min_vertices, opt.max_vertices);
  const Index m = rng.uniform_int(opt.min_edges, opt.max_edges);
  std::vector<Index> all(n);
  for (Index i = 0; i < n; ++i) all[i] = i;

  std::vector<std::vector<Index>> members(m);
  std::vector<bool> covered(n, false);
  for (auto& mem : members) {
    const Index size = rng.uniform_int(2, std::min(n, opt.max_initial_size));
    mem = rng.sample(all, size);
    for (Index u : mem) covered[u] = true;
  }
  if (opt.cover_all_vertices) {
    for (Index u = 0; u < n; ++u)
      if (!covered[u]) members[rng.uniform_int(0, m - 1)].push_back(u);
  }

  std::vector<Hyperedge> edges;
  edges.reserve(m);
  for (auto& mem : members) {
    Hyperedge e;
    if (rng.uniform() < opt.directed_prob) {
      // Members are in random draw order (appended ones last), so a prefix
      // split is a random partition into nonempty tail and head.
      rng.shuffle(mem);
      const Index cut = rng.uniform_int(1, mem.size() - 1);
      e.tail.assign(mem.begin(), mem.begin() + static_cast<std::ptrdiff_t>(cut));
      e.head.assign(mem.begin() + static_cast<std::ptrdiff_t>(cut), mem.end());
    } else {
      e.tail = mem;
    }
    edges.push_back(std::move(e));
  }
  return make_hypergraph(n, std::move(edges));
}

/// Random simple graph: each unordered pair independently becomes an
/// undirected edge, an arc in one direction, or nothing. No antiparallel arcs
/// and no parallel edges.
inline MixedGraph random_mixed_graph(Rng& rng, Index n, double edge_prob, double directed_prob) {
  MixedGraph g;
  g.num_vertices = n;
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (rng.uniform() >= edge_prob) continue;
      if (rng.uniform() < directed_prob) {
        if (rng.uniform() < 0.5) {
          g.arcs.emplace_back(u, v);
        } else {
          g.arcs.emplace_back(v, u);
        }
      } else {
        g.edges.emplace_back(u, v);
      }
    }
  }
  return g;
}

inline constexpr std::array<double, 4> kSpectralSuiteCharges = {0.0, 0.05, 0.1, 0.25};
inline constexpr std::array<MapShape, 3> kAllMapShapes = {MapShape::trivial, MapShape::diagonal, MapShape::full};

struct RandomInstance {
  DirectedHypergraph hypergraph;
  SheafAssignment sheaf;
  std::uint64_t seed = 0;
};

/// One randomized instance for the spectral suite: n in [4,16], m in [2,12],
/// d in [1,4], q from the suite grid, any map shape.
inline RandomInstance random_spectral_instance(std::uint64_t seed) {
  Rng rng(seed);
  auto h = random_hypergraph(rng);
  SheafConfig cfg;
  cfg.stalk_dim = rng.uniform_int(1, 4);
  cfg.q = kSpectralSuiteCharges[rng.uniform_int(0, kSpectralSuiteCharges.size() - 1)];
  cfg.shape = kAllMapShapes[rng.uniform_int(0, kAllMapShapes.size() - 1)];
  auto a = build_fixed_sheaf(h, cfg, rng.bits());
  return {std::move(h), std::move(a), seed};
}

}  // namespace dshn
