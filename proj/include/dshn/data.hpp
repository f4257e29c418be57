#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/rng.hpp"

namespace dshn {

struct SyntheticConfig {
  Index n = 500;
  Index classes = 5;
  Index h_min = 3;
  Index h_max = 10;
  Index intra = 30;  // undirected hyperedges per class
  Index inter = 30;  // directed hyperedges per class pair i < j
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticConfig& c) {
  if (c.classes < 1 || c.n % c.classes != 0) throw std::invalid_argument("classes must divide n");
  if (c.h_min < 2 || c.h_min > c.h_max) throw std::invalid_argument("need 2 <= h_min <= h_max");
  if (c.h_max > c.n / c.classes) throw std::invalid_argument("h_max exceeds the class size");
}

struct SplitMasks {
  std::vector<bool> train, val, test;
};

struct LabeledDataset {
  DirectedHypergraph hypergraph;
  RealMatrix features;
  std::vector<Index> labels;
  Index num_classes = 0;
  SplitMasks masks;
};

/// Unit-weight degree of every vertex as a single feature column.
inline RealMatrix degree_features(const DirectedHypergraph& h) {
  const auto counts = incidence_counts(h);
  RealMatrix f(h.num_vertices(), 1);
  for (Index u = 0; u < counts.size(); ++u) f(u, 0) = static_cast<double>(counts[u]);
  return f;
}

/// Random permutation cut by proportion. Each part gets the floor of its
/// share; leftover vertices go one each to the earlier parts first.
inline SplitMasks split(Index n, std::array<double, 3> proportions, std::uint64_t seed) {
  const double total = proportions[0] + proportions[1] + proportions[2];
  if (std::abs(total - 1.0) > 1e-9 || proportions[0] < 0 || proportions[1] < 0 || proportions[2] < 0) {
    throw std::invalid_argument("split proportions must be nonnegative and sum to 1");
  }
  std::array<Index, 3> size{};
  Index used = 0;
  for (int i = 0; i < 3; ++i) {
    size[i] = static_cast<Index>(std::floor(proportions[i] * static_cast<double>(n) + 1e-9));
    used += size[i];
  }
  for (int i = 0; used < n; i = (i + 1) % 3) {
    ++size[i];
    ++used;
  }
  std::vector<Index> perm(n);
  for (Index i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  SplitMasks m;
  m.train.assign(n, false);
  m.val.assign(n, false);
  m.test.assign(n, false);
  for (Index i = 0; i < n; ++i) {
    auto& target = i < size[0] ? m.train : (i < size[0] + size[1] ? m.val : m.test);
    target[perm[i]] = true;
  }
  return m;
}

inline constexpr std::array<double, 3> kDefaultSplit = {0.5, 0.25, 0.25};

/// Classes are contiguous vertex blocks. Each class gets `intra` undirected
/// hyperedges inside it; each pair i < j gets `inter` directed hyperedges with
/// tails in class i and heads in class j. Part sizes are uniform in
/// [h_min, h_max], members drawn without replacement.
inline LabeledDataset generate_synthetic(const SyntheticConfig& c) {
  validate(c);
  Rng rng(c.seed);
  const Index size = c.n / c.classes;
  auto pool = [&](Index cls) {
    std::vector<Index> p(size);
    for (Index i = 0; i < size; ++i) p[i] = cls * size + i;
    return p;
  };
  std::vector<Hyperedge> edges;
  edges.reserve(c.classes * c.intra + c.classes * (c.classes - 1) / 2 * c.inter);
  for (Index cls = 0; cls < c.classes; ++cls) {
    const auto p = pool(cls);
    for (Index k = 0; k < c.intra; ++k) {
      const Index s = rng.uniform_int(c.h_min, c.h_max);
      edges.push_back({rng.sample(p, s), {}});
    }
  }
  for (Index i = 0; i < c.classes; ++i) {
    for (Index j = i + 1; j < c.classes; ++j) {
      const auto pi = pool(i);
      const auto pj = pool(j);
      for (Index k = 0; k < c.inter; ++k) {
        const Index st = rng.uniform_int(c.h_min, c.h_max);
        const Index sh = rng.uniform_int(c.h_min, c.h_max);
        auto tail = rng.sample(pi, st);
        auto head = rng.sample(pj, sh);
        edges.push_back({std::move(tail), std::move(head)});
      }
    }
  }
  LabeledDataset d;
  d.hypergraph = make_hypergraph(c.n, std::move(edges));
  d.features = degree_features(d.hypergraph);
  d.labels.resize(c.n);
  for (Index u = 0; u < c.n; ++u) d.labels[u] = u / size;
  d.num_classes = c.classes;
  d.masks = split(c.n, kDefaultSplit, derive_seed(c.seed, 1));
  return d;
}

// ---------------------------------------------------------------------------
// Files: <prefix>.hg, <prefix>.features, <prefix>.labels, <prefix>.splits.

inline void write_features(const RealMatrix& f, std::ostream& out) {
  for (Index i = 0; i < f.rows(); ++i) {
    for (Index j = 0; j < f.cols(); ++j) out << (j ? " " : "") << detail::format_double(f(i, j));
    out << '\n';
  }
}

inline RealMatrix read_features(std::istream& in, Index n, const std::string& name) {
  std::string line;
  Index lineno = 0;
  std::vector<double> values;
  Index cols = 0, rows = 0;
  while (detail::next_content_line(in, line, lineno)) {
    const auto tok = detail::tokens(line);
    if (rows == 0) cols = tok.size();
    if (tok.size() != cols || cols == 0) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) + " values");
    }
    for (const auto& t : tok) values.push_back(detail::parse_double(t, name + ":" + std::to_string(lineno)));
    ++rows;
  }
  if (rows != n) throw ParseError(name + ": expected " + std::to_string(n) + " feature rows, got " + std::to_string(rows));
  return RealMatrix(rows, cols, std::move(values));
}

/// `vertex class` per line, vertex 1-based, class 0-based.
inline void write_labels(const std::vector<Index>& labels, std::ostream& out) {
  for (Index u = 0; u < labels.size(); ++u) out << u + 1 << ' ' << labels[u] << '\n';
}

inline std::vector<Index> read_labels(std::istream& in, Index n, const std::string& name) {
  std::vector<Index> labels(n);
  std::vector<bool> seen(n, false);
  std::string line;
  Index lineno = 0, count = 0;
  while (detail::next_content_line(in, line, lineno)) {
    const std::string ctx = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(line);
    if (tok.size() != 2) throw ParseError(ctx + ": expected 'vertex class'");
    const Index u = detail::parse_vertex(tok[0], n, ctx);
    if (seen[u]) throw ParseError(ctx + ": vertex " + tok[0] + " labelled twice");
    seen[u] = true;
    labels[u] = detail::parse_index(tok[1], ctx);
    ++count;
  }
  if (count != n) throw ParseError(name + ": expected " + std::to_string(n) + " labels, got " + std::to_string(count));
  return labels;
}

/// Three lines `train ...`, `val ...`, `test ...` of 1-based vertices.
inline void write_splits(const SplitMasks& m, std::ostream& out) {
  const std::pair<const char*, const std::vector<bool>*> parts[] = {{"train", &m.train}, {"val", &m.val}, {"test", &m.test}};
  for (const auto& [tag, mask] : parts) {
    out << tag;
    for (Index u = 0; u < mask->size(); ++u)
      if ((*mask)[u]) out << ' ' << u + 1;
    out << '\n';
  }
}

inline SplitMasks read_splits(std::istream& in, Index n, const std::string& name) {
  SplitMasks m;
  m.train.assign(n, false);
  m.val.assign(n, false);
  m.test.assign(n, false);
  std::vector<bool> seen(n, false);
  std::string line;
  Index lineno = 0;
  Index parts = 0;
  while (detail::next_content_line(in, line, lineno)) {
    const std::string ctx = name + ":" + std::to_string(lineno);
    const auto tok = detail::tokens(line);
    std::vector<bool>* target = nullptr;
    if (tok[0] == "train") target = &m.train;
    if (tok[0] == "val") target = &m.val;
    if (tok[0] == "test") target = &m.test;
    if (!target) throw ParseError(ctx + ": expected a train, val or test line");
    for (Index i = 1; i < tok.size(); ++i) {
      const Index u = detail::parse_vertex(tok[i], n, ctx);
      if (seen[u]) throw ParseError(ctx + ": vertex " + tok[i] + " appears in two splits");
      seen[u] = true;
      (*target)[u] = true;
    }
    ++parts;
  }
  if (parts != 3) throw ParseError(name + ": expected three split lines");
  return m;
}

inline void write_dataset(const LabeledDataset& d, const std::string& prefix) {
  write_hypergraph(d.hypergraph, prefix + ".hg");
  auto f = detail::open_out(prefix + ".features");
  write_features(d.features, f);
  auto l = detail::open_out(prefix + ".labels");
  write_labels(d.labels, l);
  auto s = detail::open_out(prefix + ".splits");
  write_splits(d.masks, s);
}

inline std::vector<std::string> dataset_files(const std::string& prefix) {
  return {prefix + ".hg", prefix + ".features", prefix + ".labels", prefix + ".splits"};
}

inline LabeledDataset read_dataset(const std::string& prefix) {
  LabeledDataset d;
  d.hypergraph = read_hypergraph(prefix + ".hg");
  const Index n = d.hypergraph.num_vertices();
  {
    auto in = detail::open_in(prefix + ".features");
    d.features = read_features(in, n, prefix + ".features");
  }
  {
    auto in = detail::open_in(prefix + ".labels");
    d.labels = read_labels(in, n, prefix + ".labels");
  }
  {
    auto in = detail::open_in(prefix + ".splits");
    d.masks = read_splits(in, n, prefix + ".splits");
  }
  for (Index l : d.labels) d.num_classes = std::max(d.num_classes, l + 1);
  return d;
}

}  // namespace dshn
