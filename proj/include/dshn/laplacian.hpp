#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dshn/block_matrix.hpp"
#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/sheaf.hpp"

namespace dshn {

class SingularDegreeError : public std::runtime_error {
 public:
  SingularDegreeError(Index vertex, const std::string& msg) : std::runtime_error(msg), vertex_(vertex) {}
  Index vertex() const { return vertex_; }

 private:
  Index vertex_;
};

/// Strict mode refuses singular degree blocks; jitter mode adds jitter * I to
/// every D_u before the inverse square root.
enum class DegreeRegularization { strict, jitter };

inline constexpr double kDefaultDegreeJitter = 1e-8;

struct LaplacianOptions {
  bool normalized = false;
  DegreeRegularization regularization = DegreeRegularization::strict;
  double jitter = kDefaultDegreeJitter;
};

struct DegreeMatrices {
  std::vector<RealMatrix> vertex;  // D_u = sum_e F^T F, d x d
  std::vector<double> edge;        // delta_e
};

/// B^(q): block (e, u) = S^(q)_{u<|e} F_{u<|e} for u in e.
inline BlockComplexMatrix build_incidence(const DirectedHypergraph& h, const SheafAssignment& a) {
  a.check_covers(h);
  const auto& inc = a.incidences();
  BlockComplexMatrix b(h.num_hyperedges(), h.num_vertices(), a.stalk_dim());
  for (Index k = 0; k < inc.size(); ++k) b.add_block(inc.edge[k], inc.vertex[k], directed_restriction(a, k));
  return b.finalize();
}

inline DegreeMatrices build_degree_matrices(const DirectedHypergraph& h, const SheafAssignment& a) {
  a.check_covers(h);
  const auto& inc = a.incidences();
  const Index d = a.stalk_dim();
  DegreeMatrices out;
  out.vertex.assign(h.num_vertices(), RealMatrix(d, d));
  out.edge.resize(h.num_hyperedges());
  for (Index e = 0; e < h.num_hyperedges(); ++e) out.edge[e] = static_cast<double>(h.hyperedge(e).degree());
  // The phases cancel in F^dagger F, so the real Gram matrix is exact.
  for (Index k = 0; k < inc.size(); ++k) {
    const auto& f = a.map(k);
    out.vertex[inc.vertex[k]] += matmul(transpose(f), f);
  }
  return out;
}

/// D_u^{-1/2}. Diagonal blocks are inverted entry-wise, full blocks through
/// a symmetric eigendecomposition.
inline RealMatrix degree_inverse_sqrt(const RealMatrix& du, Index vertex, const LaplacianOptions& opt) {
  const Index d = du.rows();
  const double jitter = opt.regularization == DegreeRegularization::jitter ? opt.jitter : 0.0;
  bool diagonal = true;
  for (Index i = 0; i < d && diagonal; ++i)
    for (Index j = 0; j < d; ++j)
      if (i != j && du(i, j) != 0.0) {
        diagonal = false;
        break;
      }
  auto singular = [&] {
    return SingularDegreeError(vertex, "degree block of vertex " + std::to_string(vertex) +
                                           " is singular; enable jitter to regularize");
  };
  if (diagonal) {
    RealMatrix out(d, d);
    for (Index i = 0; i < d; ++i) {
      const double v = du(i, i) + jitter;
      if (!(v > 0.0)) throw singular();
      out(i, i) = 1.0 / std::sqrt(v);
    }
    return out;
  }
  RealMatrix reg = du;
  for (Index i = 0; i < d; ++i) reg(i, i) += jitter;
  const auto eig = jacobi_eigen(reg, true, 1e-15);
  const double scale = std::max(1.0, std::abs(eig.values.back()));
  if (!(eig.values.front() > 1e-14 * scale)) throw singular();
  return symmetric_function(eig, [](double l) { return 1.0 / std::sqrt(l); });
}

/// Everything the Laplacian-family operators need: the assembled block
/// matrices plus per-incidence data for matrix-free application.
struct LaplacianBundle {
  BlockComplexMatrix L;
  BlockComplexMatrix Q;  // signless part; Q_N when normalized
  std::vector<RealMatrix> D_V;
  std::vector<double> D_E;
  bool normalized = false;

  Index num_vertices = 0;
  Index stalk_dim = 1;
  Incidences incidences;
  std::vector<ComplexMatrix> restrictions;      // S F per incidence
  std::vector<RealMatrix> degree_inverse_sqrt;  // D_u^{-1/2}, normalized only

  Index signal_rows() const { return num_vertices * stalk_dim; }
};

inline LaplacianBundle build_laplacian(const DirectedHypergraph& h, const SheafAssignment& a,
                                       const LaplacianOptions& opt = {}) {
  const Index n = h.num_vertices();
  const Index d = a.stalk_dim();
  LaplacianBundle out;
  out.normalized = opt.normalized;
  out.num_vertices = n;
  out.stalk_dim = d;
  out.incidences = a.incidences();

  auto deg = build_degree_matrices(h, a);
  out.D_E = deg.edge;
  out.D_V = std::move(deg.vertex);

  const auto b = build_incidence(h, a);
  BlockComplexMatrix scaled(b.block_rows(), b.block_cols(), d);
  for (const auto& e : b.entries()) {
    ComplexMatrix blk = e.block;
    blk *= 1.0 / out.D_E[e.row];
    scaled.add_block(e.row, e.col, std::move(blk));
  }
  scaled.finalize();
  BlockComplexMatrix q = block_product(b.adjoint(), scaled);

  out.restrictions.reserve(out.incidences.size());
  for (Index k = 0; k < out.incidences.size(); ++k) out.restrictions.push_back(directed_restriction(a, k));

  BlockComplexMatrix lap(n, n, d);
  if (!opt.normalized) {
    for (Index u = 0; u < n; ++u) lap.add_block(u, u, to_complex(out.D_V[u]));
    for (const auto& e : q.entries()) {
      ComplexMatrix blk = e.block;
      blk *= -1.0;
      lap.add_block(e.row, e.col, std::move(blk));
    }
    out.Q = std::move(q);
  } else {
    out.degree_inverse_sqrt.reserve(n);
    for (Index u = 0; u < n; ++u) out.degree_inverse_sqrt.push_back(degree_inverse_sqrt(out.D_V[u], u, opt));
    BlockComplexMatrix qn(n, n, d);
    for (const auto& e : q.entries()) {
      const auto rl = to_complex(out.degree_inverse_sqrt[e.row]);
      const auto rr = to_complex(out.degree_inverse_sqrt[e.col]);
      qn.add_block(e.row, e.col, matmul(rl, matmul(e.block, rr)));
    }
    qn.finalize();
    for (Index u = 0; u < n; ++u) lap.add_block(u, u, ComplexMatrix::identity(d));
    for (const auto& e : qn.entries()) {
      ComplexMatrix blk = e.block;
      blk *= -1.0;
      lap.add_block(e.row, e.col, std::move(blk));
    }
    out.Q = std::move(qn);
  }
  out.L = std::move(lap.finalize());
  return out;
}

namespace detail {

inline void check_signal(const LaplacianBundle& b, const ComplexMatrix& x) {
  if (x.rows() != b.signal_rows()) {
    throw std::invalid_argument("signal has " + std::to_string(x.rows()) + " rows, operator expects " +
                                std::to_string(b.signal_rows()));
  }
}

/// Rows u*d .. u*d+d-1 of x as a d x f block.
inline ComplexMatrix stalk(const ComplexMatrix& x, Index u, Index d) {
  ComplexMatrix out(d, x.cols());
  std::copy(&x(u * d, 0), &x(u * d, 0) + d * x.cols(), out.data());
  return out;
}

inline void add_stalk(ComplexMatrix& x, Index u, const ComplexMatrix& blk) {
  Complex* dst = &x(u * blk.rows(), 0);
  for (Index i = 0; i < blk.size(); ++i) dst[i] += blk.data()[i];
}

/// Per incidence, prescaled stalk y_k = S F (R) x_u, and per-edge sums.
inline ComplexMatrix apply_core(const LaplacianBundle& b, const ComplexMatrix& x, bool signless_only) {
  const Index d = b.stalk_dim;
  const auto& inc = b.incidences;
  ComplexMatrix out(x.rows(), x.cols());
  std::vector<ComplexMatrix> scaled_x;
  if (b.normalized) {
    scaled_x.reserve(b.num_vertices);
    for (Index u = 0; u < b.num_vertices; ++u)
      scaled_x.push_back(matmul(to_complex(b.degree_inverse_sqrt[u]), stalk(x, u, d)));
  }
  auto xs = [&](Index u) { return b.normalized ? scaled_x[u] : stalk(x, u, d); };

  for (Index e = 0; e < inc.num_edges(); ++e) {
    const Index first = inc.edge_offset[e];
    const Index last = inc.edge_offset[e + 1];
    const double delta = static_cast<double>(last - first);
    std::vector<ComplexMatrix> y;
    y.reserve(last - first);
    ComplexMatrix sum(d, x.cols());
    for (Index k = first; k < last; ++k) {
      y.push_back(matmul(b.restrictions[k], xs(inc.vertex[k])));
      sum += y.back();
    }
    for (Index k = first; k < last; ++k) {
      // Lemma form: sum_{v != u} (y_u - y_v) = delta * y_u - sum.  Signless: sum.
      ComplexMatrix inner = sum;
      if (!signless_only) {
        ComplexMatrix yu = y[k - first];
        yu *= delta;
        inner = yu - sum;
      }
      ComplexMatrix contrib = matmul(adjoint(b.restrictions[k]), inner);
      contrib *= 1.0 / delta;
      if (b.normalized) contrib = matmul(to_complex(b.degree_inverse_sqrt[inc.vertex[k]]), contrib);
      add_stalk(out, inc.vertex[k], contrib);
    }
  }
  return out;
}

}  // namespace detail

/// Matrix-free L x (or L_N x) via the per-hyperedge disagreement form.
inline ComplexMatrix apply_laplacian(const LaplacianBundle& b, const ComplexMatrix& x) {
  detail::check_signal(b, x);
  ComplexMatrix out = detail::apply_core(b, x, false);
  if (b.normalized) {
    // D^{-1/2} L D^{-1/2} x plus (I - D^{-1/2} D D^{-1/2}) x equals (I - Q_N) x;
    // the correction is exactly zero without jitter.
    const Index d = b.stalk_dim;
    for (Index u = 0; u < b.num_vertices; ++u) {
      const auto r = to_complex(b.degree_inverse_sqrt[u]);
      const auto rdr = matmul(r, matmul(to_complex(b.D_V[u]), r));
      ComplexMatrix corr = ComplexMatrix::identity(d) - rdr;
      detail::add_stalk(out, u, matmul(corr, detail::stalk(x, u, d)));
    }
  }
  return out;
}

/// Matrix-free Q x (Q_N x when normalized).
inline ComplexMatrix apply_signless(const LaplacianBundle& b, const ComplexMatrix& x) {
  detail::check_signal(b, x);
  return detail::apply_core(b, x, true);
}

/// The (u, v) block of the unnormalized Laplacian straight from the
/// entry-wise expansion, independent of the incidence product.
inline ComplexMatrix entrywise_block(const DirectedHypergraph& h, const SheafAssignment& a, Index u, Index v) {
  const Index d = a.stalk_dim();
  if (u >= h.num_vertices() || v >= h.num_vertices()) throw std::out_of_range("entrywise_block: vertex out of range");
  ComplexMatrix out(d, d);
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    const auto& edge = h.hyperedge(e);
    const auto ru = edge.role_of(u);
    if (!ru) continue;
    const double delta = static_cast<double>(edge.degree());
    const auto& fu = a.map(u, e);
    if (u == v) {
      ComplexMatrix term = to_complex(matmul(transpose(fu), fu));
      term *= (1.0 - 1.0 / delta);
      out += term;
      continue;
    }
    const auto rv = edge.role_of(v);
    if (!rv) continue;
    const auto& fv = a.map(v, e);
    ComplexMatrix term = to_complex(matmul(transpose(fu), fv));
    term *= -phase_product(*ru, *rv, a.q()) / delta;
    out += term;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference operators from the literature, each built from its own
// definition so they can serve as independent oracles.

/// Graph with both arcs (u -> v) and undirected edges {u, v}.
struct MixedGraph {
  Index num_vertices = 0;
  std::vector<std::pair<Index, Index>> arcs;
  std::vector<std::pair<Index, Index>> edges;
};

/// Arcs become ({u}, {v}); undirected edges become ({u, v}, {}).
inline DirectedHypergraph to_hypergraph(const MixedGraph& g) {
  std::vector<Hyperedge> edges;
  for (const auto& [u, v] : g.arcs) edges.push_back({{u}, {v}});
  for (const auto& [u, v] : g.edges) edges.push_back({{u, v}, {}});
  return make_hypergraph(g.num_vertices, std::move(edges));
}

enum class ReferenceKind { sheaf_graph, classical_graph, magnetic, sign_magnetic, zhou, gedi, duta_linear };

struct GraphInput {
  MixedGraph graph;
  double q = 0.0;
};

struct HypergraphInput {
  const DirectedHypergraph* hypergraph = nullptr;
  const SheafAssignment* sheaf = nullptr;  // required by sheaf_graph and duta_linear
};

using ReferenceInput = std::variant<GraphInput, HypergraphInput>;

namespace detail {

inline RealMatrix adjacency(const MixedGraph& g) {
  RealMatrix a(g.num_vertices, g.num_vertices);
  for (const auto& [u, v] : g.arcs) a(u, v) += 1.0;
  for (const auto& [u, v] : g.edges) {
    a(u, v) += 1.0;
    a(v, u) += 1.0;
  }
  return a;
}

inline ComplexMatrix classical_graph_laplacian(const MixedGraph& g) {
  if (!g.arcs.empty()) throw std::invalid_argument("classical graph Laplacian needs an undirected graph");
  const auto a = adjacency(g);
  const Index n = g.num_vertices;
  ComplexMatrix l(n, n);
  for (Index u = 0; u < n; ++u) {
    double deg = 0.0;
    for (Index v = 0; v < n; ++v) {
      deg += a(u, v);
      l(u, v) -= a(u, v);
    }
    l(u, u) += deg;
  }
  return l;
}

/// D_s - A_s o exp(i Theta), A_s = (A + A^T)/2, Theta = 2 pi q (A - A^T).
inline ComplexMatrix magnetic_laplacian(const MixedGraph& g, double q) {
  const auto a = adjacency(g);
  const Index n = g.num_vertices;
  ComplexMatrix l(n, n);
  for (Index u = 0; u < n; ++u) {
    double ds = 0.0;
    for (Index v = 0; v < n; ++v) {
      const double as = 0.5 * (a(u, v) + a(v, u));
      const double theta = kTwoPi * q * (a(u, v) - a(v, u));
      ds += as;
      l(u, v) -= as * std::polar(1.0, theta);
    }
    l(u, u) += ds;
  }
  return l;
}

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

/// Dbar_s - A_s o (1 - sgn|A - A^T| + i sgn(A - A^T)), Dbar_s = rowsum |A_s|.
inline ComplexMatrix sign_magnetic_laplacian(const MixedGraph& g) {
  const auto a = adjacency(g);
  const Index n = g.num_vertices;
  ComplexMatrix l(n, n);
  for (Index u = 0; u < n; ++u) {
    double ds = 0.0;
    for (Index v = 0; v < n; ++v) {
      const double as = 0.5 * (a(u, v) + a(v, u));
      const double diff = a(u, v) - a(v, u);
      ds += std::abs(as);
      l(u, v) -= as * Complex(1.0 - sgn(std::abs(diff)), sgn(diff));
    }
    l(u, u) += ds;
  }
  return l;
}

inline std::vector<double> vertex_counts(const DirectedHypergraph& h) {
  const auto c = incidence_counts(h);
  std::vector<double> out(c.begin(), c.end());
  for (Index u = 0; u < out.size(); ++u)
    if (out[u] == 0.0) throw std::invalid_argument("reference operator: vertex " + std::to_string(u) + " is isolated");
  return out;
}

/// I - D_V^{-1/2} B D_E^{-1} B^T D_V^{-1/2} with binary incidence B (n x m).
inline ComplexMatrix zhou_laplacian(const DirectedHypergraph& h) {
  const Index n = h.num_vertices();
  const Index m = h.num_hyperedges();
  RealMatrix bmat(n, m);
  for (Index e = 0; e < m; ++e) {
    for (Index u : h.hyperedge(e).tail) bmat(u, e) = 1.0;
    for (Index u : h.hyperedge(e).head) bmat(u, e) = 1.0;
  }
  const auto dv = vertex_counts(h);
  RealMatrix left(n, m);
  for (Index u = 0; u < n; ++u)
    for (Index e = 0; e < m; ++e)
      left(u, e) = bmat(u, e) / std::sqrt(dv[u]) / static_cast<double>(h.hyperedge(e).degree());
  RealMatrix right(m, n);
  for (Index e = 0; e < m; ++e)
    for (Index u = 0; u < n; ++u) right(e, u) = bmat(u, e) / std::sqrt(dv[u]);
  const RealMatrix qn = matmul(left, right);
  ComplexMatrix l(n, n);
  for (Index u = 0; u < n; ++u)
    for (Index v = 0; v < n; ++v) l(u, v) = (u == v ? 1.0 : 0.0) - qn(u, v);
  return l;
}

/// Scalar expansion of the normalized generalized directed Laplacian with
/// unit weights: role-agreeing pairs add to the real part, tail->head pairs
/// to the imaginary part with sign by orientation.
inline ComplexMatrix gedi_laplacian(const DirectedHypergraph& h) {
  const Index n = h.num_vertices();
  const auto dv = vertex_counts(h);
  ComplexMatrix l(n, n);
  for (Index u = 0; u < n; ++u) l(u, u) = 1.0;
  for (const auto& edge : h.hyperedges()) {
    const double inv_delta = 1.0 / static_cast<double>(edge.degree());
    std::vector<std::pair<Index, Role>> members;
    for (Index u : edge.tail) members.emplace_back(u, Role::tail);
    for (Index u : edge.head) members.emplace_back(u, Role::head);
    for (const auto& [u, ru] : members) {
      l(u, u) -= inv_delta / dv[u];
      for (const auto& [v, rv] : members) {
        if (u == v) continue;
        const double scale = 1.0 / (std::sqrt(dv[u]) * std::sqrt(dv[v]));
        if (ru == rv) {
          l(u, v) -= inv_delta * scale;
        } else if (ru == Role::tail) {
          l(u, v) -= Complex(0.0, inv_delta * scale);
        } else {
          l(u, v) += Complex(0.0, inv_delta * scale);
        }
      }
    }
  }
  return l;
}

/// Linear sheaf hypergraph Laplacian with 1/delta_e on the diagonal and
/// negated off-diagonal signless terms.
inline ComplexMatrix duta_linear_laplacian(const DirectedHypergraph& h, const SheafAssignment& a) {
  a.check_covers(h);
  const Index n = h.num_vertices();
  const Index d = a.stalk_dim();
  ComplexMatrix l(n * d, n * d);
  const auto& inc = a.incidences();
  for (Index e = 0; e < inc.num_edges(); ++e) {
    const double inv_delta = 1.0 / static_cast<double>(inc.edge_degree(e));
    for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
      for (Index j = inc.edge_offset[e]; j < inc.edge_offset[e + 1]; ++j) {
        const Index u = inc.vertex[k];
        const Index v = inc.vertex[j];
        const RealMatrix prod = matmul(transpose(a.map(k)), a.map(j));
        const double sign = (k == j) ? inv_delta : -inv_delta;
        for (Index r = 0; r < d; ++r)
          for (Index c = 0; c < d; ++c) l(u * d + r, v * d + c) += sign * prod(r, c);
      }
    }
  }
  return l;
}

/// delta^T delta with coboundary (delta x)_e = F_{v<|e} x_v - F_{u<|e} x_u
/// for e = {u, v}, u < v.
inline ComplexMatrix sheaf_graph_laplacian(const DirectedHypergraph& h, const SheafAssignment& a) {
  a.check_covers(h);
  const Index n = h.num_vertices();
  const Index m = h.num_hyperedges();
  const Index d = a.stalk_dim();
  RealMatrix cob(m * d, n * d);
  for (Index e = 0; e < m; ++e) {
    const auto& edge = h.hyperedge(e);
    if (edge.directed() || edge.degree() != 2) {
      throw std::invalid_argument("sheaf graph Laplacian needs an undirected 2-uniform hypergraph");
    }
    const Index u = edge.tail[0];
    const Index v = edge.tail[1];
    const auto& fu = a.map(u, e);
    const auto& fv = a.map(v, e);
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < d; ++c) {
        cob(e * d + r, u * d + c) = -fu(r, c);
        cob(e * d + r, v * d + c) = fv(r, c);
      }
    }
  }
  return to_complex(matmul(transpose(cob), cob));
}

}  // namespace detail

inline ComplexMatrix reference_laplacian(ReferenceKind kind, const ReferenceInput& input) {
  const bool graph_kind = kind == ReferenceKind::classical_graph || kind == ReferenceKind::magnetic ||
                          kind == ReferenceKind::sign_magnetic;
  if (graph_kind) {
    const auto* g = std::get_if<GraphInput>(&input);
    if (!g) throw std::invalid_argument("reference_laplacian: this kind needs a graph input");
    switch (kind) {
      case ReferenceKind::classical_graph: return detail::classical_graph_laplacian(g->graph);
      case ReferenceKind::magnetic: return detail::magnetic_laplacian(g->graph, g->q);
      default: return detail::sign_magnetic_laplacian(g->graph);
    }
  }
  const auto* hi = std::get_if<HypergraphInput>(&input);
  if (!hi || !hi->hypergraph) throw std::invalid_argument("reference_laplacian: this kind needs a hypergraph input");
  const bool needs_sheaf = kind == ReferenceKind::sheaf_graph || kind == ReferenceKind::duta_linear;
  if (needs_sheaf && !hi->sheaf) throw std::invalid_argument("reference_laplacian: this kind needs a sheaf");
  switch (kind) {
    case ReferenceKind::sheaf_graph: return detail::sheaf_graph_laplacian(*hi->hypergraph, *hi->sheaf);
    case ReferenceKind::zhou: return detail::zhou_laplacian(*hi->hypergraph);
    case ReferenceKind::gedi: return detail::gedi_laplacian(*hi->hypergraph);
    case ReferenceKind::duta_linear: return detail::duta_linear_laplacian(*hi->hypergraph, *hi->sheaf);
    default: break;
  }
  throw std::invalid_argument("reference_laplacian: unknown kind");
}

}  // namespace dshn
