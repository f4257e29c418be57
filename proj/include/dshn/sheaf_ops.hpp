#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/autodiff.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/sheaf.hpp"

namespace dshn {

enum class Aggregation { mean, sum };

inline std::string to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "sum"; }

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "sum") return Aggregation::sum;
  throw std::invalid_argument("unknown aggregation '" + s + "'");
}

/// Fixed per-hypergraph data shared by every layer: incidences, their phases
/// and the map layout.
struct DiffusionStructure {
  Index num_vertices = 0;
  Index stalk_dim = 1;
  double q = 0.0;
  MapShape shape = MapShape::diagonal;
  Incidences incidences;
  std::vector<Complex> coeff;  // S^(q) per incidence

  DiffusionStructure() = default;
  DiffusionStructure(const DirectedHypergraph& h, Index d, double q_, MapShape shape_)
      : num_vertices(h.num_vertices()), stalk_dim(d), q(q_), shape(shape_), incidences(incidences_of(h)) {
    if (shape == MapShape::trivial) throw std::invalid_argument("learned sheaves use diagonal or full maps");
    coeff.reserve(incidences.size());
    for (Role r : incidences.role) coeff.push_back(role_coefficient(r, q));
  }

  Index map_width() const { return shape == MapShape::diagonal ? stalk_dim : stalk_dim * stalk_dim; }
  Index signal_rows() const { return num_vertices * stalk_dim; }

  /// Restriction map k out of a K x map_width parameter row.
  RealMatrix map(const RealMatrix& maps, Index k) const {
    const Index d = stalk_dim;
    RealMatrix f(d, d);
    if (shape == MapShape::diagonal) {
      for (Index i = 0; i < d; ++i) f(i, i) = maps(k, i);
    } else {
      std::copy(&maps(k, 0), &maps(k, 0) + d * d, f.data());
    }
    return f;
  }

  SheafAssignment to_sheaf(const RealMatrix& maps) const {
    std::vector<RealMatrix> fs;
    fs.reserve(incidences.size());
    for (Index k = 0; k < incidences.size(); ++k) fs.push_back(map(maps, k));
    return SheafAssignment({q, stalk_dim, shape}, incidences, std::move(fs));
  }
};

namespace ad {

/// Per incidence (u, e): [Re x_u, Re x_e, Im x_u, Im x_e], each the d x f stalk
/// block flattened; x_e aggregates the member stalks of e.
inline Var gather_incidence(Tape& t, Var x, const DiffusionStructure& s, Aggregation agg) {
  const auto& xv = t.value(x);
  const auto& inc = s.incidences;
  const Index n = s.num_vertices;
  const Index w = s.stalk_dim * xv.cols();  // d f
  if (xv.rows() != 2 * s.signal_rows()) throw std::invalid_argument("gather_incidence: signal has wrong row count");
  const double* re = xv.data();
  const double* im = xv.data() + n * w;

  const Index m = inc.num_edges();
  RealMatrix er(m, w), ei(m, w);
  for (Index e = 0; e < m; ++e) {
    const double scale = agg == Aggregation::mean ? 1.0 / static_cast<double>(inc.edge_degree(e)) : 1.0;
    for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
      const Index u = inc.vertex[k];
      for (Index c = 0; c < w; ++c) {
        er(e, c) += scale * re[u * w + c];
        ei(e, c) += scale * im[u * w + c];
      }
    }
  }
  RealMatrix out(inc.size(), 4 * w);
  for (Index k = 0; k < inc.size(); ++k) {
    const Index u = inc.vertex[k];
    const Index e = inc.edge[k];
    double* row = &out(k, 0);
    std::copy(re + u * w, re + (u + 1) * w, row);
    std::copy(&er(e, 0), &er(e, 0) + w, row + w);
    std::copy(im + u * w, im + (u + 1) * w, row + 2 * w);
    std::copy(&ei(e, 0), &ei(e, 0) + w, row + 3 * w);
  }
  return t.record(std::move(out), {x}, [x, &s, agg, w, n](Tape& tp, const RealMatrix& g) {
    auto* slot = tp.grad_slot(x);
    if (!slot) return;
    const auto& inc = s.incidences;
    double* gre = slot->data();
    double* gim = slot->data() + n * w;
    const Index m = inc.num_edges();
    RealMatrix ger(m, w), gei(m, w);
    for (Index k = 0; k < inc.size(); ++k) {
      const Index u = inc.vertex[k];
      const Index e = inc.edge[k];
      const double* row = &g(k, 0);
      for (Index c = 0; c < w; ++c) {
        gre[u * w + c] += row[c];
        ger(e, c) += row[w + c];
        gim[u * w + c] += row[2 * w + c];
        gei(e, c) += row[3 * w + c];
      }
    }
    for (Index e = 0; e < m; ++e) {
      const double scale = agg == Aggregation::mean ? 1.0 / static_cast<double>(inc.edge_degree(e)) : 1.0;
      for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
        const Index u = inc.vertex[k];
        for (Index c = 0; c < w; ++c) {
          gre[u * w + c] += scale * ger(e, c);
          gim[u * w + c] += scale * gei(e, c);
        }
      }
    }
  });
}

namespace detail {

struct DegreeFactor {
  RealMatrix r;        // (D_u + eps I)^{-1/2}
  SymmetricEigen eig;  // full shape only
};

inline std::vector<DegreeFactor> degree_factors(const DiffusionStructure& s, const RealMatrix& maps, double jitter) {
  const Index d = s.stalk_dim;
  const auto& inc = s.incidences;
  std::vector<DegreeFactor> out(s.num_vertices);
  for (Index u = 0; u < s.num_vertices; ++u) {
    RealMatrix du(d, d);
    for (Index k : inc.by_vertex[u]) {
      const RealMatrix f = s.map(maps, k);
      du += dshn::matmul(transpose(f), f);
    }
    for (Index i = 0; i < d; ++i) du(i, i) += jitter;
    auto& fac = out[u];
    if (s.shape == MapShape::diagonal) {
      fac.r = RealMatrix(d, d);
      for (Index i = 0; i < d; ++i) {
        if (!(du(i, i) > 0.0)) {
          throw SingularDegreeError(u, "degree block of vertex " + std::to_string(u) + " is singular");
        }
        fac.r(i, i) = 1.0 / std::sqrt(du(i, i));
      }
    } else {
      fac.eig = jacobi_eigen(du, true, 1e-15);
      if (!(fac.eig.values.front() > 0.0)) {
        throw SingularDegreeError(u, "degree block of vertex " + std::to_string(u) + " is singular");
      }
      fac.r = symmetric_function(fac.eig, [](double l) { return 1.0 / std::sqrt(l); });
    }
  }
  return out;
}

}  // namespace detail

/// Q_N y for the normalized sheaf assembled from `maps` (K x map_width),
/// evaluated incidence by incidence without forming the matrix:
///   Z_e = (1/delta_e) sum_{k in e} s_k P_k y_u,  out_u = sum_{k at u} conj(s_k) P_k^T Z_e
/// with P_k = F_k (D_u + jitter I)^{-1/2}. Gradients flow to y and, unless the
/// maps are constants, back through the degree normalization into the maps.
inline Var sheaf_diffusion(Tape& t, Var y, Var maps, const DiffusionStructure& s, double jitter) {
  const auto& yv = t.value(y);
  const auto& mv = t.value(maps);
  const auto& inc = s.incidences;
  const Index d = s.stalk_dim;
  const Index f = yv.cols();
  const Index big_n = s.signal_rows();
  if (yv.rows() != 2 * big_n) throw std::invalid_argument("sheaf_diffusion: signal has wrong row count");
  if (mv.rows() != inc.size() || mv.cols() != s.map_width()) {
    throw std::invalid_argument("sheaf_diffusion: maps have wrong shape");
  }

  auto factors = detail::degree_factors(s, mv, jitter);
  std::vector<RealMatrix> p(inc.size());
  for (Index k = 0; k < inc.size(); ++k) p[k] = dshn::matmul(s.map(mv, k), factors[inc.vertex[k]].r);

  auto block = [&](const RealMatrix& src, Index row0) {
    RealMatrix b(d, f);
    std::copy(&src(row0, 0), &src(row0, 0) + d * f, b.data());
    return b;
  };

  const Index m = inc.num_edges();
  std::vector<RealMatrix> zr(m), zi(m);
  RealMatrix out(2 * big_n, f);
  for (Index e = 0; e < m; ++e) {
    const double inv_delta = 1.0 / static_cast<double>(inc.edge_degree(e));
    zr[e] = RealMatrix(d, f);
    zi[e] = RealMatrix(d, f);
    for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
      const Index u = inc.vertex[k];
      const RealMatrix a = dshn::matmul(p[k], block(yv, u * d));
      const RealMatrix b = dshn::matmul(p[k], block(yv, big_n + u * d));
      const double sr = s.coeff[k].real() * inv_delta;
      const double si = s.coeff[k].imag() * inv_delta;
      for (Index i = 0; i < a.size(); ++i) {
        zr[e].data()[i] += sr * a.data()[i] - si * b.data()[i];
        zi[e].data()[i] += sr * b.data()[i] + si * a.data()[i];
      }
    }
    for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
      const Index u = inc.vertex[k];
      const RealMatrix pt = transpose(p[k]);
      const RealMatrix a = dshn::matmul(pt, zr[e]);
      const RealMatrix b = dshn::matmul(pt, zi[e]);
      const double sr = s.coeff[k].real();
      const double si = s.coeff[k].imag();
      double* orow = &out(u * d, 0);
      double* irow = &out(big_n + u * d, 0);
      for (Index i = 0; i < a.size(); ++i) {
        orow[i] += sr * a.data()[i] + si * b.data()[i];
        irow[i] += sr * b.data()[i] - si * a.data()[i];
      }
    }
  }

  return t.record(
      std::move(out), {y, maps},
      [y, maps, &s, factors = std::move(factors), p = std::move(p), zr = std::move(zr), zi = std::move(zi), d,
       f, big_n](Tape& tp, const RealMatrix& g) {
        const auto& inc = s.incidences;
        const auto& yv = tp.value(y);
        auto* gy = tp.grad_slot(y);
        auto* gm = tp.grad_slot(maps);
        const Index m = inc.num_edges();
        auto block = [&](const RealMatrix& src, Index row0) {
          RealMatrix b(d, f);
          std::copy(&src(row0, 0), &src(row0, 0) + d * f, b.data());
          return b;
        };
        auto outer = [&](const RealMatrix& a, const RealMatrix& b) {  // a b^T, both d x f
          return dshn::matmul(a, transpose(b));
        };

        std::vector<RealMatrix> gp(gm ? inc.size() : 0, RealMatrix(d, d));
        for (Index e = 0; e < m; ++e) {
          const double inv_delta = 1.0 / static_cast<double>(inc.edge_degree(e));
          // gZ_e = sum_k s_k P_k gOut_u
          RealMatrix hr(d, f), hi(d, f);
          for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
            const Index u = inc.vertex[k];
            const RealMatrix gr = block(g, u * d);
            const RealMatrix gi = block(g, big_n + u * d);
            const RealMatrix a = dshn::matmul(p[k], gr);
            const RealMatrix b = dshn::matmul(p[k], gi);
            const double sr = s.coeff[k].real();
            const double si = s.coeff[k].imag();
            for (Index i = 0; i < a.size(); ++i) {
              hr.data()[i] += sr * a.data()[i] - si * b.data()[i];
              hi.data()[i] += sr * b.data()[i] + si * a.data()[i];
            }
            if (gm) {
              // Re(conj(s) Z_e gOut_u^H)
              const RealMatrix c_re = outer(zr[e], gr) + outer(zi[e], gi);
              const RealMatrix c_im = outer(zi[e], gr) - outer(zr[e], gi);
              for (Index i = 0; i < d * d; ++i) gp[k].data()[i] += sr * c_re.data()[i] + si * c_im.data()[i];
            }
          }
          for (Index k = inc.edge_offset[e]; k < inc.edge_offset[e + 1]; ++k) {
            const Index u = inc.vertex[k];
            const double sr = s.coeff[k].real();
            const double si = s.coeff[k].imag();
            if (gy) {
              // gY_u += conj(s_k) P_k^T gZ_e / delta
              const RealMatrix pt = transpose(p[k]);
              const RealMatrix a = dshn::matmul(pt, hr);
              const RealMatrix b = dshn::matmul(pt, hi);
              double* orow = &(*gy)(u * d, 0);
              double* irow = &(*gy)(big_n + u * d, 0);
              for (Index i = 0; i < a.size(); ++i) {
                orow[i] += inv_delta * (sr * a.data()[i] + si * b.data()[i]);
                irow[i] += inv_delta * (sr * b.data()[i] - si * a.data()[i]);
              }
            }
            if (gm) {
              // Re((s / delta) conj(gZ_e) Y_u^T)
              const RealMatrix yr = block(yv, u * d);
              const RealMatrix yi = block(yv, big_n + u * d);
              const RealMatrix c_re = outer(hr, yr) + outer(hi, yi);
              const RealMatrix c_im = outer(hr, yi) - outer(hi, yr);
              for (Index i = 0; i < d * d; ++i)
                gp[k].data()[i] += inv_delta * (sr * c_re.data()[i] - si * c_im.data()[i]);
            }
          }
        }
        if (!gm) return;

        // P = F R: gF = gP R, gR_u = sum F^T gP; then through R = (D + jitter)^{-1/2}
        // and D = sum F^T F.
        const auto& mv = tp.value(maps);
        std::vector<RealMatrix> gf(inc.size());
        std::vector<RealMatrix> gr(s.num_vertices, RealMatrix(d, d));
        for (Index k = 0; k < inc.size(); ++k) {
          const Index u = inc.vertex[k];
          const RealMatrix fk = s.map(mv, k);
          gf[k] = dshn::matmul(gp[k], factors[u].r);
          gr[u] += dshn::matmul(transpose(fk), gp[k]);
        }
        std::vector<RealMatrix> gd(s.num_vertices);
        for (Index u = 0; u < s.num_vertices; ++u) {
          if (s.shape == MapShape::diagonal) {
            gd[u] = RealMatrix(d, d);
            for (Index i = 0; i < d; ++i) {
              const double r = factors[u].r(i, i);
              gd[u](i, i) = -0.5 * r * r * r * gr[u](i, i);
            }
          } else {
            gd[u] = inverse_sqrt_backward(factors[u].eig, gr[u]);
          }
        }
        for (Index k = 0; k < inc.size(); ++k) {
          const Index u = inc.vertex[k];
          const RealMatrix fk = s.map(mv, k);
          RealMatrix sym = gd[u] + transpose(gd[u]);
          gf[k] += dshn::matmul(fk, sym);
          if (s.shape == MapShape::diagonal) {
            for (Index i = 0; i < d; ++i) (*gm)(k, i) += gf[k](i, i);
          } else {
            for (Index i = 0; i < d * d; ++i) (*gm)(k, i) += gf[k].data()[i];
          }
        }
      });
}

}  // namespace ad
}  // namespace dshn
