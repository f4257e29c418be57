#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dshn/dense.hpp"

// Reverse-mode differentiation over real matrices. Complex signals are kept
// "stacked": an N x f complex array is a 2N x f real matrix whose top half
// holds the real parts and bottom half the imaginary parts.

namespace dshn::ad {

struct Var {
  static constexpr Index none = std::numeric_limits<Index>::max();
  Index id = none;
  bool valid() const { return id != none; }
};

class Tape;
using Backward = std::function<void(Tape&, const RealMatrix& grad_out)>;

class Tape {
 public:
  Var variable(RealMatrix v) { return push(std::move(v), true, {}); }
  Var constant(RealMatrix v) { return push(std::move(v), false, {}); }

  /// Records an op result. The backward closure is kept only if some parent
  /// needs a gradient.
  Var record(RealMatrix value, std::initializer_list<Var> parents, Backward fn) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : Backward{});
  }

  const RealMatrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  Index size() const { return nodes_.size(); }

  /// Gradient accumulated into v, or an all-zero matrix of its shape.
  RealMatrix grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    return n.grad.empty() && !n.value.empty() ? RealMatrix(n.value.rows(), n.value.cols()) : n.grad;
  }

  /// Mutable gradient slot for backward closures; allocated on first use and
  /// nullptr for nodes that need no gradient.
  RealMatrix* grad_slot(Var v) {
    auto& n = nodes_.at(v.id);
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = RealMatrix(n.value.rows(), n.value.cols());
    return &n.grad;
  }

  void backward(Var root) {
    const auto& r = nodes_.at(root.id);
    if (r.value.rows() != 1 || r.value.cols() != 1) throw std::invalid_argument("backward: root must be a scalar");
    if (!r.requires_grad) return;
    *grad_slot(root) = RealMatrix(1, 1, 1.0);
    for (Index i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      // Copy: the closure may allocate other gradient slots.
      const RealMatrix g = n.grad;
      n.backward(*this, g);
    }
  }

  /// Running hash of every rectifier activation pattern seen in forward.
  /// Finite-difference probes compare it to detect straddled kinks.
  std::uint64_t kink_signature() const { return kinks_; }
  void note_kink(bool active) {
    kinks_ = (kinks_ ^ (active ? 0x9E3779B97F4A7C15ULL : 0x7F4A7C159E3779B9ULL)) * 0x100000001B3ULL;
  }

 private:
  struct Node {
    RealMatrix value;
    RealMatrix grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var push(RealMatrix v, bool requires_grad, Backward fn) {
    nodes_.push_back({std::move(v), {}, std::move(fn), requires_grad});
    return {nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::uint64_t kinks_ = 0xCBF29CE484222325ULL;
};

inline void accumulate(Tape& t, Var v, const RealMatrix& g) {
  if (auto* slot = t.grad_slot(v)) *slot += g;
}

// ---------------------------------------------------------------------------
// Generic real ops.

inline Var matmul(Tape& t, Var a, Var b) {
  RealMatrix out = dshn::matmul(t.value(a), t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    if (tp.requires_grad(a)) accumulate(tp, a, dshn::matmul(g, transpose(tp.value(b))));
    if (tp.requires_grad(b)) accumulate(tp, b, dshn::matmul(transpose(tp.value(a)), g));
  });
}

inline Var add(Tape& t, Var a, Var b) {
  RealMatrix out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const RealMatrix& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

/// a + 1 * bias for a 1 x c bias row.
inline Var add_bias(Tape& t, Var a, Var bias) {
  const auto& av = t.value(a);
  const auto& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) throw std::invalid_argument("add_bias: bias shape mismatch");
  RealMatrix out = av;
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  return t.record(std::move(out), {a, bias}, [a, bias](Tape& tp, const RealMatrix& g) {
    accumulate(tp, a, g);
    if (auto* slot = tp.grad_slot(bias))
      for (Index i = 0; i < g.rows(); ++i)
        for (Index j = 0; j < g.cols(); ++j) (*slot)(0, j) += g(i, j);
  });
}

inline Var affine(Tape& t, Var x, Var w, Var b) { return add_bias(t, matmul(t, x, w), b); }

inline Var relu(Tape& t, Var a) {
  RealMatrix out = t.value(a);
  for (auto& v : out.values()) {
    t.note_kink(v > 0.0);
    v = v > 0.0 ? v : 0.0;
  }
  return t.record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    if (auto* slot = tp.grad_slot(a)) {
      const auto& x = tp.value(a);
      for (Index i = 0; i < g.size(); ++i)
        if (x.data()[i] > 0.0) slot->data()[i] += g.data()[i];
    }
  });
}

enum class Activation { sigmoid, tanh, none };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "none") return Activation::none;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

inline Var activate(Tape& t, Var a, Activation kind) {
  if (kind == Activation::none) return a;
  auto f = [kind](double v) { return kind == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-v)) : std::tanh(v); };
  RealMatrix out = t.value(a);
  for (auto& v : out.values()) v = f(v);
  return t.record(std::move(out), {a}, [a, f, kind](Tape& tp, const RealMatrix& g) {
    auto* slot = tp.grad_slot(a);
    if (!slot) return;
    const auto& x = tp.value(a);
    for (Index i = 0; i < g.size(); ++i) {
      const double y = f(x.data()[i]);
      const double dy = kind == Activation::sigmoid ? y * (1.0 - y) : 1.0 - y * y;
      slot->data()[i] += g.data()[i] * dy;
    }
  });
}

/// Multiplies row i by scale[i]; the scales are constants.
inline Var row_scale(Tape& t, Var a, std::vector<double> scale) {
  RealMatrix out = t.value(a);
  if (scale.size() != out.rows()) throw std::invalid_argument("row_scale: one scale per row required");
  for (Index i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= scale[i];
  return t.record(std::move(out), {a}, [a, scale = std::move(scale)](Tape& tp, const RealMatrix& g) {
    if (auto* slot = tp.grad_slot(a))
      for (Index i = 0; i < g.rows(); ++i)
        for (Index j = 0; j < g.cols(); ++j) (*slot)(i, j) += scale[i] * g(i, j);
  });
}

/// Same data, new shape (row-major reinterpretation).
inline Var reshape(Tape& t, Var a, Index rows, Index cols) {
  const auto& av = t.value(a);
  if (rows * cols != av.size()) throw std::invalid_argument("reshape: size mismatch");
  const Index r0 = av.rows();
  const Index c0 = av.cols();
  return t.record(RealMatrix(rows, cols, av.values()), {a}, [a, r0, c0](Tape& tp, const RealMatrix& g) {
    accumulate(tp, a, RealMatrix(r0, c0, g.values()));
  });
}

/// Mean softmax cross-entropy over rows with mask[i] set.
inline Var softmax_cross_entropy(Tape& t, Var logits, const std::vector<Index>& labels,
                                 const std::vector<bool>& mask) {
  const auto& z = t.value(logits);
  if (labels.size() != z.rows() || mask.size() != z.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: labels/mask length mismatch");
  }
  Index count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  if (count == 0) throw std::invalid_argument("softmax_cross_entropy: empty mask");
  RealMatrix prob(z.rows(), z.cols());
  double loss = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    if (!mask[i]) continue;
    if (labels[i] >= z.cols()) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : z.row(i)) mx = std::max(mx, v);
    double sum = 0.0;
    for (Index j = 0; j < z.cols(); ++j) sum += std::exp(z(i, j) - mx);
    for (Index j = 0; j < z.cols(); ++j) prob(i, j) = std::exp(z(i, j) - mx) / sum;
    loss += -(z(i, labels[i]) - mx - std::log(sum));
  }
  const double inv = 1.0 / static_cast<double>(count);
  return t.record(RealMatrix(1, 1, loss * inv), {logits},
                  [logits, prob = std::move(prob), labels, mask, inv](Tape& tp, const RealMatrix& g) {
                    auto* slot = tp.grad_slot(logits);
                    if (!slot) return;
                    for (Index i = 0; i < prob.rows(); ++i) {
                      if (!mask[i]) continue;
                      for (Index j = 0; j < prob.cols(); ++j) {
                        const double y = j == labels[i] ? 1.0 : 0.0;
                        (*slot)(i, j) += g(0, 0) * inv * (prob(i, j) - y);
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// Stacked complex ops.

/// N x f real -> 2N x f stacked with zero imaginary half.
inline Var embed_real(Tape& t, Var a) {
  const auto& av = t.value(a);
  RealMatrix out(2 * av.rows(), av.cols());
  std::copy(av.data(), av.data() + av.size(), out.data());
  return t.record(std::move(out), {a}, [a](Tape& tp, const RealMatrix& g) {
    if (auto* slot = tp.grad_slot(a))
      for (Index i = 0; i < slot->size(); ++i) slot->data()[i] += g.data()[i];
  });
}

/// (I_n (x) W) x on a stacked signal with d-row stalks; W is a real d x d.
inline Var block_left_mul(Tape& t, Var x, Var w) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  const Index d = wv.rows();
  if (wv.cols() != d || xv.rows() % d != 0) throw std::invalid_argument("block_left_mul: shape mismatch");
  const Index blocks = xv.rows() / d;
  const Index f = xv.cols();
  RealMatrix out(xv.rows(), f);
  for (Index b = 0; b < blocks; ++b)
    for (Index i = 0; i < d; ++i)
      for (Index k = 0; k < d; ++k) {
        const double wik = wv(i, k);
        const double* src = &xv(b * d + k, 0);
        double* dst = &out(b * d + i, 0);
        for (Index j = 0; j < f; ++j) dst[j] += wik * src[j];
      }
  return t.record(std::move(out), {x, w}, [x, w, d, blocks, f](Tape& tp, const RealMatrix& g) {
    const auto& xv = tp.value(x);
    const auto& wv = tp.value(w);
    if (auto* gx = tp.grad_slot(x))
      for (Index b = 0; b < blocks; ++b)
        for (Index i = 0; i < d; ++i)
          for (Index k = 0; k < d; ++k) {
            const double wik = wv(i, k);
            const double* src = &g(b * d + i, 0);
            double* dst = &(*gx)(b * d + k, 0);
            for (Index j = 0; j < f; ++j) dst[j] += wik * src[j];
          }
    if (auto* gw = tp.grad_slot(w))
      for (Index b = 0; b < blocks; ++b)
        for (Index i = 0; i < d; ++i)
          for (Index k = 0; k < d; ++k) {
            const double* gi = &g(b * d + i, 0);
            const double* xk = &xv(b * d + k, 0);
            double s = 0.0;
            for (Index j = 0; j < f; ++j) s += gi[j] * xk[j];
            (*gw)(i, k) += s;
          }
  });
}

/// Zeroes entries whose real part is not positive.
inline Var complex_relu(Tape& t, Var x) {
  const auto& xv = t.value(x);
  const Index half = xv.rows() / 2;
  const Index f = xv.cols();
  RealMatrix out(xv.rows(), f);
  for (Index i = 0; i < half; ++i)
    for (Index j = 0; j < f; ++j) {
      const bool on = xv(i, j) > 0.0;
      t.note_kink(on);
      if (on) {
        out(i, j) = xv(i, j);
        out(half + i, j) = xv(half + i, j);
      }
    }
  return t.record(std::move(out), {x}, [x, half, f](Tape& tp, const RealMatrix& g) {
    auto* slot = tp.grad_slot(x);
    if (!slot) return;
    const auto& xv = tp.value(x);
    for (Index i = 0; i < half; ++i)
      for (Index j = 0; j < f; ++j)
        if (xv(i, j) > 0.0) {
          (*slot)(i, j) += g(i, j);
          (*slot)(half + i, j) += g(half + i, j);
        }
  });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Complex layer normalization per feature column: the N complex entries of
/// a column are treated as 2-vectors, centred, whitened by the inverse square
/// root of their 2 x 2 covariance (+ eps I), then mapped by gamma (2 x 2) and
/// beta (1 x 2).
inline Var complex_layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = kLayerNormEpsilon) {
  const auto& xv = t.value(x);
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  if (gv.rows() != 2 || gv.cols() != 2 || bv.rows() != 1 || bv.cols() != 2) {
    throw std::invalid_argument("complex_layer_norm: gamma must be 2x2 and beta 1x2");
  }
  const Index half = xv.rows() / 2;
  const Index f = xv.cols();
  if (half < 2) throw std::invalid_argument("complex_layer_norm: need at least two entries per column");
  const double inv_n = 1.0 / static_cast<double>(half);

  struct Column {
    double mr = 0.0, mi = 0.0;
    SymmetricEigen eig;
    RealMatrix r;  // Sigma^{-1/2}
  };
  std::vector<Column> cols(f);
  RealMatrix white(xv.rows(), f);
  RealMatrix out(xv.rows(), f);
  for (Index j = 0; j < f; ++j) {
    auto& c = cols[j];
    for (Index i = 0; i < half; ++i) {
      c.mr += xv(i, j);
      c.mi += xv(half + i, j);
    }
    c.mr *= inv_n;
    c.mi *= inv_n;
    RealMatrix sigma(2, 2);
    for (Index i = 0; i < half; ++i) {
      const double a = xv(i, j) - c.mr;
      const double b = xv(half + i, j) - c.mi;
      sigma(0, 0) += a * a;
      sigma(0, 1) += a * b;
      sigma(1, 1) += b * b;
    }
    sigma(0, 0) = sigma(0, 0) * inv_n + eps;
    sigma(1, 1) = sigma(1, 1) * inv_n + eps;
    sigma(0, 1) *= inv_n;
    sigma(1, 0) = sigma(0, 1);
    c.eig = jacobi_eigen(sigma, true, 1e-15);
    c.r = symmetric_function(c.eig, [](double l) { return 1.0 / std::sqrt(l); });
    for (Index i = 0; i < half; ++i) {
      const double a = xv(i, j) - c.mr;
      const double b = xv(half + i, j) - c.mi;
      const double wa = c.r(0, 0) * a + c.r(0, 1) * b;
      const double wb = c.r(1, 0) * a + c.r(1, 1) * b;
      white(i, j) = wa;
      white(half + i, j) = wb;
      out(i, j) = gv(0, 0) * wa + gv(0, 1) * wb + bv(0, 0);
      out(half + i, j) = gv(1, 0) * wa + gv(1, 1) * wb + bv(0, 1);
    }
  }
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, half, f, inv_n, cols = std::move(cols), white = std::move(white)](
                      Tape& tp, const RealMatrix& g) {
                    const auto& xv = tp.value(x);
                    const auto& gv = tp.value(gamma);
                    auto* gx = tp.grad_slot(x);
                    auto* gg = tp.grad_slot(gamma);
                    auto* gb = tp.grad_slot(beta);
                    for (Index j = 0; j < f; ++j) {
                      const auto& c = cols[j];
                      RealMatrix grad_r(2, 2);
                      std::vector<double> hr(half), hi(half);
                      for (Index i = 0; i < half; ++i) {
                        const double g0 = g(i, j);
                        const double g1 = g(half + i, j);
                        const double w0 = white(i, j);
                        const double w1 = white(half + i, j);
                        if (gg) {
                          (*gg)(0, 0) += g0 * w0;
                          (*gg)(0, 1) += g0 * w1;
                          (*gg)(1, 0) += g1 * w0;
                          (*gg)(1, 1) += g1 * w1;
                        }
                        if (gb) {
                          (*gb)(0, 0) += g0;
                          (*gb)(0, 1) += g1;
                        }
                        // h = gamma^T g, the gradient at the whitened value.
                        hr[i] = gv(0, 0) * g0 + gv(1, 0) * g1;
                        hi[i] = gv(0, 1) * g0 + gv(1, 1) * g1;
                        const double a = xv(i, j) - c.mr;
                        const double b = xv(half + i, j) - c.mi;
                        grad_r(0, 0) += hr[i] * a;
                        grad_r(0, 1) += hr[i] * b;
                        grad_r(1, 0) += hi[i] * a;
                        grad_r(1, 1) += hi[i] * b;
                      }
                      if (!gx) continue;
                      const RealMatrix gs = inverse_sqrt_backward(c.eig, grad_r);
                      std::vector<double> dr(half), di(half);
                      double mean_r = 0.0, mean_i = 0.0;
                      for (Index i = 0; i < half; ++i) {
                        const double a = xv(i, j) - c.mr;
                        const double b = xv(half + i, j) - c.mi;
                        dr[i] = c.r(0, 0) * hr[i] + c.r(1, 0) * hi[i] + 2.0 * inv_n * (gs(0, 0) * a + gs(0, 1) * b);
                        di[i] = c.r(0, 1) * hr[i] + c.r(1, 1) * hi[i] + 2.0 * inv_n * (gs(1, 0) * a + gs(1, 1) * b);
                        mean_r += dr[i];
                        mean_i += di[i];
                      }
                      mean_r *= inv_n;
                      mean_i *= inv_n;
                      for (Index i = 0; i < half; ++i) {
                        (*gx)(i, j) += dr[i] - mean_r;
                        (*gx)(half + i, j) += di[i] - mean_i;
                      }
                    }
                  });
}

/// Stacked 2(n d) x f signal -> n x 2df: row u is the real stalk block of u
/// flattened, followed by its imaginary block.
inline Var unwind_nodes(Tape& t, Var x, Index n) {
  const auto& xv = t.value(x);
  const Index half = xv.rows() / 2;
  if (n == 0 || half % n != 0) throw std::invalid_argument("unwind_nodes: rows not divisible by node count");
  const Index width = (half / n) * xv.cols();  // d f
  RealMatrix out(n, 2 * width);
  for (Index u = 0; u < n; ++u) {
    std::copy(xv.data() + u * width, xv.data() + (u + 1) * width, &out(u, 0));
    std::copy(xv.data() + half * xv.cols() + u * width, xv.data() + half * xv.cols() + (u + 1) * width,
              &out(u, width));
  }
  return t.record(std::move(out), {x}, [x, n, width, half](Tape& tp, const RealMatrix& g) {
    auto* slot = tp.grad_slot(x);
    if (!slot) return;
    const Index off = half * slot->cols();
    for (Index u = 0; u < n; ++u)
      for (Index k = 0; k < width; ++k) {
        slot->data()[u * width + k] += g(u, k);
        slot->data()[off + u * width + k] += g(u, width + k);
      }
  });
}

}  // namespace dshn::ad
