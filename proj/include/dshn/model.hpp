#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/autodiff.hpp"
#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/rng.hpp"
#include "dshn/sheaf.hpp"
#include "dshn/sheaf_ops.hpp"

namespace dshn {

struct ModelConfig {
  Index num_layers = 2;
  Index stalk_dim = 2;
  Index hidden = 8;  // f
  double q = 0.25;
  MapShape map_shape = MapShape::diagonal;
  ad::Activation sheaf_activation = ad::Activation::sigmoid;
  Index sheaf_depth = 1;
  Index sheaf_hidden = 16;
  bool residual = true;
  bool light = false;
  bool dynamic_sheaf = false;
  double sheaf_dropout = 0.0;
  Aggregation aggregation = Aggregation::mean;
  Index classifier_width = 32;
  bool left_projection = true;
  bool layer_norm = true;
  bool nonlinearity = true;
  double degree_jitter = kDefaultDegreeJitter;
  std::uint64_t seed = 0;
};

inline void validate(const ModelConfig& c) {
  if (c.num_layers > 5) throw std::invalid_argument("num_layers must be in [0, 5]");
  if (c.stalk_dim < 1 || c.stalk_dim > 6) throw std::invalid_argument("stalk_dim must be in [1, 6]");
  if (c.hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  if (c.map_shape == MapShape::trivial) throw std::invalid_argument("learned sheaves use diagonal or full maps");
  if (c.sheaf_depth < 1 || c.sheaf_depth > 2) throw std::invalid_argument("sheaf MLP depth must be 1 or 2");
  if (!(c.sheaf_dropout >= 0.0 && c.sheaf_dropout < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (c.classifier_width < 1) throw std::invalid_argument("classifier width must be >= 1");
  if (!std::isfinite(c.q)) throw std::invalid_argument("q must be finite");
  if (!(c.degree_jitter >= 0.0)) throw std::invalid_argument("degree jitter must be >= 0");
}

struct Parameter {
  std::string name;
  RealMatrix value;
  bool frozen = false;  // restriction-map predictor in light mode
};

struct ModelState {
  std::vector<Parameter> params;
  // Fixed input standardization applied before the projection.
  std::vector<double> feature_shift;
  std::vector<double> feature_scale;
  Index input_dim = 0;
  Index num_classes = 0;
  // Adam moments, one per parameter.
  std::vector<RealMatrix> moment1;
  std::vector<RealMatrix> moment2;
  std::uint64_t step = 0;

  Index index_of(const std::string& name) const {
    for (Index i = 0; i < params.size(); ++i)
      if (params[i].name == name) return i;
    throw std::out_of_range("no parameter named '" + name + "'");
  }
  const RealMatrix& value(const std::string& name) const { return params[index_of(name)].value; }
  RealMatrix& value(const std::string& name) { return params[index_of(name)].value; }
};

inline Index num_sheaf_predictors(const ModelConfig& c) {
  if (c.num_layers == 0) return 0;
  return c.dynamic_sheaf ? c.num_layers : 1;
}

/// Standardization that maps each feature column to zero mean, unit spread
/// (columns with no spread are only centred).
inline void fit_feature_standardization(ModelState& s, const RealMatrix& features) {
  const Index f0 = features.cols();
  s.feature_shift.assign(f0, 0.0);
  s.feature_scale.assign(f0, 1.0);
  const double n = static_cast<double>(features.rows());
  if (features.rows() == 0) return;
  for (Index j = 0; j < f0; ++j) {
    double mean = 0.0;
    for (Index i = 0; i < features.rows(); ++i) mean += features(i, j);
    mean /= n;
    double var = 0.0;
    for (Index i = 0; i < features.rows(); ++i) var += (features(i, j) - mean) * (features(i, j) - mean);
    var /= n;
    s.feature_shift[j] = mean;
    s.feature_scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

namespace detail {

inline RealMatrix glorot(Rng& rng, Index fan_in, Index fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  RealMatrix w(fan_in, fan_out);
  for (auto& v : w.values()) v = rng.uniform(-a, a);
  return w;
}

}  // namespace detail

inline ModelState init_model(const ModelConfig& c, const RealMatrix& features, Index num_classes) {
  validate(c);
  if (num_classes < 2) throw std::invalid_argument("need at least two classes");
  ModelState s;
  s.input_dim = features.cols();
  s.num_classes = num_classes;
  fit_feature_standardization(s, features);
  Rng rng(derive_seed(c.seed, 0xA11));
  const Index d = c.stalk_dim;
  const Index f = c.hidden;
  const Index df = d * f;
  const Index map_width = c.map_shape == MapShape::diagonal ? d : d * d;
  auto add = [&](std::string name, RealMatrix v, bool frozen = false) {
    s.params.push_back({std::move(name), std::move(v), frozen});
  };
  add("input.weight", detail::glorot(rng, std::max<Index>(features.cols(), 1), df));
  add("input.bias", RealMatrix(1, df));
  for (Index l = 0; l < num_sheaf_predictors(c); ++l) {
    const std::string p = "sheaf" + std::to_string(l) + ".";
    if (c.sheaf_depth == 1) {
      add(p + "weight0", detail::glorot(rng, 4 * df, map_width), c.light);
      add(p + "bias0", RealMatrix(1, map_width), c.light);
    } else {
      add(p + "weight0", detail::glorot(rng, 4 * df, c.sheaf_hidden), c.light);
      add(p + "bias0", RealMatrix(1, c.sheaf_hidden), c.light);
      add(p + "weight1", detail::glorot(rng, c.sheaf_hidden, map_width), c.light);
      add(p + "bias1", RealMatrix(1, map_width), c.light);
    }
  }
  for (Index l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "w1", RealMatrix::identity(d));
    add(p + "w2", detail::glorot(rng, f, f));
    RealMatrix gamma(2, 2);
    gamma(0, 0) = gamma(1, 1) = 1.0 / std::sqrt(2.0);
    add(p + "gamma", gamma);
    add(p + "beta", RealMatrix(1, 2));
  }
  add("classifier.weight0", detail::glorot(rng, 2 * df, c.classifier_width));
  add("classifier.bias0", RealMatrix(1, c.classifier_width));
  add("classifier.weight1", detail::glorot(rng, c.classifier_width, num_classes));
  add("classifier.bias1", RealMatrix(1, num_classes));
  for (const auto& p : s.params) {
    s.moment1.emplace_back(p.value.rows(), p.value.cols());
    s.moment2.emplace_back(p.value.rows(), p.value.cols());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stacked <-> complex conversions and value-level building blocks.

inline RealMatrix to_stacked(const ComplexMatrix& x) {
  RealMatrix out(2 * x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      out(i, j) = x(i, j).real();
      out(x.rows() + i, j) = x(i, j).imag();
    }
  return out;
}

inline ComplexMatrix from_stacked(const RealMatrix& s) {
  const Index half = s.rows() / 2;
  ComplexMatrix out(half, s.cols());
  for (Index i = 0; i < half; ++i)
    for (Index j = 0; j < s.cols(); ++j) out(i, j) = Complex(s(i, j), s(half + i, j));
  return out;
}

/// [Re X | Im X].
inline RealMatrix unwind(const ComplexMatrix& x) {
  RealMatrix out(x.rows(), 2 * x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      out(i, j) = x(i, j).real();
      out(i, x.cols() + j) = x(i, j).imag();
    }
  return out;
}

inline Complex complex_relu(Complex z) { return z.real() > 0.0 ? z : Complex{}; }

inline ComplexMatrix complex_layer_norm(const ComplexMatrix& x, const RealMatrix& gamma, const RealMatrix& beta,
                                        double eps = ad::kLayerNormEpsilon) {
  ad::Tape t;
  const auto out = ad::complex_layer_norm(t, t.constant(to_stacked(x)), t.constant(gamma), t.constant(beta), eps);
  return from_stacked(t.value(out));
}

/// One diffusion step computed from an assembled normalized bundle:
/// Q_N (I (x) W1) X W2, optional layer norm, residual, complex ReLU.
struct LayerOptions {
  bool residual = false;
  bool layer_norm = false;
  bool nonlinearity = false;
  RealMatrix gamma;
  RealMatrix beta;
};

inline ComplexMatrix diffusion_layer(const ComplexMatrix& x, const LaplacianBundle& bundle, const RealMatrix* w1,
                                     const RealMatrix& w2, const LayerOptions& opt = {}) {
  if (!bundle.normalized) throw std::invalid_argument("diffusion_layer: bundle must be normalized");
  if (x.rows() != bundle.signal_rows()) throw std::invalid_argument("diffusion_layer: dimension mismatch");
  const Index d = bundle.stalk_dim;
  ComplexMatrix y = x;
  if (w1) {
    const auto cw1 = to_complex(*w1);
    for (Index u = 0; u < bundle.num_vertices; ++u) {
      ComplexMatrix blk(d, x.cols());
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < x.cols(); ++j) blk(i, j) = x(u * d + i, j);
      const auto prod = matmul(cw1, blk);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < x.cols(); ++j) y(u * d + i, j) = prod(i, j);
    }
  }
  y = matmul(y, to_complex(w2));
  ComplexMatrix out = bundle.Q.multiply(y);
  if (opt.layer_norm) out = complex_layer_norm(out, opt.gamma, opt.beta);
  if (opt.residual) out += x;
  if (opt.nonlinearity)
    for (auto& z : out.values()) z = complex_relu(z);
  return out;
}

// ---------------------------------------------------------------------------
// Forward pass on the tape.

struct ForwardOptions {
  bool training = false;           // enables sheaf dropout
  std::uint64_t dropout_seed = 0;  // per-step stream for dropout masks
  bool track_gradients = true;     // false: every parameter is a constant
  /// Replaces predicted maps layer by layer (K x map_width each); used to
  /// hold the Laplacian fixed when probing detached gradients.
  const std::vector<RealMatrix>* override_maps = nullptr;
};

struct ForwardGraph {
  std::vector<ad::Var> params;   // aligned with ModelState::params
  std::vector<ad::Var> signals;  // stacked signal after projection and after each layer
  std::vector<ad::Var> maps;     // restriction-map parameters used by each layer
  ad::Var logits;
};

inline ForwardGraph build_forward(ad::Tape& t, const DiffusionStructure& s, const RealMatrix& features,
                                  const ModelState& state, const ModelConfig& c, const ForwardOptions& opt = {}) {
  if (features.rows() != s.num_vertices) throw std::invalid_argument("forward: feature rows != vertex count");
  if (features.cols() != state.input_dim) throw std::invalid_argument("forward: feature width mismatch");
  if (s.stalk_dim != c.stalk_dim || s.shape != c.map_shape || s.q != c.q) {
    throw std::invalid_argument("forward: diffusion structure does not match the model config");
  }
  ForwardGraph g;
  for (const auto& p : state.params) {
    g.params.push_back(opt.track_gradients && !p.frozen ? t.variable(p.value) : t.constant(p.value));
  }
  auto P = [&](const std::string& name) { return g.params[state.index_of(name)]; };

  const Index n = s.num_vertices;
  const Index d = c.stalk_dim;
  const Index f = c.hidden;

  RealMatrix std_features = features;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < features.cols(); ++j)
      std_features(i, j) = (features(i, j) - state.feature_shift[j]) * state.feature_scale[j];
  ad::Var x = ad::affine(t, t.constant(std::move(std_features)), P("input.weight"), P("input.bias"));
  x = ad::reshape(t, x, n * d, f);
  x = ad::embed_real(t, x);
  g.signals.push_back(x);

  ad::Var maps{};
  for (Index l = 0; l < c.num_layers; ++l) {
    if (opt.override_maps) {
      maps = t.constant(opt.override_maps->at(l));
    } else if (l == 0 || c.dynamic_sheaf) {
      const std::string p = "sheaf" + std::to_string(c.dynamic_sheaf ? l : 0) + ".";
      // Light mode: the sheaf sees the signal's value but no gradient flows
      // back through the Laplacian construction.
      const ad::Var src = c.light ? t.constant(t.value(x)) : x;
      ad::Var h = ad::gather_incidence(t, src, s, c.aggregation);
      h = ad::affine(t, h, P(p + "weight0"), P(p + "bias0"));
      if (c.sheaf_depth == 2) {
        h = ad::relu(t, h);
        h = ad::affine(t, h, P(p + "weight1"), P(p + "bias1"));
      }
      maps = ad::activate(t, h, c.sheaf_activation);
      if (opt.training && c.sheaf_dropout > 0.0) {
        Rng rng(derive_seed(opt.dropout_seed, l));
        std::vector<double> scale(s.incidences.size());
        for (auto& v : scale) v = rng.uniform() < c.sheaf_dropout ? 0.0 : 1.0 / (1.0 - c.sheaf_dropout);
        maps = ad::row_scale(t, maps, std::move(scale));
      }
    }
    g.maps.push_back(maps);

    const std::string p = "layer" + std::to_string(l) + ".";
    ad::Var y = c.left_projection ? ad::block_left_mul(t, x, P(p + "w1")) : x;
    y = ad::matmul(t, y, P(p + "w2"));
    ad::Var pre = ad::sheaf_diffusion(t, y, maps, s, c.degree_jitter);
    if (c.layer_norm) pre = ad::complex_layer_norm(t, pre, P(p + "gamma"), P(p + "beta"));
    if (c.residual) pre = ad::add(t, pre, x);
    x = c.nonlinearity ? ad::complex_relu(t, pre) : pre;
    g.signals.push_back(x);
  }

  ad::Var z = ad::unwind_nodes(t, x, n);
  z = ad::affine(t, z, P("classifier.weight0"), P("classifier.bias0"));
  z = ad::relu(t, z);
  g.logits = ad::affine(t, z, P("classifier.weight1"), P("classifier.bias1"));
  return g;
}

inline RealMatrix forward(const DiffusionStructure& s, const RealMatrix& features, const ModelState& state,
                          const ModelConfig& c) {
  ad::Tape t;
  ForwardOptions opt;
  opt.track_gradients = false;
  const auto g = build_forward(t, s, features, state, c, opt);
  return t.value(g.logits);
}

/// Restriction maps the model predicts for one layer from signal x (stacked
/// complex, nd x f), as a sheaf over the structure's hypergraph.
inline SheafAssignment predict_sheaf(const ComplexMatrix& x, const DiffusionStructure& s, const ModelState& state,
                                     const ModelConfig& c, Index predictor = 0) {
  ad::Tape t;
  const std::string p = "sheaf" + std::to_string(predictor) + ".";
  ad::Var h = ad::gather_incidence(t, t.constant(to_stacked(x)), s, c.aggregation);
  h = ad::affine(t, h, t.constant(state.value(p + "weight0")), t.constant(state.value(p + "bias0")));
  if (c.sheaf_depth == 2) {
    h = ad::relu(t, h);
    h = ad::affine(t, h, t.constant(state.value(p + "weight1")), t.constant(state.value(p + "bias1")));
  }
  h = ad::activate(t, h, c.sheaf_activation);
  return s.to_sheaf(t.value(h));
}

inline std::vector<Index> predict_labels(const RealMatrix& logits) {
  std::vector<Index> out(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    out[i] = static_cast<Index>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline double accuracy(const RealMatrix& logits, const std::vector<Index>& labels, const std::vector<bool>& mask) {
  const auto pred = predict_labels(logits);
  Index hit = 0, total = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hit += pred[i] == labels[i] ? 1 : 0;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

struct LossAndGradients {
  double loss = 0.0;
  RealMatrix logits;
  std::vector<RealMatrix> gradients;  // aligned with params; zero for frozen ones
  std::vector<RealMatrix> maps;       // per-layer restriction-map values
  std::uint64_t kink_signature = 0;
};

inline LossAndGradients loss_and_gradients(const DiffusionStructure& s, const RealMatrix& features,
                                           const std::vector<Index>& labels, const std::vector<bool>& mask,
                                           const ModelState& state, const ModelConfig& c,
                                           const ForwardOptions& opt = {}) {
  ad::Tape t;
  const auto g = build_forward(t, s, features, state, c, opt);
  const auto loss = ad::softmax_cross_entropy(t, g.logits, labels, mask);
  t.backward(loss);
  LossAndGradients out;
  out.loss = t.value(loss)(0, 0);
  out.logits = t.value(g.logits);
  for (const auto& v : g.params) out.gradients.push_back(t.grad(v));
  for (const auto& m : g.maps) out.maps.push_back(t.value(m));
  out.kink_signature = t.kink_signature();
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient probe.

struct GradientCheckOptions {
  Index probes_per_parameter = 32;
  double step = 1e-4;
  double tolerance = 1e-4;
  double denominator_floor = 1e-3;  // below this the test is effectively absolute
  std::uint64_t seed = 0;
};

struct ParameterCheck {
  std::string name;
  bool frozen = false;
  Index probed = 0;
  Index skipped_kinks = 0;
  double max_relative_error = 0.0;
  double max_abs_gradient = 0.0;
  bool passed = true;
};

/// Central differences on randomly chosen coordinates of every parameter.
/// Frozen parameters must instead carry an exactly zero gradient. In light
/// mode the Laplacian is held at its base-point value, matching the
/// detached backward pass. Probes whose +/- step changes any rectifier
/// pattern are redrawn (the loss is not differentiable across the kink).
inline std::vector<ParameterCheck> check_gradients(const DiffusionStructure& s, const RealMatrix& features,
                                                   const std::vector<Index>& labels, const std::vector<bool>& mask,
                                                   const ModelState& state, const ModelConfig& c,
                                                   const GradientCheckOptions& opt = {}) {
  const auto base = loss_and_gradients(s, features, labels, mask, state, c);
  ForwardOptions fo;
  if (c.light) fo.override_maps = &base.maps;

  auto eval = [&](const ModelState& st, std::uint64_t& sig) {
    ad::Tape t;
    ForwardOptions o = fo;
    o.track_gradients = false;
    const auto g = build_forward(t, s, features, st, c, o);
    const auto loss = ad::softmax_cross_entropy(t, g.logits, labels, mask);
    sig = t.kink_signature();
    return t.value(loss)(0, 0);
  };
  std::uint64_t base_sig = 0;
  eval(state, base_sig);

  Rng rng(opt.seed);
  std::vector<ParameterCheck> out;
  ModelState probe = state;
  for (Index pi = 0; pi < state.params.size(); ++pi) {
    const auto& p = state.params[pi];
    ParameterCheck r;
    r.name = p.name;
    r.frozen = p.frozen;
    const auto& grad = base.gradients[pi];
    if (p.frozen) {
      r.max_abs_gradient = max_abs(grad);
      r.passed = r.max_abs_gradient == 0.0;
      out.push_back(r);
      continue;
    }
    const Index size = p.value.size();
    const Index want = std::min(opt.probes_per_parameter, size);
    std::vector<Index> order(size);
    for (Index i = 0; i < size; ++i) order[i] = i;
    rng.shuffle(order);
    for (Index oi = 0; oi < size && r.probed < want; ++oi) {
      const Index k = order[oi];
      double& slot = probe.params[pi].value.data()[k];
      const double orig = slot;
      std::uint64_t sig_plus = 0, sig_minus = 0;
      slot = orig + opt.step;
      const double lp = eval(probe, sig_plus);
      slot = orig - opt.step;
      const double lm = eval(probe, sig_minus);
      slot = orig;
      if (sig_plus != base_sig || sig_minus != base_sig) {
        ++r.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * opt.step);
      const double analytic = grad.data()[k];
      const double rel =
          std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), opt.denominator_floor});
      r.max_relative_error = std::max(r.max_relative_error, rel);
      r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(analytic));
      ++r.probed;
    }
    r.passed = r.max_relative_error <= opt.tolerance && r.probed > 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace dshn
