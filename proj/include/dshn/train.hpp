#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/data.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/model.hpp"
#include "dshn/spectral.hpp"

namespace dshn {

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(Index epoch, const std::string& msg) : std::runtime_error(msg), epoch_(epoch) {}
  Index epoch() const { return epoch_; }

 private:
  Index epoch_;
};

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  Index epochs = 200;
  Index patience = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Every this many epochs, export each layer's normalized Laplacian and
  /// check its spectrum (0 disables; skipped when n d exceeds the cap).
  Index spectral_check_every = 0;
  Index spectral_check_cap = 256;
};

inline void validate(const TrainConfig& t) {
  if (!(t.lr >= 0.0) || !std::isfinite(t.lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  if (!(t.weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
  if (t.patience < 1) throw std::invalid_argument("patience must be >= 1");
}

struct EpochMetrics {
  Index epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct SpectralCheckRecord {
  Index epoch = 0;
  Index layer = 0;
  double max_eig = 0.0;
  double min_eig = 0.0;
  bool passed = true;
};

struct TrainResult {
  ModelState best;
  std::vector<EpochMetrics> history;
  std::vector<SpectralCheckRecord> spectral_checks;
  Index best_epoch = 0;
  double best_val_acc = -1.0;
  double test_acc = 0.0;
};

/// One Adam step with L2 decay folded into the gradient. Frozen parameters
/// are left untouched.
inline void adam_step(ModelState& s, const std::vector<RealMatrix>& grads, const TrainConfig& t) {
  ++s.step;
  const double c1 = 1.0 - std::pow(t.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(t.beta2, static_cast<double>(s.step));
  for (Index i = 0; i < s.params.size(); ++i) {
    auto& p = s.params[i];
    if (p.frozen) continue;
    auto& m = s.moment1[i];
    auto& v = s.moment2[i];
    for (Index k = 0; k < p.value.size(); ++k) {
      const double g = grads[i].data()[k] + t.weight_decay * p.value.data()[k];
      m.data()[k] = t.beta1 * m.data()[k] + (1.0 - t.beta1) * g;
      v.data()[k] = t.beta2 * v.data()[k] + (1.0 - t.beta2) * g * g;
      const double mhat = m.data()[k] / c1;
      const double vhat = v.data()[k] / c2;
      p.value.data()[k] -= t.lr * mhat / (std::sqrt(vhat) + t.adam_eps);
    }
  }
}

/// Normalized Laplacians of every layer at the current parameters.
inline std::vector<SpectrumReport> layer_spectra(const DiffusionStructure& s, const RealMatrix& features,
                                                 const ModelState& state, const ModelConfig& c,
                                                 const DirectedHypergraph& h) {
  ad::Tape t;
  ForwardOptions opt;
  opt.track_gradients = false;
  const auto g = build_forward(t, s, features, state, c, opt);
  std::vector<SpectrumReport> out;
  LaplacianOptions lo;
  lo.normalized = true;
  lo.regularization = c.degree_jitter > 0.0 ? DegreeRegularization::jitter : DegreeRegularization::strict;
  lo.jitter = c.degree_jitter;
  for (const auto& m : g.maps) {
    const auto bundle = build_laplacian(h, s.to_sheaf(t.value(m)), lo);
    out.push_back(hermitian_spectrum(bundle.L.to_dense()));
  }
  return out;
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Full-batch training with early stopping on validation accuracy. Returns
/// the state from the best validation epoch (earliest on ties).
inline TrainResult train(const LabeledDataset& data, const ModelConfig& c, const TrainConfig& tc,
                         const EpochCallback& on_epoch = {}) {
  validate(c);
  validate(tc);
  const DiffusionStructure s(data.hypergraph, c.stalk_dim, c.q, c.map_shape);
  ModelState state = init_model(c, data.features, data.num_classes);
  TrainResult r;
  r.best = state;
  Index since_best = 0;
  // With positive jitter a degree block can only fail to be positive
  // definite through non-finite maps, so that failure is divergence.
  auto guarded = [&](Index epoch, auto&& fn) {
    try {
      return fn();
    } catch (const SingularDegreeError& e) {
      if (c.degree_jitter > 0.0)
        throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) + " (" + e.what() + ")");
      throw;
    }
  };
  for (Index epoch = 1; epoch <= tc.epochs; ++epoch) {
    ForwardOptions fo;
    fo.training = true;
    fo.dropout_seed = derive_seed(c.seed, 0xD0 + epoch);
    const auto lg =
        guarded(epoch, [&] { return loss_and_gradients(s, data.features, data.labels, data.masks.train, state, c, fo); });
    bool finite = std::isfinite(lg.loss);
    for (const auto& g : lg.gradients)
      for (double v : g.values()) finite = finite && std::isfinite(v);
    if (!finite) throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
    adam_step(state, lg.gradients, tc);

    const RealMatrix logits = guarded(epoch, [&] { return forward(s, data.features, state, c); });
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = lg.loss;
    em.train_acc = accuracy(logits, data.labels, data.masks.train);
    em.val_acc = accuracy(logits, data.labels, data.masks.val);
    r.history.push_back(em);
    if (on_epoch) on_epoch(em);

    if (tc.spectral_check_every && epoch % tc.spectral_check_every == 0 &&
        s.signal_rows() <= tc.spectral_check_cap) {
      const auto spectra = layer_spectra(s, data.features, state, c, data.hypergraph);
      for (Index l = 0; l < spectra.size(); ++l) {
        r.spectral_checks.push_back({epoch, l, spectra[l].max_eig, spectra[l].min_eig,
                                     spectra[l].max_eig <= 1.0 + 1e-6});
      }
    }

    if (em.val_acc > r.best_val_acc) {
      r.best_val_acc = em.val_acc;
      r.best_epoch = epoch;
      r.best = state;
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  r.test_acc = accuracy(forward(s, data.features, r.best, c), data.labels, data.masks.test);
  return r;
}

}  // namespace dshn
