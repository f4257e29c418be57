#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dshn/model.hpp"
#include "dshn/random_instances.hpp"

namespace dshn::testing {

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() / ("dshn-" + tag + "-" + std::to_string(rd()));
  std::filesystem::create_directories(dir);
  return dir;
}

struct GradientInstance {
  DirectedHypergraph hypergraph;
  ModelConfig config;
  ModelState state;
  RealMatrix features;
  std::vector<Index> labels;
  std::vector<bool> mask;
};

/// Small dense hypergraph with a two-layer model. Variant 0: diagonal maps,
/// sigmoid, shared sheaf; 1: full maps, tanh, per-layer sheaves; 2: as 1 with
/// a two-stage map predictor. Trainable parameters get N(0, 0.1) noise so no
/// bias sits exactly on a rectifier kink.
inline GradientInstance gradient_instance(std::uint64_t seed, bool light, int variant) {
  GradientInstance g;
  Rng rng(seed);
  RandomHypergraphOptions ho;
  ho.min_vertices = 8;
  ho.max_vertices = 10;
  ho.min_edges = 8;
  ho.max_edges = 12;
  ho.max_initial_size = 6;
  g.hypergraph = random_hypergraph(rng, ho);
  auto& c = g.config;
  c.stalk_dim = 2;
  c.hidden = 3;
  c.num_layers = 2;
  c.classifier_width = 5;
  c.light = light;
  c.map_shape = variant == 0 ? MapShape::diagonal : MapShape::full;
  c.sheaf_activation = variant == 0 ? ad::Activation::sigmoid : ad::Activation::tanh;
  c.dynamic_sheaf = variant != 0;
  c.sheaf_depth = variant == 2 ? 2 : 1;
  c.sheaf_hidden = 4;
  c.seed = seed;
  const Index n = g.hypergraph.num_vertices();
  g.features = RealMatrix(n, 3);
  for (auto& v : g.features.values()) v = rng.normal();
  g.labels.resize(n);
  for (auto& l : g.labels) l = rng.uniform_int(0, 2);
  g.mask.assign(n, true);
  g.state = init_model(c, g.features, 3);
  Rng noise(derive_seed(seed, 7));
  for (auto& p : g.state.params)
    if (!p.frozen)
      for (auto& v : p.value.values()) v += 0.1 * noise.normal();
  return g;
}

}  // namespace dshn::testing
