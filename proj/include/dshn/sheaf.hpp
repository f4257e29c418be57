#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/rng.hpp"

namespace dshn {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class MapShape { trivial, diagonal, full };

inline std::string to_string(MapShape s) {
  switch (s) {
    case MapShape::trivial: return "trivial";
    case MapShape::diagonal: return "diagonal";
    case MapShape::full: return "full";
  }
  return "?";
}

inline MapShape parse_map_shape(const std::string& s) {
  if (s == "trivial") return MapShape::trivial;
  if (s == "diagonal") return MapShape::diagonal;
  if (s == "full") return MapShape::full;
  throw std::invalid_argument("unknown map shape '" + s + "'");
}

struct SheafConfig {
  double q = 0.0;
  Index stalk_dim = 1;
  MapShape shape = MapShape::trivial;
};

inline void validate(const SheafConfig& c) {
  if (c.stalk_dim < 1) throw std::invalid_argument("stalk dimension must be >= 1");
  if (!std::isfinite(c.q)) throw std::invalid_argument("charge parameter q must be finite");
}

/// Phase applied to incidences with the given role: 1 for heads,
/// e^{-2 pi i q} for tails.
inline Complex role_coefficient(Role r, double q) {
  return r == Role::head ? Complex(1.0, 0.0) : std::polar(1.0, -kTwoPi * q);
}

/// S^(q)_{u <| e}: 1 on the head set, e^{-2 pi i q} on the tail set, 0 off e.
inline Complex directional_coefficient(const DirectedHypergraph& h, Index u, Index e, double q) {
  const auto role = h.hyperedge(e).role_of(u);
  if (!role) return {0.0, 0.0};
  return role_coefficient(*role, q);
}

/// conj(S_a) * S_b for incidences a and b of the same hyperedge. This is the
/// phase multiplying F_a^T F_b in the (a, b) block of the Laplacian:
/// tail-tail and head-head give 1, (tail, head) gives e^{+2 pi i q},
/// (head, tail) gives e^{-2 pi i q}.
inline Complex phase_product(Role conjugated, Role plain, double q) {
  return std::conj(role_coefficient(conjugated, q)) * role_coefficient(plain, q);
}

/// Real restriction maps F_{u <| e}, one d x d block per incidence in
/// Incidences order.
class SheafAssignment {
 public:
  SheafAssignment() = default;
  SheafAssignment(SheafConfig config, Incidences incidences, std::vector<RealMatrix> maps)
      : config_(config), incidences_(std::move(incidences)), maps_(std::move(maps)) {
    validate(config_);
    if (maps_.size() != incidences_.size()) {
      throw std::invalid_argument("sheaf: one restriction map per incidence required");
    }
    const Index d = config_.stalk_dim;
    for (Index k = 0; k < maps_.size(); ++k) {
      const auto& f = maps_[k];
      if (f.rows() != d || f.cols() != d) throw std::invalid_argument("sheaf: restriction map has wrong shape");
      for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
          if (!std::isfinite(f(i, j))) throw std::invalid_argument("sheaf: non-finite map entry");
          if (config_.shape == MapShape::trivial && f(i, j) != (i == j ? 1.0 : 0.0)) {
            throw std::invalid_argument("sheaf: trivial shape requires identity maps");
          }
          if (config_.shape == MapShape::diagonal && i != j && f(i, j) != 0.0) {
            throw std::invalid_argument("sheaf: diagonal shape requires zero off-diagonals");
          }
        }
      }
    }
  }

  const SheafConfig& config() const { return config_; }
  double q() const { return config_.q; }
  Index stalk_dim() const { return config_.stalk_dim; }
  const Incidences& incidences() const { return incidences_; }
  const std::vector<RealMatrix>& maps() const { return maps_; }
  const RealMatrix& map(Index k) const { return maps_.at(k); }

  const RealMatrix& map(Index u, Index e) const {
    const auto k = incidences_.find(u, e);
    if (!k) {
      throw std::out_of_range("sheaf: vertex " + std::to_string(u) + " is not in hyperedge " +
                              std::to_string(e));
    }
    return maps_[*k];
  }

  /// Throws unless this assignment was built for exactly the incidences of h.
  void check_covers(const DirectedHypergraph& h) const {
    if (!(incidences_ == incidences_of(h))) {
      throw std::invalid_argument("sheaf: incidence structure does not match hypergraph");
    }
  }

  bool operator==(const SheafAssignment& o) const {
    return config_.q == o.config_.q && config_.stalk_dim == o.config_.stalk_dim &&
           config_.shape == o.config_.shape && incidences_ == o.incidences_ && maps_ == o.maps_;
  }

 private:
  SheafConfig config_;
  Incidences incidences_;
  std::vector<RealMatrix> maps_;
};

/// Identity maps for the trivial shape; otherwise entries uniform on [-1, 1]
/// (diagonal shape draws only the diagonal).
inline SheafAssignment build_fixed_sheaf(const DirectedHypergraph& h, const SheafConfig& config,
                                         std::uint64_t seed) {
  validate(config);
  Incidences inc = incidences_of(h);
  const Index d = config.stalk_dim;
  Rng rng(seed);
  std::vector<RealMatrix> maps;
  maps.reserve(inc.size());
  for (Index k = 0; k < inc.size(); ++k) {
    RealMatrix f(d, d);
    switch (config.shape) {
      case MapShape::trivial:
        f = RealMatrix::identity(d);
        break;
      case MapShape::diagonal:
        for (Index i = 0; i < d; ++i) f(i, i) = rng.uniform(-1.0, 1.0);
        break;
      case MapShape::full:
        for (auto& v : f.values()) v = rng.uniform(-1.0, 1.0);
        break;
    }
    maps.push_back(std::move(f));
  }
  return SheafAssignment(config, std::move(inc), std::move(maps));
}

/// S^(q)_{u <| e} F_{u <| e}.
inline ComplexMatrix directed_restriction(const SheafAssignment& a, Index k) {
  const auto& inc = a.incidences();
  ComplexMatrix out = to_complex(a.map(k));
  out *= role_coefficient(inc.role.at(k), a.q());
  return out;
}

inline ComplexMatrix directed_restriction(const SheafAssignment& a, Index u, Index e) {
  const auto k = a.incidences().find(u, e);
  if (!k) {
    throw std::out_of_range("directed_restriction: vertex " + std::to_string(u) + " is not in hyperedge " +
                            std::to_string(e));
  }
  return directed_restriction(a, *k);
}

}  // namespace dshn
