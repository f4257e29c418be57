#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dshn/laplacian.hpp"
#include "dshn/random_instances.hpp"
#include "dshn/spectral.hpp"

namespace dshn {

inline constexpr double kTheoremTolerance = 1e-10;

struct TheoremResult {
  std::string name;
  Index instances = 0;
  double max_deviation = 0.0;
  double tolerance = kTheoremTolerance;
  bool passed() const { return max_deviation <= tolerance; }
};

namespace detail {

/// Maps scaled by sqrt(2) on undirected incidences and 1 on directed ones,
/// d = 1: the scaling under which the directed sheaf Laplacian of a
/// 2-uniform hypergraph is the magnetic Laplacian.
inline SheafAssignment magnetic_scaling_sheaf(const DirectedHypergraph& h, double q) {
  auto inc = incidences_of(h);
  std::vector<RealMatrix> maps;
  for (Index k = 0; k < inc.size(); ++k) {
    const bool directed = h.hyperedge(inc.edge[k]).directed();
    maps.emplace_back(1, 1, directed ? 1.0 : std::sqrt(2.0));
  }
  return SheafAssignment({q, 1, MapShape::diagonal}, std::move(inc), std::move(maps));
}

inline ComplexMatrix scaled(ComplexMatrix m, double s) {
  m *= s;
  return m;
}

}  // namespace detail

/// Undirected 2-uniform hypergraphs with any sheaf: L equals half the sheaf
/// graph Laplacian; with the trivial sheaf, half of D - A.
inline TheoremResult check_sheaf_graph(Index trials, std::uint64_t seed) {
  TheoremResult r{"sheaf-graph"};
  for (Index t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto g = random_mixed_graph(rng, rng.uniform_int(3, 12), 0.4, 0.0);
    const auto h = to_hypergraph(g);
    SheafConfig cfg;
    cfg.q = kSpectralSuiteCharges[rng.uniform_int(0, kSpectralSuiteCharges.size() - 1)];
    cfg.stalk_dim = rng.uniform_int(1, 4);
    cfg.shape = kAllMapShapes[rng.uniform_int(0, kAllMapShapes.size() - 1)];
    const auto a = build_fixed_sheaf(h, cfg, rng.bits());
    const auto lap = build_laplacian(h, a).L.to_dense();
    const auto hansen = reference_laplacian(ReferenceKind::sheaf_graph, HypergraphInput{&h, &a});
    r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap, detail::scaled(hansen, 0.5)));

    const auto triv = build_fixed_sheaf(h, {cfg.q, 1, MapShape::trivial}, 0);
    const auto lap1 = build_laplacian(h, triv).L.to_dense();
    const auto classical = reference_laplacian(ReferenceKind::classical_graph, GraphInput{g, cfg.q});
    r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap1, detail::scaled(classical, 0.5)));
    ++r.instances;
  }
  return r;
}

/// Mixed 2-uniform hypergraphs under the magnetic scaling: L equals the
/// magnetic Laplacian for q in {0, 0.1, 0.25}, and the sign-magnetic one at
/// q = 1/4.
inline TheoremResult check_magnetic(Index trials, std::uint64_t seed) {
  TheoremResult r{"magnetic"};
  for (Index t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto g = random_mixed_graph(rng, rng.uniform_int(3, 12), 0.4, 0.5);
    const auto h = to_hypergraph(g);
    for (double q : {0.0, 0.1, 0.25}) {
      const auto a = detail::magnetic_scaling_sheaf(h, q);
      const auto lap = build_laplacian(h, a).L.to_dense();
      const auto mag = reference_laplacian(ReferenceKind::magnetic, GraphInput{g, q});
      r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap, mag));
      if (q == 0.25) {
        const auto sig = reference_laplacian(ReferenceKind::sign_magnetic, GraphInput{g, q});
        r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap, sig));
      }
    }
    ++r.instances;
  }
  return r;
}

/// Trivial sheaf, q = 0: L_N equals the normalized undirected hypergraph
/// Laplacian I - D_V^{-1/2} B D_E^{-1} B^T D_V^{-1/2}, directed or not.
inline TheoremResult check_zhou(Index trials, std::uint64_t seed) {
  TheoremResult r{"zhou"};
  for (Index t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    RandomHypergraphOptions opt;
    opt.directed_prob = (t % 2 == 0) ? 0.0 : 0.6;
    const auto h = random_hypergraph(rng, opt);
    const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
    const auto lap = build_laplacian(h, a, {true}).L.to_dense();
    const auto z = reference_laplacian(ReferenceKind::zhou, HypergraphInput{&h, nullptr});
    r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap, z));
    ++r.instances;
  }
  return r;
}

/// Trivial sheaf, q = 1/4: L_N equals the generalized directed Laplacian.
inline TheoremResult check_gedi(Index trials, std::uint64_t seed) {
  TheoremResult r{"gedi"};
  for (Index t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    RandomHypergraphOptions opt;
    opt.directed_prob = 0.7;
    const auto h = random_hypergraph(rng, opt);
    const auto a = build_fixed_sheaf(h, {0.25, 1, MapShape::trivial}, 0);
    const auto lap = build_laplacian(h, a, {true}).L.to_dense();
    const auto g = reference_laplacian(ReferenceKind::gedi, HypergraphInput{&h, nullptr});
    r.max_deviation = std::max(r.max_deviation, max_abs_diff(lap, g));
    ++r.instances;
  }
  return r;
}

inline std::vector<TheoremResult> run_theorem_suites(Index trials, std::uint64_t seed) {
  return {check_sheaf_graph(trials, derive_seed(seed, 1)), check_magnetic(trials, derive_seed(seed, 2)),
          check_zhou(trials, derive_seed(seed, 3)), check_gedi(trials, derive_seed(seed, 4))};
}

// ---------------------------------------------------------------------------
// Counterexample for the prior linear sheaf hypergraph Laplacian: two
// overlapping undirected 3-edges on 4 vertices with trivial maps.

inline DirectedHypergraph counterexample_hypergraph() {
  return make_hypergraph(4, {{{0, 1, 2}, {}}, {{1, 2, 3}, {}}});
}

/// The operator as published for this instance (entries times 1/3).
inline ComplexMatrix counterexample_published_matrix() {
  const double v[4][4] = {{1, -1, -1, 0}, {-1, 2, -2, -1}, {-1, -2, 2, -1}, {0, -1, -1, 1}};
  ComplexMatrix m(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) m(i, j) = v[i][j] / 3.0;
  return m;
}

/// The spectrum published alongside that matrix.
inline std::vector<double> counterexample_published_eigenvalues() { return {-2.0, 2.0 / 3.0, 4.0 / 3.0, 2.0}; }

struct CounterexampleResult {
  ComplexMatrix matrix;
  double matrix_deviation = 0.0;  // vs the published matrix
  std::vector<double> eigenvalues;
  double eigenvalue_deviation = 0.0;  // vs the published spectrum
  double min_eig = 0.0;
  bool psd = true;

  bool matrix_matches() const { return matrix_deviation <= 1e-12; }
  bool spectrum_matches(double tol = 1e-9) const { return eigenvalue_deviation <= tol; }
};

inline CounterexampleResult check_counterexample() {
  CounterexampleResult r;
  const auto h = counterexample_hypergraph();
  const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
  r.matrix = reference_laplacian(ReferenceKind::duta_linear, HypergraphInput{&h, &a});
  r.matrix_deviation = max_abs_diff(r.matrix, counterexample_published_matrix());
  const auto spec = hermitian_spectrum(r.matrix);
  r.eigenvalues = spec.eigenvalues;
  r.min_eig = spec.min_eig;
  r.psd = spec.is_psd_at(kPsdTolerance);
  const auto expected = counterexample_published_eigenvalues();
  for (Index i = 0; i < expected.size(); ++i)
    r.eigenvalue_deviation = std::max(r.eigenvalue_deviation, std::abs(r.eigenvalues[i] - expected[i]));
  return r;
}

inline void write_theorem_report(const std::vector<TheoremResult>& results, const CounterexampleResult* cx,
                                 std::ostream& out) {
  for (const auto& r : results) {
    out << r.name << " instances " << r.instances << " max_deviation " << detail::format_double(r.max_deviation)
        << ' ' << (r.passed() ? "PASS" : "FAIL") << '\n';
  }
  if (!cx) return;
  out << "counterexample matrix_deviation " << detail::format_double(cx->matrix_deviation) << ' '
      << (cx->matrix_matches() ? "PASS" : "FAIL") << '\n';
  out << "counterexample eigenvalues";
  for (double v : cx->eigenvalues) out << ' ' << detail::format_double(v);
  out << '\n';
  out << "counterexample published_eigenvalues";
  for (double v : counterexample_published_eigenvalues()) out << ' ' << detail::format_double(v);
  out << '\n';
  out << "counterexample eigenvalue_deviation " << detail::format_double(cx->eigenvalue_deviation) << ' '
      << (cx->spectrum_matches() ? "PASS" : "FAIL") << '\n';
  out << "counterexample min_eig " << detail::format_double(cx->min_eig) << " psd " << (cx->psd ? "yes" : "no")
      << '\n';
}

}  // namespace dshn
