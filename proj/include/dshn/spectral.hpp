#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dshn/block_matrix.hpp"
#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"
#include "dshn/laplacian.hpp"
#include "dshn/random_instances.hpp"
#include "dshn/rng.hpp"
#include "dshn/sheaf.hpp"

namespace dshn {

inline constexpr double kPsdTolerance = 1e-8;

struct SpectrumReport {
  std::vector<double> eigenvalues;  // ascending
  double min_eig = 0.0;
  double max_eig = 0.0;
  double hermitian_defect = 0.0;
  double pairing_defect = 0.0;  // max gap inside each duplicated pair of the embedding
  int sweeps = 0;

  bool is_psd_at(double tol) const { return eigenvalues.empty() || min_eig >= -tol; }
};

/// Eigenvalues of a Hermitian matrix through the real symmetric embedding
/// [[Re M, -Im M], [Im M, Re M]], whose spectrum is that of M doubled.
inline SpectrumReport hermitian_spectrum(const ComplexMatrix& m) {
  const Index k = m.rows();
  if (m.cols() != k) throw std::invalid_argument("hermitian_eigenvalues: matrix is not square");
  if (k > kDenseExportCap) {
    throw std::length_error("hermitian_eigenvalues: dimension " + std::to_string(k) + " exceeds cap " +
                            std::to_string(kDenseExportCap));
  }
  SpectrumReport r;
  r.hermitian_defect = hermitian_defect(m);
  if (r.hermitian_defect > 1e-8) {
    throw std::invalid_argument("hermitian_eigenvalues: matrix is not Hermitian (defect " +
                                std::to_string(r.hermitian_defect) + ")");
  }
  if (k == 0) return r;
  RealMatrix emb(2 * k, 2 * k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      // Symmetrize so tiny Hermitian defects do not leak into the solver.
      const Complex z = 0.5 * (m(i, j) + std::conj(m(j, i)));
      emb(i, j) = z.real();
      emb(i, k + j) = -z.imag();
      emb(k + i, j) = z.imag();
      emb(k + i, k + j) = z.real();
    }
  }
  const auto eig = jacobi_eigen(std::move(emb), false, 1e-12);
  r.sweeps = eig.sweeps;
  r.eigenvalues.reserve(k);
  for (Index i = 0; i < k; ++i) {
    r.eigenvalues.push_back(eig.values[2 * i]);
    r.pairing_defect = std::max(r.pairing_defect, std::abs(eig.values[2 * i + 1] - eig.values[2 * i]));
  }
  r.min_eig = r.eigenvalues.front();
  r.max_eig = r.eigenvalues.back();
  return r;
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& m) { return hermitian_spectrum(m).eigenvalues; }

struct EnergyReport {
  double quadratic_form = 0.0;
  double imaginary_residual = 0.0;
  double sum_form = 0.0;
  double relative_gap = 0.0;
};

/// x^dagger L_N x against the per-hyperedge disagreement sum. Columns of x
/// are independent signals whose energies add.
inline EnergyReport dirichlet_energy(const DirectedHypergraph& h, const SheafAssignment& a,
                                     const LaplacianBundle& bundle, const ComplexMatrix& x) {
  if (!bundle.normalized) throw std::invalid_argument("dirichlet_energy: bundle must be normalized");
  if (x.rows() != bundle.signal_rows()) throw std::invalid_argument("dirichlet_energy: dimension mismatch");
  const Index d = a.stalk_dim();

  const ComplexMatrix lx = bundle.L.multiply(x);
  Complex quad{};
  for (Index i = 0; i < x.size(); ++i) quad += std::conj(x.data()[i]) * lx.data()[i];

  // Sum form, built from the sheaf directly.
  const auto deg = build_degree_matrices(h, a);
  LaplacianOptions opt;
  opt.normalized = true;
  std::vector<ComplexMatrix> rinv;
  for (Index u = 0; u < h.num_vertices(); ++u) rinv.push_back(to_complex(degree_inverse_sqrt(deg.vertex[u], u, opt)));
  double sum = 0.0;
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    const auto& edge = h.hyperedge(e);
    std::vector<Index> mem(edge.tail);
    mem.insert(mem.end(), edge.head.begin(), edge.head.end());
    std::vector<ComplexMatrix> y;
    for (Index u : mem) {
      ComplexMatrix xu(d, x.cols());
      for (Index i = 0; i < d; ++i)
        for (Index c = 0; c < x.cols(); ++c) xu(i, c) = x(u * d + i, c);
      y.push_back(matmul(directed_restriction(a, u, e), matmul(rinv[u], xu)));
    }
    double edge_sum = 0.0;
    for (Index i = 0; i < mem.size(); ++i)
      for (Index j = 0; j < mem.size(); ++j)
        if (i != j) edge_sum += frobenius_norm(y[i] - y[j]) * frobenius_norm(y[i] - y[j]);
    sum += edge_sum / static_cast<double>(edge.degree());
  }
  sum *= 0.5;

  EnergyReport r;
  r.quadratic_form = quad.real();
  r.imaginary_residual = quad.imag();
  r.sum_form = sum;
  r.relative_gap = std::abs(r.quadratic_form - r.sum_form) / std::max(1.0, std::abs(r.quadratic_form));
  return r;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct SuiteReport {
  std::vector<CheckResult> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

/// Text form of an instance: the hypergraph file, then `sheaf q d shape`,
/// then one line of row-major entries per incidence.
inline std::string serialize_instance(const DirectedHypergraph& h, const SheafAssignment& a) {
  std::ostringstream out;
  write_hypergraph(h, out);
  out << "sheaf " << detail::format_double(a.q()) << ' ' << a.stalk_dim() << ' ' << to_string(a.config().shape)
      << '\n';
  for (const auto& f : a.maps()) {
    for (Index i = 0; i < f.size(); ++i) out << (i ? " " : "") << detail::format_double(f.data()[i]);
    out << '\n';
  }
  return out.str();
}

struct SpectralSuiteOptions {
  double hermitian_tol = 1e-10;
  double psd_tol = kPsdTolerance;
  double bound_tol = 1e-8;
  double energy_tol = 1e-9;
  double realness_tol = 1e-12;
  std::uint64_t signal_seed = 0;
};

/// Spectral checks on one instance: Hermitian defect, PSD and unit upper
/// bound of L_N, energy agreement, and realness at q = 0 (or with no
/// directed hyperedge).
inline SuiteReport verify_spectral_suite(const DirectedHypergraph& h, const SheafAssignment& a,
                                         const SpectralSuiteOptions& opt = {}) {
  LaplacianOptions lo;
  lo.normalized = true;
  const auto bundle = build_laplacian(h, a, lo);
  const auto dense = bundle.L.to_dense();
  const auto spec = hermitian_spectrum(dense);
  SuiteReport r;
  r.checks.push_back({"hermitian", spec.hermitian_defect <= opt.hermitian_tol, spec.hermitian_defect,
                      opt.hermitian_tol});
  r.checks.push_back({"pairing", spec.pairing_defect <= 1e-9, spec.pairing_defect, 1e-9});
  r.checks.push_back({"psd", spec.min_eig >= -opt.psd_tol, spec.min_eig, -opt.psd_tol});
  r.checks.push_back({"upper_bound", spec.max_eig <= 1.0 + opt.bound_tol, spec.max_eig, 1.0 + opt.bound_tol});

  Rng rng(opt.signal_seed);
  ComplexMatrix x(bundle.signal_rows(), 1);
  for (auto& v : x.values()) v = Complex(rng.normal(), rng.normal());
  const auto energy = dirichlet_energy(h, a, bundle, x);
  r.checks.push_back({"energy", energy.relative_gap <= opt.energy_tol && energy.quadratic_form >= -1e-9,
                      energy.relative_gap, opt.energy_tol});

  const bool undirected =
      std::none_of(h.hyperedges().begin(), h.hyperedges().end(), [](const Hyperedge& e) { return e.directed(); });
  if (a.q() == 0.0 || undirected) {
    double imag = 0.0;
    for (const auto& z : dense.values()) imag = std::max(imag, std::abs(z.imag()));
    r.checks.push_back({"real_at_q0", imag <= opt.realness_tol, imag, opt.realness_tol});
  }
  return r;
}

struct SpectralTrialSummary {
  Index trials = 0;
  std::map<std::string, Index> applicable;
  std::map<std::string, Index> passed;
  std::map<std::string, double> worst;
  std::vector<std::string> counterexamples;
  Index duta_trials = 0;
  Index duta_not_psd = 0;
  Index duta_2uniform_trials = 0;
  Index duta_2uniform_not_psd = 0;
  double duta_min_eig = 0.0;

  bool all_passed() const {
    for (const auto& [name, n] : applicable)
      if (passed.at(name) != n) return false;
    return true;
  }
};

/// Randomized suite over `trials` instances derived from `seed`. Alongside
/// each instance, the prior linear sheaf hypergraph Laplacian is built on the
/// same data and its PSD failures are counted; an undirected 2-uniform
/// instance exercises the case where that operator is PSD.
inline SpectralTrialSummary run_spectral_trials(Index trials, std::uint64_t seed,
                                                const SpectralSuiteOptions& base = {}) {
  SpectralTrialSummary s;
  s.trials = trials;
  for (Index t = 0; t < trials; ++t) {
    const auto inst = random_spectral_instance(derive_seed(seed, t));
    SpectralSuiteOptions opt = base;
    opt.signal_seed = derive_seed(inst.seed, 1);
    const auto report = verify_spectral_suite(inst.hypergraph, inst.sheaf, opt);
    for (const auto& c : report.checks) {
      ++s.applicable[c.name];
      s.passed[c.name] += c.passed ? 1 : 0;
      auto [it, fresh] = s.worst.emplace(c.name, c.value);
      // Worst means furthest toward failure: lowest for lower bounds.
      if (!fresh) it->second = (c.name == "psd") ? std::min(it->second, c.value) : std::max(it->second, c.value);
    }
    if (!report.passed()) {
      std::string failed;
      for (const auto& c : report.checks)
        if (!c.passed) failed += (failed.empty() ? "" : ",") + c.name;
      s.counterexamples.push_back("# trial " + std::to_string(t) + " failed " + failed + "\n" +
                                  serialize_instance(inst.hypergraph, inst.sheaf));
    }

    const auto duta = hermitian_spectrum(reference_laplacian(
        ReferenceKind::duta_linear, HypergraphInput{&inst.hypergraph, &inst.sheaf}));
    ++s.duta_trials;
    if (!duta.is_psd_at(base.psd_tol)) ++s.duta_not_psd;
    s.duta_min_eig = std::min(s.duta_min_eig, duta.min_eig);

    Rng rng(derive_seed(inst.seed, 2));
    const auto g = random_mixed_graph(rng, rng.uniform_int(3, 10), 0.5, 0.0);
    if (g.edges.empty()) continue;
    const auto h2 = to_hypergraph(g);
    SheafConfig cfg = inst.sheaf.config();
    cfg.q = 0.0;
    const auto a2 = build_fixed_sheaf(h2, cfg, rng.bits());
    const auto duta2 = hermitian_spectrum(reference_laplacian(ReferenceKind::duta_linear, HypergraphInput{&h2, &a2}));
    ++s.duta_2uniform_trials;
    if (!duta2.is_psd_at(base.psd_tol)) ++s.duta_2uniform_not_psd;
  }
  return s;
}

inline void write_spectral_report(const SpectralTrialSummary& s, std::ostream& out) {
  out << "trials " << s.trials << '\n';
  for (const auto& [name, n] : s.applicable) {
    out << "check " << name << ' ' << s.passed.at(name) << '/' << n << " worst "
        << detail::format_double(s.worst.at(name)) << '\n';
  }
  out << "prior_operator not_psd " << s.duta_not_psd << '/' << s.duta_trials << " min_eig "
      << detail::format_double(s.duta_min_eig) << '\n';
  out << "prior_operator_2uniform not_psd " << s.duta_2uniform_not_psd << '/' << s.duta_2uniform_trials << '\n';
  out << "counterexamples " << s.counterexamples.size() << '\n';
  for (const auto& c : s.counterexamples) out << c;
}

}  // namespace dshn
