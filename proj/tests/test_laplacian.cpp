#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sstream>

#include "dshn/laplacian.hpp"
#include "dshn/random_instances.hpp"

using namespace dshn;

namespace {

DirectedHypergraph two_triangles() { return make_hypergraph(4, {{{0, 1, 2}, {}}, {{1, 2, 3}, {}}}); }

/// Dense L or L_N straight from the definitions, with D_u^{-1/2} by Eigen.
ComplexMatrix dense_oracle(const DirectedHypergraph& h, const SheafAssignment& a, bool normalized, double jitter = 0) {
  const Index n = h.num_vertices(), m = h.num_hyperedges(), d = a.stalk_dim();
  ComplexMatrix b(m * d, n * d);
  for (Index e = 0; e < m; ++e)
    for (Index u = 0; u < n; ++u) {
      if (!h.hyperedge(e).contains(u)) continue;
      const Complex s = directional_coefficient(h, u, e, a.q());
      const auto& f = a.map(u, e);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) b(e * d + i, u * d + j) = s * f(i, j);
    }
  ComplexMatrix de_inv_b = b;
  for (Index e = 0; e < m; ++e)
    for (Index i = 0; i < d; ++i)
      for (Index c = 0; c < n * d; ++c) de_inv_b(e * d + i, c) /= static_cast<double>(h.hyperedge(e).degree());
  const auto q = matmul(adjoint(b), de_inv_b);
  ComplexMatrix dv(n * d, n * d);
  for (Index e = 0; e < m; ++e)
    for (Index u = 0; u < n; ++u) {
      if (!h.hyperedge(e).contains(u)) continue;
      const auto& f = a.map(u, e);
      const auto g = matmul(transpose(f), f);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) dv(u * d + i, u * d + j) += g(i, j);
    }
  ComplexMatrix l = dv;
  l -= q;
  if (!normalized) return l;
  // L_N = I - D^{-1/2} Q D^{-1/2}.
  ComplexMatrix r(n * d, n * d);
  for (Index u = 0; u < n; ++u) {
    Eigen::MatrixXd blk(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) blk(i, j) = dv(u * d + i, u * d + j).real() + (i == j ? jitter : 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk);
    const Eigen::MatrixXd inv = es.operatorInverseSqrt();
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) r(u * d + i, u * d + j) = inv(i, j);
  }
  ComplexMatrix ln = matmul(r, matmul(q, r));
  ln *= -1.0;
  for (Index i = 0; i < n * d; ++i) ln(i, i) += 1.0;
  return ln;
}

ComplexMatrix random_signal(Rng& rng, Index rows, Index cols) {
  ComplexMatrix x(rows, cols);
  for (auto& z : x.values()) z = {rng.normal(), rng.normal()};
  return x;
}

}  // namespace

TEST(BlockMatrix, DuplicatesSumAndAdjoint) {
  BlockComplexMatrix m(2, 3, 1);
  m.add_block(1, 2, ComplexMatrix(1, 1, std::vector<Complex>{{1, 2}}));
  m.add_block(0, 0, ComplexMatrix(1, 1, std::vector<Complex>{{3, 0}}));
  m.add_block(1, 2, ComplexMatrix(1, 1, std::vector<Complex>{{0, 1}}));
  m.finalize();
  EXPECT_EQ(m.num_blocks(), 2u);
  EXPECT_EQ(m.block(1, 2)(0, 0), Complex(1, 3));
  EXPECT_EQ(m.find(0, 1), nullptr);
  const auto a = m.adjoint();
  EXPECT_EQ(a.block(2, 1)(0, 0), Complex(1, -3));
  const auto p = block_product(m, a);
  EXPECT_LT(max_abs_diff(p.to_dense(), matmul(m.to_dense(), a.to_dense())), 1e-15);
}

TEST(BlockMatrix, DenseExportCapAndFormat) {
  BlockComplexMatrix big(kDenseExportCap + 1, 1, 1);
  big.finalize();
  EXPECT_THROW(big.to_dense(), std::length_error);
  std::ostringstream out;
  write_dense(ComplexMatrix(1, 2, std::vector<Complex>{{0.5, -1}, {2, 0}}), out);
  EXPECT_EQ(out.str(), "0.5-1j 2+0j\n");
}

TEST(Incidence, BinaryForTrivialUndirected) {
  const auto h = two_triangles();
  const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
  const auto b = build_incidence(h, a).to_dense();
  const double expected[2][4] = {{1, 1, 1, 0}, {0, 1, 1, 1}};
  for (Index e = 0; e < 2; ++e)
    for (Index u = 0; u < 4; ++u) EXPECT_EQ(b(e, u), Complex(expected[e][u], 0));
}

TEST(Incidence, DirectedEdgePhases) {
  const auto h = make_hypergraph(2, {{{0}, {1}}});
  const auto a = build_fixed_sheaf(h, {0.25, 1, MapShape::trivial}, 0);
  const auto b = build_incidence(h, a).to_dense();
  EXPECT_NEAR(std::abs(b(0, 0) - Complex(0, -1)), 0.0, 1e-15);
  EXPECT_EQ(b(0, 1), Complex(1, 0));
}

TEST(Incidence, EmptyEdgeList) {
  const auto h = make_hypergraph(3, {});
  const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
  const auto b = build_incidence(h, a);
  EXPECT_EQ(b.block_rows(), 0u);
  EXPECT_EQ(b.block_cols(), 3u);
}

TEST(Degrees, Examples) {
  const auto h = two_triangles();
  const auto dm = build_degree_matrices(h, build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0));
  const double expected[] = {1, 2, 2, 1};
  for (Index u = 0; u < 4; ++u) EXPECT_EQ(dm.vertex[u](0, 0), expected[u]);
  EXPECT_EQ(dm.edge, (std::vector<double>{3, 3}));

  const auto single = make_hypergraph(3, {{{0, 1, 2}, {}}});
  RealMatrix f = RealMatrix::identity(2);
  f(0, 0) = 0.3;
  f(1, 1) = -2.0;
  const SheafAssignment s({0.1, 2, MapShape::diagonal}, incidences_of(single), {f, f, f});
  const auto ds = build_degree_matrices(single, s);
  EXPECT_EQ(ds.edge, (std::vector<double>{3}));
  EXPECT_DOUBLE_EQ(ds.vertex[0](0, 0), 0.09);
  EXPECT_DOUBLE_EQ(ds.vertex[0](1, 1), 4.0);
  EXPECT_EQ(ds.vertex[0](0, 1), 0.0);
}

TEST(Laplacian, TwoTrianglesEntries) {
  const auto h = two_triangles();
  const auto l = build_laplacian(h, build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0)).L.to_dense();
  const double diag[] = {2.0 / 3, 4.0 / 3, 4.0 / 3, 2.0 / 3};
  for (Index u = 0; u < 4; ++u) EXPECT_NEAR(std::abs(l(u, u) - diag[u]), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(l(0, 1) - (-1.0 / 3)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(l(1, 2) - (-2.0 / 3)), 0.0, 1e-15);
  EXPECT_EQ(l(0, 3), Complex(0, 0));
}

TEST(Laplacian, MagneticPhaseOnDirectedEdge) {
  const auto h = make_hypergraph(2, {{{0}, {1}}});
  const auto bundle = build_laplacian(h, build_fixed_sheaf(h, {0.25, 1, MapShape::trivial}, 0));
  const auto q = bundle.Q.to_dense();
  EXPECT_NEAR(std::abs(q(0, 1) - 0.5 * std::polar(1.0, kTwoPi * 0.25)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(q(1, 0) - 0.5 * std::polar(1.0, -kTwoPi * 0.25)), 0.0, 1e-15);
}

TEST(Laplacian, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto inst = random_spectral_instance(seed);
    LaplacianOptions opt;
    opt.regularization = DegreeRegularization::jitter;
    const auto l = build_laplacian(inst.hypergraph, inst.sheaf, opt).L.to_dense();
    EXPECT_LT(max_abs_diff(l, dense_oracle(inst.hypergraph, inst.sheaf, false)), 1e-12) << seed;
    opt.normalized = true;
    const auto ln = build_laplacian(inst.hypergraph, inst.sheaf, opt).L.to_dense();
    EXPECT_LT(max_abs_diff(ln, dense_oracle(inst.hypergraph, inst.sheaf, true, opt.jitter)), 1e-8) << seed;
  }
}

TEST(Laplacian, HermitianWithRealDiagonalBlocks) {
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    const auto inst = random_spectral_instance(seed);
    const auto b = build_laplacian(inst.hypergraph, inst.sheaf);
    const auto l = b.L.to_dense();
    EXPECT_LE(hermitian_defect(l), 1e-12);
    const Index d = inst.sheaf.stalk_dim();
    for (Index u = 0; u < inst.hypergraph.num_vertices(); ++u)
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) EXPECT_LE(std::abs(l(u * d + i, u * d + j).imag()), 1e-12);
    bool undirected = inst.sheaf.q() == 0.0;
    if (!undirected) {
      undirected = true;
      for (const auto& e : inst.hypergraph.hyperedges()) undirected = undirected && !e.directed();
    }
    if (undirected) {
      for (const auto& z : l.values()) EXPECT_LE(std::abs(z.imag()), 1e-12);
    }
  }
}

TEST(Laplacian, EntrywiseFormAgreesWithProductForm) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    RandomHypergraphOptions ho;
    ho.max_vertices = 12;
    ho.max_edges = 10;
    const auto h = random_hypergraph(rng, ho);
    const SheafConfig cfg{kSpectralSuiteCharges[rng.uniform_int(0, 3)], rng.uniform_int(1, 4),
                          kAllMapShapes[rng.uniform_int(0, 2)]};
    const auto a = build_fixed_sheaf(h, cfg, rng.bits());
    const auto bundle = build_laplacian(h, a);
    for (Index u = 0; u < h.num_vertices(); ++u)
      for (Index v = 0; v < h.num_vertices(); ++v)
        EXPECT_LT(max_abs_diff(bundle.L.block(u, v), entrywise_block(h, a, u, v)), 1e-10);
  }
}

TEST(Laplacian, EntrywiseIsolatedVertexAndQuarterCharge) {
  const auto h = make_hypergraph(5, {{{0, 1}, {2, 3}}, {{2}, {0}}});
  const auto a = build_fixed_sheaf(h, {0.25, 1, MapShape::trivial}, 0);
  EXPECT_EQ(entrywise_block(h, a, 4, 4), ComplexMatrix(1, 1));
  EXPECT_EQ(entrywise_block(h, a, 4, 0), ComplexMatrix(1, 1));
  // At q = 1/4 each hyperedge adds -i/delta_e to the (u, v) entry when u is
  // in the tail and v in the head, and +i/delta_e the other way round.
  const auto z = entrywise_block(h, a, 0, 2)(0, 0);
  EXPECT_NEAR(z.imag(), -1.0 / 4 + 1.0 / 2, 1e-15);
  EXPECT_NEAR(z.real(), 0.0, 1e-15);
}

TEST(Laplacian, NormalizedIsZhouForTrivialUndirected) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto h = random_hypergraph(rng, {});
    LaplacianOptions opt;
    opt.normalized = true;
    const auto ln = build_laplacian(h, build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0), opt).L.to_dense();
    EXPECT_LT(max_abs_diff(ln, reference_laplacian(ReferenceKind::zhou, HypergraphInput{&h, nullptr})), 1e-12);
  }
}

TEST(Laplacian, SingularDegreeStrictAndJitter) {
  const auto h = make_hypergraph(3, {{{0, 1}, {}}});  // vertex 2 isolated
  const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
  LaplacianOptions opt;
  opt.normalized = true;
  try {
    build_laplacian(h, a, opt);
    FAIL();
  } catch (const SingularDegreeError& e) {
    EXPECT_EQ(e.vertex(), 2u);
  }
  opt.regularization = DegreeRegularization::jitter;
  const auto ln = build_laplacian(h, a, opt).L.to_dense();
  EXPECT_NEAR(ln(2, 2).real(), 1.0, 1e-15);
}

TEST(ApplyLaplacian, MatchesDenseProduct) {
  Rng rng(13);
  for (std::uint64_t seed = 200; seed < 260; ++seed) {
    const auto inst = random_spectral_instance(seed);
    for (bool normalized : {false, true}) {
      LaplacianOptions opt;
      opt.normalized = normalized;
      opt.regularization = DegreeRegularization::jitter;
      const auto b = build_laplacian(inst.hypergraph, inst.sheaf, opt);
      const auto x = random_signal(rng, b.signal_rows(), 3);
      const auto y = apply_laplacian(b, x);
      const auto dense = matmul(b.L.to_dense(), x);
      EXPECT_LT(max_abs_diff(y, dense), 1e-9 * std::max(1.0, max_abs(dense))) << seed;
      // Linearity.
      const auto x2 = random_signal(rng, b.signal_rows(), 3);
      const Complex alpha(0.3, -1.2), beta(-2.0, 0.5);
      ComplexMatrix combo = x;
      combo *= alpha;
      ComplexMatrix tmp = x2;
      tmp *= beta;
      combo += tmp;
      ComplexMatrix expect = y;
      expect *= alpha;
      ComplexMatrix y2 = apply_laplacian(b, x2);
      y2 *= beta;
      expect += y2;
      EXPECT_LT(max_abs_diff(apply_laplacian(b, combo), expect), 1e-9 * std::max(1.0, max_abs(expect)));
    }
  }
}

TEST(ApplyLaplacian, ZeroAndConstants) {
  const auto h = two_triangles();
  const auto b = build_laplacian(h, build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0));
  EXPECT_EQ(max_abs(apply_laplacian(b, ComplexMatrix(4, 2))), 0.0);
  ComplexMatrix c(4, 2);
  for (Index u = 0; u < 4; ++u) {
    c(u, 0) = {2.5, 0};
    c(u, 1) = {-1, 3};
  }
  EXPECT_LT(max_abs(apply_laplacian(b, c)), 1e-15);
  EXPECT_THROW(apply_laplacian(b, ComplexMatrix(3, 1)), std::invalid_argument);
}

TEST(Reference, PriorOperatorPrintedMatrix) {
  const auto h = two_triangles();
  const auto a = build_fixed_sheaf(h, {0.0, 1, MapShape::trivial}, 0);
  const auto l = reference_laplacian(ReferenceKind::duta_linear, HypergraphInput{&h, &a});
  const double printed[4][4] = {{1, -1, -1, 0}, {-1, 2, -2, -1}, {-1, -2, 2, -1}, {0, -1, -1, 1}};
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(l(i, j) - printed[i][j] / 3.0), 0.0, 1e-15);
}

TEST(Reference, MagneticUndirectedEdge) {
  for (double q : {0.0, 0.13, 0.25}) {
    const auto l = reference_laplacian(ReferenceKind::magnetic, GraphInput{{2, {}, {{0, 1}}}, q});
    EXPECT_NEAR(std::abs(l(0, 1) - Complex(-1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(l(0, 0) - Complex(1, 0)), 0.0, 1e-15);
  }
  const auto arc = reference_laplacian(ReferenceKind::magnetic, GraphInput{{2, {{0, 1}}, {}}, 0.25});
  EXPECT_NEAR(std::abs(arc(0, 1) - Complex(0, -0.5)), 0.0, 1e-15);
  EXPECT_THROW(reference_laplacian(ReferenceKind::zhou, GraphInput{}), std::invalid_argument);
}
