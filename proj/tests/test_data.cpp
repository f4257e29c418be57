#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "dshn/data.hpp"
#include "support.hpp"

using namespace dshn;

namespace {

Index count(const std::vector<bool>& m) { return static_cast<Index>(std::count(m.begin(), m.end(), true)); }

}  // namespace

TEST(Synthetic, DefaultShape) {
  const auto d = generate_synthetic({});
  EXPECT_EQ(d.hypergraph.num_vertices(), 500u);
  EXPECT_EQ(d.hypergraph.num_hyperedges(), 450u);
  EXPECT_EQ(d.num_classes, 5u);
  EXPECT_EQ(d.features.cols(), 1u);
  EXPECT_EQ(count(d.masks.train), 250u);
  EXPECT_EQ(count(d.masks.val), 125u);
  EXPECT_EQ(count(d.masks.test), 125u);
  for (Index u = 0; u < 500; ++u) EXPECT_EQ(d.labels[u], u / 100);
}

TEST(Synthetic, HyperedgeStructure) {
  SyntheticConfig c;
  c.n = 60;
  c.classes = 3;
  c.intra = 4;
  c.inter = 5;
  c.h_min = 2;
  c.h_max = 6;
  c.seed = 3;
  const auto d = generate_synthetic(c);
  ASSERT_EQ(d.hypergraph.num_hyperedges(), 3u * 4 + 3u * 5);
  Index directed = 0;
  for (const auto& e : d.hypergraph.hyperedges()) {
    if (!e.directed()) {
      const Index cls = d.labels[e.tail[0]];
      for (Index u : e.tail) EXPECT_EQ(d.labels[u], cls);
      EXPECT_GE(e.tail.size(), 2u);
      EXPECT_LE(e.tail.size(), 6u);
      continue;
    }
    ++directed;
    const Index ct = d.labels[e.tail[0]], ch = d.labels[e.head[0]];
    EXPECT_LT(ct, ch);
    for (Index u : e.tail) EXPECT_EQ(d.labels[u], ct);
    for (Index u : e.head) EXPECT_EQ(d.labels[u], ch);
    EXPECT_GE(e.tail.size(), 2u);
    EXPECT_LE(e.head.size(), 6u);
  }
  EXPECT_EQ(directed, 15u);
  EXPECT_EQ(d.features, degree_features(d.hypergraph));
}

TEST(Synthetic, NoInterClassEdges) {
  SyntheticConfig c;
  c.inter = 0;
  const auto d = generate_synthetic(c);
  EXPECT_EQ(d.hypergraph.num_hyperedges(), 150u);
  for (const auto& e : d.hypergraph.hyperedges()) EXPECT_FALSE(e.directed());
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticConfig c;
  c.n = 100;
  c.seed = 8;
  const auto a = generate_synthetic(c), b = generate_synthetic(c);
  EXPECT_EQ(a.hypergraph, b.hypergraph);
  EXPECT_EQ(a.masks.train, b.masks.train);
  c.seed = 9;
  EXPECT_FALSE(generate_synthetic(c).hypergraph == a.hypergraph);
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig c;
  c.n = 501;
  EXPECT_THROW(generate_synthetic(c), std::invalid_argument);
  c = {};
  c.h_min = 1;
  EXPECT_THROW(generate_synthetic(c), std::invalid_argument);
  c = {};
  c.n = 20;
  EXPECT_THROW(generate_synthetic(c), std::invalid_argument);  // h_max 10 > class size 4
}

TEST(Split, SizesAndPartition) {
  const auto m = split(4, kDefaultSplit, 1);
  EXPECT_EQ(count(m.train), 2u);
  EXPECT_EQ(count(m.val), 1u);
  EXPECT_EQ(count(m.test), 1u);
  const auto r = split(7, kDefaultSplit, 1);
  EXPECT_EQ(count(r.train), 4u);
  EXPECT_EQ(count(r.val), 2u);
  EXPECT_EQ(count(r.test), 1u);
  for (Index u = 0; u < 7; ++u) EXPECT_EQ(r.train[u] + r.val[u] + r.test[u], 1);
  EXPECT_THROW(split(4, {0.5, 0.5, 0.5}, 0), std::invalid_argument);
}

TEST(Features, DegreeColumn) {
  const auto h = make_hypergraph(4, {{{0, 1, 2}, {}}, {{1}, {3}}});
  const auto f = degree_features(h);
  EXPECT_EQ(f.values(), (std::vector<double>{1, 2, 1, 1}));
}

TEST(Files, RoundTrip) {
  const auto dir = dshn::testing::scratch_dir("data");
  SyntheticConfig c;
  c.n = 50;
  c.classes = 5;
  c.h_max = 6;
  c.intra = 3;
  c.inter = 2;
  const auto d = generate_synthetic(c);
  const std::string prefix = (dir / "syn").string();
  write_dataset(d, prefix);
  for (const auto& f : dataset_files(prefix)) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  const auto back = read_dataset(prefix);
  EXPECT_EQ(back.hypergraph, d.hypergraph);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.num_classes, 5u);
  EXPECT_EQ(back.masks.train, d.masks.train);
  EXPECT_EQ(back.masks.val, d.masks.val);
  EXPECT_EQ(back.masks.test, d.masks.test);
  std::filesystem::remove_all(dir);
}

TEST(Files, MalformedInput) {
  std::istringstream labels("1 0\n1 1\n");
  EXPECT_THROW(read_labels(labels, 2, "x"), ParseError);
  std::istringstream splits("train 1\nval 1\ntest 2\n");
  EXPECT_THROW(read_splits(splits, 2, "x"), ParseError);
  std::istringstream two("train 1\nval 2\n");
  EXPECT_THROW(read_splits(two, 2, "x"), ParseError);
  std::istringstream ragged("1 2\n3\n");
  EXPECT_THROW(read_features(ragged, 2, "x"), ParseError);
  EXPECT_THROW(read_dataset("/nonexistent/prefix"), ParseError);
}
