#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sego/errors.hpp"
#include "sego/generators.hpp"
#include "sego/views.hpp"
#include "test_support.hpp"

namespace sego {
namespace {

// Probability that a walk started at v is back at v after t steps, summed
// over every explicit walk.
double closed_walk_probability(const Graph& g, NodeId v, int t) {
  std::function<double(NodeId, int)> walk = [&](NodeId at, int left) -> double {
    if (left == 0) return at == v ? 1.0 : 0.0;
    const auto& nbrs = g.neighbors(at);
    double p = 0.0;
    for (NodeId w : nbrs) p += walk(w, left - 1) / static_cast<double>(nbrs.size());
    return p;
  };
  if (g.neighbors(v).empty()) return 0.0;
  return walk(v, t);
}

TEST(RandomWalkTest, K2AlternatesReturnProbability) {
  const Matrix rw = random_walk_encoding(complete_graph(2), 3);
  Matrix expected(2, 3);
  expected << 0, 1, 0, 0, 1, 0;
  EXPECT_EQ(rw, expected);
}

TEST(RandomWalkTest, TriangleTwoSteps) {
  const Matrix rw = random_walk_encoding(complete_graph(3), 2);
  for (int v = 0; v < 3; ++v) {
    EXPECT_NEAR(rw(v, 0), 0.0, 1e-15);
    EXPECT_NEAR(rw(v, 1), 0.5, 1e-15);
  }
}

TEST(RandomWalkTest, IsolatedNodeRowIsZero) {
  const Graph g(3, {{0, 1}}, Matrix::Ones(3, 1));
  const Matrix rw = random_walk_encoding(g, 4);
  EXPECT_TRUE(rw.row(2).isZero());
  EXPECT_EQ(rw(0, 1), 1.0);
}

TEST(RandomWalkTest, MatchesExplicitWalkEnumeration) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_connected_graph(3 + trial % 5, 0.4, rng);
    const int r = 5;
    const Matrix rw = random_walk_encoding(g, r);
    for (int v = 0; v < g.node_count(); ++v) {
      for (int t = 1; t <= r; ++t) EXPECT_NEAR(rw(v, t - 1), closed_walk_probability(g, v, t), 1e-12);
    }
  }
}

TEST(RandomWalkTest, RejectsNonPositiveLength) {
  EXPECT_THROW(random_walk_encoding(complete_graph(2), 0), ConfigError);
  EXPECT_THROW(build_triplet_views(complete_graph(2), 2, 0), ConfigError);
}

TEST(LaplacianTest, DiagonalIsOne) {
  EXPECT_EQ(laplacian_pe(complete_graph(2)), Vector::Ones(2));
  EXPECT_EQ(laplacian_pe(complete_graph(3)), Vector::Ones(3));
  EXPECT_EQ(laplacian_pe(Graph(1, {}, Matrix::Ones(1, 1))), Vector::Ones(1));
}

TEST(TripletViewsTest, K2TopoRows) {
  const Graph g = complete_graph(2);
  const TripletViews views = build_triplet_views(g, 2, 3);
  Matrix expected(2, 4);
  expected << 0, 1, 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(views.topo, expected);
  EXPECT_EQ(&views.basic.get(), &g);
  EXPECT_EQ(views.anchor.height(), 2);
}

TEST(TripletViewsTest, AnchorHeightIsK) {
  const Dataset ds = test::synthetic_dataset("S", test::Family::communities, 10, 2);
  for (const auto& g : ds.graphs) {
    for (int k : {1, 3, 5}) EXPECT_EQ(build_triplet_views(g, k, 4).anchor.height(), k);
  }
}

TEST(TripletViewsTest, InputGraphUnchanged) {
  std::mt19937_64 rng(7);
  Graph g = random_connected_graph(9, 0.3, rng);
  g = g.with_features(test::random_matrix(9, 3, -1, 1, rng));
  const auto edges = g.edges();
  const Matrix features = g.node_features();
  build_triplet_views(g, 3, 6);
  EXPECT_EQ(g.edges(), edges);
  EXPECT_EQ(g.node_features(), features);
}

TEST(TripletViewsTest, TopoIgnoresNodeFeatures) {
  std::mt19937_64 rng(9);
  const Graph g = random_connected_graph(8, 0.3, rng);
  const Graph h = g.with_features(test::random_matrix(8, 5, -3, 3, rng));
  EXPECT_EQ(topo_features(g, 6), topo_features(h, 6));
}

TEST(TripletViewsTest, TopoRowsFollowNodePermutation) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = random_connected_graph(7, 0.35, rng);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> edges;
    for (const auto& e : g.edges()) edges.push_back({perm[e.u], perm[e.v]});
    const Graph h(7, edges, Matrix::Ones(7, 1));
    const Matrix a = topo_features(g, 6);
    const Matrix b = topo_features(h, 6);
    for (int v = 0; v < 7; ++v) EXPECT_LT((a.row(v) - b.row(perm[v])).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TripletViewsTest, EntriesWithinUnitInterval) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_connected_graph(2 + trial, 0.2, rng);
    const Matrix topo = topo_features(g, 8);
    EXPECT_GE(topo.minCoeff(), 0.0);
    EXPECT_LE(topo.maxCoeff(), 1.0 + 1e-12);
  }
}

class ViewCacheTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = test::scratch_dir("views"); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(ViewCacheTest, RoundTripMatchesFreshBuild) {
  const ViewCache cache(dir_);
  std::mt19937_64 rng(23);
  const Graph g = random_connected_graph(10, 0.25, rng);
  EXPECT_FALSE(cache.load(g, "D", 4, 3, 5).has_value());
  const TripletViews built = cache.get_or_build(g, "D", 4, 3, 5);
  ASSERT_TRUE(std::filesystem::exists(cache.entry_path("D", 4, 3, 5)));
  const auto loaded = cache.load(g, "D", 4, 3, 5);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->topo, built.topo);
  EXPECT_EQ(loaded->anchor.dump(), built.anchor.dump());
  EXPECT_EQ(loaded->anchor.dump(), build_coding_tree(g, 3).dump());
}

TEST_F(ViewCacheTest, CorruptEntryIsAMiss) {
  const ViewCache cache(dir_);
  const Graph g = two_triangles_bridge();
  cache.get_or_build(g, "D", 0, 2, 3);
  {
    std::ofstream out(cache.entry_path("D", 0, 2, 3), std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  EXPECT_FALSE(cache.load(g, "D", 0, 2, 3).has_value());
  const TripletViews rebuilt = cache.get_or_build(g, "D", 0, 2, 3);
  EXPECT_EQ(rebuilt.topo, topo_features(g, 3));
  EXPECT_TRUE(cache.load(g, "D", 0, 2, 3).has_value());
}

TEST_F(ViewCacheTest, EntryForDifferentGraphIsAMiss) {
  const ViewCache cache(dir_);
  cache.get_or_build(complete_graph(4), "D", 0, 2, 3);
  EXPECT_FALSE(cache.load(path_graph(3), "D", 0, 2, 3).has_value());
}

}  // namespace
}  // namespace sego
