#include <fstream>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "sego/errors.hpp"
#include "sego/features.hpp"
#include "sego/generators.hpp"
#include "sego/graph.hpp"
#include "sego/tu_format.hpp"
#include "test_support.hpp"

namespace sego {
namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::vector<NodeId> all_nodes(const Graph& g) {
  std::vector<NodeId> v(g.node_count());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

TEST(GraphTest, NormalizesAndDeduplicatesEdges) {
  Graph g(3, {{1, 0}, {0, 1}, {2, 1}}, Matrix::Zero(3, 1));
  ASSERT_EQ(g.edge_count(), 2);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.edges()[1], (Edge{1, 2}));
  EXPECT_EQ(g.neighbors(1), (std::vector<NodeId>{0, 2}));
}

TEST(GraphTest, RejectsInvalidStorage) {
  EXPECT_THROW(Graph(2, {{0, 0}}, Matrix::Zero(2, 1)), ContractViolation);
  EXPECT_THROW(Graph(2, {{0, 2}}, Matrix::Zero(2, 1)), ContractViolation);
  EXPECT_THROW(Graph(2, {}, Matrix::Zero(3, 1)), ContractViolation);
}

TEST(GraphTest, DegreeVolumeCut) {
  const Graph k3 = complete_graph(3);
  const std::vector<NodeId> zero{0};
  EXPECT_EQ(volume(k3, zero), 2);
  EXPECT_EQ(cut(k3, zero), 2);
  const auto all = all_nodes(k3);
  EXPECT_EQ(volume(k3, all), 6);
  EXPECT_EQ(cut(k3, all), 0);

  const Graph bridge = two_triangles_bridge();
  const std::vector<NodeId> triangle{0, 1, 2};
  EXPECT_EQ(cut(bridge, triangle), 1);
  EXPECT_EQ(volume(bridge, std::vector<NodeId>{}), 0);
  EXPECT_EQ(cut(bridge, std::vector<NodeId>{}), 0);
}

TEST(GraphTest, DegreeSumAndCutSymmetryOnRandomGraphs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Graph g = random_connected_graph(2 + trial % 9, 0.3, rng);
    int degree_sum = 0;
    for (int v = 0; v < g.node_count(); ++v) degree_sum += degree(g, v);
    EXPECT_EQ(degree_sum, 2 * g.edge_count());
    EXPECT_EQ(volume(g, all_nodes(g)), degree_sum);

    std::bernoulli_distribution coin(0.5);
    std::vector<NodeId> s, complement;
    for (int v = 0; v < g.node_count(); ++v) (coin(rng) ? s : complement).push_back(v);
    EXPECT_EQ(cut(g, s), cut(g, complement));
  }
}

TEST(DatasetTest, ValidateRejectsEmptyAndMixedDims) {
  Dataset empty{"e", {}, 1};
  EXPECT_THROW(empty.validate(), ContractViolation);
  Dataset mixed{"m", {Graph(1, {}, Matrix::Zero(1, 1)), Graph(1, {}, Matrix::Zero(1, 2))}, 1};
  EXPECT_THROW(mixed.validate(), ContractViolation);
}

class TuFormatTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = test::scratch_dir("tu"); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(TuFormatTest, ParsesSmallestUndirectedGraph) {
  write_file(dir_ / "T_A.txt", "1, 2\n2, 1\n");
  write_file(dir_ / "T_graph_indicator.txt", "1\n1\n");
  const Dataset ds = parse_tu_dataset(dir_, "T");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.graphs[0].node_count(), 2);
  ASSERT_EQ(ds.graphs[0].edge_count(), 1);
  EXPECT_EQ(ds.graphs[0].edges()[0], (Edge{0, 1}));
  EXPECT_EQ(ds.graphs[0].feature_dim(), 0);
}

TEST_F(TuFormatTest, DropsSelfLoops) {
  write_file(dir_ / "T_A.txt", "1, 1\n1, 2\n");
  write_file(dir_ / "T_graph_indicator.txt", "1\n1\n");
  const Dataset ds = parse_tu_dataset(dir_, "T");
  ASSERT_EQ(ds.graphs[0].edge_count(), 1);
  EXPECT_EQ(ds.graphs[0].edges()[0], (Edge{0, 1}));
}

TEST_F(TuFormatTest, RemapsNodeIdsPerGraph) {
  write_file(dir_ / "T_A.txt", "1, 2\n3, 4\n4, 5\n");
  write_file(dir_ / "T_graph_indicator.txt", "1\n1\n2\n2\n2\n");
  write_file(dir_ / "T_graph_labels.txt", "0\n1\n");
  write_file(dir_ / "T_node_labels.txt", "5\n6\n7\n8\n9\n");
  const Dataset ds = parse_tu_dataset(dir_, "T");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.graphs[1].node_count(), 3);
  EXPECT_EQ(ds.graphs[1].edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(*ds.graphs[1].graph_label(), 1);
  EXPECT_EQ(*ds.graphs[1].node_labels(), (std::vector<int>{7, 8, 9}));
}

TEST_F(TuFormatTest, MissingFileNamesTheFile) {
  write_file(dir_ / "T_A.txt", "1, 2\n");
  try {
    parse_tu_dataset(dir_, "T");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("T_graph_indicator.txt"), std::string::npos);
  }
}

TEST_F(TuFormatTest, UnknownNodeReportsLineNumber) {
  write_file(dir_ / "T_A.txt", "1, 2\n2, 7\n");
  write_file(dir_ / "T_graph_indicator.txt", "1\n1\n");
  try {
    parse_tu_dataset(dir_, "T");
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST_F(TuFormatTest, MalformedLineIsParseError) {
  write_file(dir_ / "T_A.txt", "1; 2\n");
  write_file(dir_ / "T_graph_indicator.txt", "1\n1\n");
  EXPECT_THROW(parse_tu_dataset(dir_, "T"), ParseError);
}

TEST_F(TuFormatTest, RoundTripPreservesStructure) {
  const Dataset original = test::synthetic_dataset("RT", test::Family::communities, 12, 3);
  write_tu_dataset(original, dir_ / "RT");
  const Dataset reread = parse_tu_dataset(dir_ / "RT", "RT");
  ASSERT_EQ(reread.size(), original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(reread.graphs[i].node_count(), original.graphs[i].node_count());
    EXPECT_EQ(reread.graphs[i].edges(), original.graphs[i].edges());
    EXPECT_EQ(reread.graphs[i].node_labels(), original.graphs[i].node_labels());
    EXPECT_EQ(reread.graphs[i].graph_label(), original.graphs[i].graph_label());
  }
}

TEST_F(TuFormatTest, RoundTripKeepsAttributesBitExact) {
  Matrix x(3, 2);
  x << 0.1, -2.5e-17, 3.0 / 7.0, 1e300, -0.0, 42.0;
  Dataset ds{"AT", {Graph(3, {{0, 1}, {1, 2}}, x)}, 2};
  write_tu_dataset(ds, dir_ / "AT");
  const Dataset reread = parse_tu_dataset(dir_ / "AT", "AT");
  EXPECT_EQ(reread.graphs[0].node_features(), x);
}

TEST(FeaturesTest, DegreeSchemeOnPath) {
  Dataset ds{"p", {path_graph(3)}, 1};
  const Dataset out = synthesize_features(ds, OneHotDegree{2});
  Matrix expected(3, 3);
  expected << 0, 1, 0, 0, 0, 1, 0, 1, 0;
  EXPECT_EQ(out.feature_dim, 3);
  EXPECT_EQ(out.graphs[0].node_features(), expected);
}

TEST(FeaturesTest, DegreesAboveCapShareLastBucket) {
  Dataset ds{"k", {complete_graph(5)}, 1};
  const Dataset out = synthesize_features(ds, OneHotDegree{2});
  for (int v = 0; v < 5; ++v) EXPECT_EQ(out.graphs[0].node_features()(v, 2), 1.0);
}

TEST(FeaturesTest, LabelScheme) {
  Dataset ds{"l", {Graph(2, {{0, 1}}, Matrix(2, 0), std::vector<int>{0, 1})}, 0};
  const Dataset out = synthesize_features(ds, OneHotLabel{});
  EXPECT_EQ(out.feature_dim, 2);
  EXPECT_EQ(out.graphs[0].node_features(), Matrix::Identity(2, 2));

  Dataset same{"s", {Graph(3, {{0, 1}}, Matrix(3, 0), std::vector<int>{4, 4, 4})}, 0};
  const Dataset one = synthesize_features(same, OneHotLabel{});
  EXPECT_EQ(one.feature_dim, 1);
  EXPECT_EQ(one.graphs[0].node_features(), Matrix::Ones(3, 1));
}

TEST(FeaturesTest, LabelSchemeWithoutLabelsIsConfigError) {
  Dataset ds{"n", {path_graph(2)}, 1};
  EXPECT_THROW(synthesize_features(ds, OneHotLabel{}), ConfigError);
}

TEST(FeaturesTest, UnseenLabelsBecomeZeroRows) {
  Dataset train{"a", {Graph(2, {{0, 1}}, Matrix(2, 0), std::vector<int>{1, 3})}, 0};
  Dataset other{"b", {Graph(2, {{0, 1}}, Matrix(2, 0), std::vector<int>{3, 9})}, 0};
  const auto alphabet = LabelAlphabet::fit(train);
  const Dataset out = synthesize_features(other, alphabet);
  Matrix expected(2, 2);
  expected << 0, 1, 0, 0;
  EXPECT_EQ(out.graphs[0].node_features(), expected);
}

}  // namespace
}  // namespace sego
