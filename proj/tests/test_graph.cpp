#include "metanode/graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

using mn::GraphSpec;
using mn::HeteroGraph;
using mn::Matrix;
using mn::MetaNodeSample;
using mn::i64;

namespace {

// Two types, one relation, features engineered so a row's identity can be
// read back from its values (used to recover corruption permutations).
HeteroGraph tiny_bipartite() {
  GraphSpec spec;
  spec.node_types = {{"u", 4, 2}, {"v", 3, 2}};
  Matrix fu(4, 2), fv(3, 2);
  for (i64 i = 0; i < 4; ++i) {
    fu(i, 0) = 10 + i;
    fu(i, 1) = 20 + i;
  }
  for (i64 i = 0; i < 3; ++i) {
    fv(i, 0) = 30 + i;
    fv(i, 1) = 40 + i;
  }
  spec.features = {fu, fv};
  spec.edge_types = {{"uv", 0, 1}};
  spec.edges = {{{0, 1}, {1, 0}, {2, 2}, {3, 1}, {0, 0}}};
  return mn::build_graph(std::move(spec));
}

}  // namespace

TEST(GraphBuild, ValidGraphExposesSchema) {
  HeteroGraph g = tiny_bipartite();
  EXPECT_EQ(g.num_node_types(), 2);
  EXPECT_EQ(g.num_edge_types(), 1);
  EXPECT_EQ(g.node_type(0).name, "u");
  EXPECT_EQ(g.node_type(1).count, 3);
  EXPECT_EQ(g.edge_type(0).src_type, 0);
  EXPECT_EQ(g.total_nodes(), 7);
  EXPECT_EQ(g.find_node_type("v"), 1);
  EXPECT_EQ(g.find_node_type("w"), -1);
  EXPECT_EQ(g.edges(0).size(), 5u);
}

TEST(GraphBuild, RejectsTooFewComponents) {
  // A lone node type with a single relation is the minimum; below that the
  // model has nothing heterogeneous to work with.
  GraphSpec spec;
  spec.node_types = {{"a", 3, 2}};
  spec.features = {Matrix(3, 2)};
  EXPECT_THROW(mn::build_graph(spec), mn::ConfigError);

  spec.edge_types = {{"aa", 0, 0}};
  spec.edges = {{{0, 1}}};
  EXPECT_THROW(mn::build_graph(spec), mn::ConfigError);  // 1 + 1 = 2, still too few

  spec.edge_types.push_back({"aa2", 0, 0});
  spec.edges.push_back({{1, 2}});
  EXPECT_NO_THROW(mn::build_graph(spec));  // 1 + 2 > 2
}

TEST(GraphBuild, RejectsMalformedSpecs) {
  GraphSpec base;
  base.node_types = {{"u", 2, 1}, {"v", 2, 1}};
  base.features = {Matrix(2, 1), Matrix(2, 1)};
  base.edge_types = {{"uv", 0, 1}};
  base.edges = {{{0, 0}}};

  {
    GraphSpec s = base;
    s.features[0] = Matrix(3, 1);  // row count disagrees with node count
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
  {
    GraphSpec s = base;
    s.edges[0].emplace_back(0, 5);  // dangling destination
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
  {
    GraphSpec s = base;
    s.edges[0].emplace_back(-1, 0);
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
  {
    GraphSpec s = base;
    s.edge_types[0].dst_type = 7;  // unknown node type
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
  {
    GraphSpec s = base;
    s.node_types[0].count = 0;
    s.features[0] = Matrix(0, 1);
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
  {
    GraphSpec s = base;
    s.edges.clear();  // one edge list per edge type is mandatory
    EXPECT_THROW(mn::build_graph(s), mn::ConfigError);
  }
}

TEST(GraphAdjacency, NeighborsKeepInputOrder) {
  HeteroGraph g = tiny_bipartite();
  // edges: (0,1) (1,0) (2,2) (3,1) (0,0)
  auto n1 = g.neighbors(0, 1);  // sources of v-node 1, in input order
  ASSERT_EQ(n1.size(), 2u);
  EXPECT_EQ(n1[0], 0);
  EXPECT_EQ(n1[1], 3);
  auto n0 = g.neighbors(0, 0);
  ASSERT_EQ(n0.size(), 2u);
  EXPECT_EQ(n0[0], 1);
  EXPECT_EQ(n0[1], 0);
  auto r0 = g.reverse_neighbors(0, 0);  // destinations of u-node 0
  ASSERT_EQ(r0.size(), 2u);
  EXPECT_EQ(r0[0], 1);
  EXPECT_EQ(r0[1], 0);
  EXPECT_TRUE(g.reverse_neighbors(0, 2).size() == 1 && g.reverse_neighbors(0, 2)[0] == 2);
}

TEST(GraphAdjacency, DegreeSumsMatchEdgeCount) {
  HeteroGraph g = tiny_bipartite();
  size_t fwd = 0, rev = 0;
  for (i64 d = 0; d < g.node_type(1).count; ++d) fwd += g.neighbors(0, d).size();
  for (i64 s = 0; s < g.node_type(0).count; ++s) rev += g.reverse_neighbors(0, s).size();
  EXPECT_EQ(fwd, g.edges(0).size());
  EXPECT_EQ(rev, g.edges(0).size());
}

TEST(GraphAdjacency, DuplicateEdgesAreKept) {
  GraphSpec spec;
  spec.node_types = {{"a", 2, 1}, {"b", 2, 1}};
  spec.features = {Matrix(2, 1), Matrix(2, 1)};
  spec.edge_types = {{"ab", 0, 1}};
  spec.edges = {{{0, 0}, {0, 0}, {1, 0}}};
  HeteroGraph g = mn::build_graph(std::move(spec));
  auto n = g.neighbors(0, 0);
  ASSERT_EQ(n.size(), 3u);  // the repeated edge counts twice in the mean later
  EXPECT_EQ(n[0], 0);
  EXPECT_EQ(n[1], 0);
  EXPECT_EQ(n[2], 1);
}

TEST(GraphAdjacency, OutOfRangeQueriesThrow) {
  HeteroGraph g = tiny_bipartite();
  EXPECT_THROW(g.neighbors(0, 3), mn::ConfigError);       // v has 3 nodes
  EXPECT_THROW(g.reverse_neighbors(0, 4), mn::ConfigError);
  EXPECT_THROW(g.neighbors(0, -1), mn::ConfigError);
}

TEST(Corruption, PreservesRowMultisetPerType) {
  HeteroGraph g = tiny_bipartite();
  HeteroGraph c = mn::corrupt(g, 99);
  for (int j = 0; j < g.num_node_types(); ++j) {
    std::multiset<std::vector<double>> before, after;
    const Matrix& f = g.features(j);
    const Matrix& p = c.features(j);
    for (i64 i = 0; i < f.rows; ++i) {
      before.insert(std::vector<double>(f.row(i), f.row(i) + f.cols));
      after.insert(std::vector<double>(p.row(i), p.row(i) + p.cols));
    }
    EXPECT_EQ(before, after);
  }
}

TEST(Corruption, SharesStructureWithOriginal) {
  HeteroGraph g = tiny_bipartite();
  HeteroGraph c = mn::corrupt(g, 5);
  EXPECT_TRUE(c.shares_structure_with(g));
  EXPECT_TRUE(g.shares_structure_with(c));
  // An independently built copy does not share stores even if equal.
  HeteroGraph other = tiny_bipartite();
  EXPECT_FALSE(g.shares_structure_with(other));
  // Adjacency content is unchanged, not just shared.
  auto n = c.neighbors(0, 1);
  ASSERT_EQ(n.size(), 2u);
  EXPECT_EQ(n[0], 0);
  EXPECT_EQ(n[1], 3);
}

TEST(Corruption, SameSeedSamePermutationDifferentSeedUsuallyNot) {
  HeteroGraph g = tiny_bipartite();
  HeteroGraph a = mn::corrupt(g, 7);
  HeteroGraph b = mn::corrupt(g, 7);
  for (int j = 0; j < 2; ++j) EXPECT_EQ(a.features(j).data, b.features(j).data);
  // Across 20 seeds the u-type permutation (4! = 24 options) must vary.
  std::set<std::vector<double>> distinct;
  for (mn::u64 s = 0; s < 20; ++s) distinct.insert(mn::corrupt(g, s).features(0).data);
  EXPECT_GT(distinct.size(), 5u);
}

TEST(Corruption, TypesArePermutedIndependently) {
  // With feature columns encoding identity, recover each type's permutation
  // and check they are not forced equal.
  HeteroGraph g = tiny_bipartite();
  HeteroGraph c = mn::corrupt(g, 42);
  std::vector<int> perm_u, perm_v;
  for (i64 i = 0; i < 4; ++i) perm_u.push_back(static_cast<int>(c.features(0)(i, 0) - 10));
  for (i64 i = 0; i < 3; ++i) perm_v.push_back(static_cast<int>(c.features(1)(i, 0) - 30));
  EXPECT_EQ(perm_u, (std::vector<int>{3, 1, 0, 2}));  // frozen: seed 42
  EXPECT_EQ(perm_v, (std::vector<int>{2, 0, 1}));
}

TEST(MetaMembers, FullSelectsEveryNode) {
  HeteroGraph g = tiny_bipartite();
  MetaNodeSample s = MetaNodeSample::full(g);
  EXPECT_EQ(s.ratio_r, 100);
  ASSERT_EQ(s.members.size(), 2u);
  EXPECT_EQ(s.members[0], (std::vector<i64>{0, 1, 2, 3}));
  EXPECT_EQ(s.members[1], (std::vector<i64>{0, 1, 2}));
}

TEST(MetaMembers, SampleSizeIsRoundedShare) {
  GraphSpec spec;
  spec.node_types = {{"a", 10, 1}};
  spec.features = {Matrix(10, 1)};
  spec.edge_types = {{"aa", 0, 0}, {"a2", 0, 0}};
  spec.edges = {{{0, 1}}, {{1, 2}}};
  HeteroGraph g = mn::build_graph(std::move(spec));

  EXPECT_EQ(mn::sample_meta_members(g, 40, 7).members[0].size(), 4u);
  EXPECT_EQ(mn::sample_meta_members(g, 45, 7).members[0].size(), 5u);  // llround(4.5) = 5 (away from zero)
  EXPECT_EQ(mn::sample_meta_members(g, 100, 7).members[0].size(), 10u);
  EXPECT_EQ(mn::sample_meta_members(g, 1, 7).members[0].size(), 1u);  // clamped up from llround(0.1)
  EXPECT_THROW(mn::sample_meta_members(g, 0, 7), mn::ConfigError);
  EXPECT_THROW(mn::sample_meta_members(g, 101, 7), mn::ConfigError);

  MetaNodeSample s = mn::sample_meta_members(g, 40, 7);
  EXPECT_EQ(s.members[0], (std::vector<i64>{0, 1, 2, 8}));  // frozen: seed 7
  EXPECT_TRUE(std::is_sorted(s.members[0].begin(), s.members[0].end()));
  EXPECT_EQ(mn::sample_meta_members(g, 40, 7).members[0], s.members[0]);  // deterministic
}

TEST(Sparsify, KeepsRoundedShareOfEachEdgeType) {
  GraphSpec spec;
  spec.node_types = {{"a", 5, 1}, {"b", 5, 1}};
  spec.features = {Matrix(5, 1), Matrix(5, 1)};
  spec.edge_types = {{"ab", 0, 1}};
  std::vector<std::pair<i64, i64>> e;
  for (i64 i = 0; i < 10; ++i) e.emplace_back(i % 5, (i * 3 + i / 5) % 5);
  spec.edges = {e};
  HeteroGraph g = mn::build_graph(std::move(spec));

  HeteroGraph half = mn::sparsify(g, 0.5, 3);
  EXPECT_EQ(half.edges(0).size(), 5u);
  // Every kept edge is one of the originals, in original relative order.
  EXPECT_EQ(half.edges(0), (std::vector<std::pair<i64, i64>>{{1, 3}, {2, 1}, {0, 1}, {3, 0}, {4, 3}}));  // frozen: seed 3
  // Nodes and features are untouched.
  EXPECT_EQ(half.node_type(0).count, 5);
  EXPECT_EQ(half.features(0).data, g.features(0).data);

  EXPECT_EQ(mn::sparsify(g, 0.25, 3).edges(0).size(), 3u);  // llround(2.5) rounds away from zero
  EXPECT_EQ(mn::sparsify(g, 1.0, 3).edges(0), g.edges(0));  // verbatim copy
  EXPECT_THROW(mn::sparsify(g, 0.0, 3), mn::ConfigError);
  EXPECT_THROW(mn::sparsify(g, 1.5, 3), mn::ConfigError);
  EXPECT_THROW(mn::sparsify(g, -0.5, 3), mn::ConfigError);
}

TEST(Sparsify, SampleIsDeterministicPerSeed) {
  GraphSpec spec;
  spec.node_types = {{"a", 20, 1}, {"b", 20, 1}};
  spec.features = {Matrix(20, 1), Matrix(20, 1)};
  spec.edge_types = {{"ab", 0, 1}};
  std::vector<std::pair<i64, i64>> e;
  for (i64 i = 0; i < 20; ++i)
    for (i64 j = 0; j < 20; ++j)
      if ((i + j) % 3 == 0) e.emplace_back(i, j);
  spec.edges = {std::move(e)};
  HeteroGraph g = mn::build_graph(std::move(spec));
  EXPECT_EQ(mn::sparsify(g, 0.3, 11).edges(0), mn::sparsify(g, 0.3, 11).edges(0));
  EXPECT_NE(mn::sparsify(g, 0.3, 11).edges(0), mn::sparsify(g, 0.3, 12).edges(0));
}
