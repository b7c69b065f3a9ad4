#pragma once

// Heterogeneous graph data model. A graph has named node types (each with a
// feature matrix) and named edge types between a source and a destination
// type. Adjacency is stored in both directions at build time: message
// passing treats every relation as undirected, which gives each edge type a
// forward channel (sources seen from each destination) and a reverse channel
// (destinations seen from each source).
//
// A HeteroGraph is immutable after build() and safe to share across threads.
// corrupt/sample_meta_members/sparsify are pure functions of (input, seed).

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/matrix.hpp"
#include "metanode/rng.hpp"

namespace mn {

struct NodeTypeSpec {
  std::string name;
  i64 count = 0;
  i64 feature_dim = 0;
};

struct EdgeTypeSpec {
  std::string name;
  int src_type = -1;
  int dst_type = -1;
};

// Raw description consumed by build_graph. `edges[t]` lists (src, dst) pairs
// of edge type t; duplicates are allowed and kept (the edge set is a multiset).
struct GraphSpec {
  std::vector<NodeTypeSpec> node_types;
  std::vector<Matrix> features;  // one per node type, count x feature_dim
  std::vector<EdgeTypeSpec> edge_types;
  std::vector<std::vector<std::pair<i64, i64>>> edges;  // one list per edge type
};

class HeteroGraph {
 public:
  static HeteroGraph build(GraphSpec spec) {
    HeteroGraph g;
    const int num_types = static_cast<int>(spec.node_types.size());
    if (spec.features.size() != spec.node_types.size())
      throw ConfigError("build_graph: need one feature matrix per node type");
    if (spec.edges.size() != spec.edge_types.size())
      throw ConfigError("build_graph: need one edge list per edge type");
    if (num_types + static_cast<int>(spec.edge_types.size()) <= 2)
      throw ConfigError("build_graph: |node types| + |edge types| must exceed 2");
    for (int j = 0; j < num_types; ++j) {
      const auto& nt = spec.node_types[j];
      if (nt.count <= 0) throw ConfigError("build_graph: node type '" + nt.name + "' has non-positive count");
      if (nt.feature_dim <= 0)
        throw ConfigError("build_graph: node type '" + nt.name + "' has non-positive feature_dim");
      const Matrix& f = spec.features[j];
      if (f.rows != nt.count || f.cols != nt.feature_dim)
        throw ConfigError("build_graph: feature matrix for type '" + nt.name + "' is " + shape_str(f) +
                          ", expected (" + std::to_string(nt.count) + "x" + std::to_string(nt.feature_dim) + ")");
    }
    for (size_t t = 0; t < spec.edge_types.size(); ++t) {
      const auto& et = spec.edge_types[t];
      if (et.src_type < 0 || et.src_type >= num_types || et.dst_type < 0 || et.dst_type >= num_types)
        throw ConfigError("build_graph: edge type '" + et.name + "' references an unknown node type");
      const i64 ns = spec.node_types[static_cast<size_t>(et.src_type)].count;
      const i64 nd = spec.node_types[static_cast<size_t>(et.dst_type)].count;
      for (const auto& [s, d] : spec.edges[t]) {
        if (s < 0 || s >= ns || d < 0 || d >= nd)
          throw ConfigError("build_graph: endpoint out of range in edge type '" + et.name + "': (" +
                            std::to_string(s) + ", " + std::to_string(d) + ")");
      }
    }
    g.node_types_ = std::move(spec.node_types);
    g.features_ = std::move(spec.features);
    g.edge_types_ = std::move(spec.edge_types);
    g.edges_.reserve(spec.edges.size());
    for (size_t t = 0; t < spec.edges.size(); ++t) {
      auto store = std::make_shared<EdgeStore>();
      store->list = std::move(spec.edges[t]);
      const auto& et = g.edge_types_[t];
      build_csr(store->list, g.node_types_[static_cast<size_t>(et.dst_type)].count, store->fwd, /*by_dst=*/true);
      build_csr(store->list, g.node_types_[static_cast<size_t>(et.src_type)].count, store->rev, /*by_dst=*/false);
      g.edges_.push_back(std::move(store));
    }
    return g;
  }

  int num_node_types() const { return static_cast<int>(node_types_.size()); }
  int num_edge_types() const { return static_cast<int>(edge_types_.size()); }

  const NodeTypeSpec& node_type(int j) const { return node_types_.at(static_cast<size_t>(j)); }
  const EdgeTypeSpec& edge_type(int t) const { return edge_types_.at(static_cast<size_t>(t)); }
  const Matrix& features(int j) const { return features_.at(static_cast<size_t>(j)); }
  const std::vector<std::pair<i64, i64>>& edges(int t) const { return edges_.at(static_cast<size_t>(t))->list; }

  i64 total_nodes() const {
    i64 n = 0;
    for (const auto& nt : node_types_) n += nt.count;
    return n;
  }

  int find_node_type(const std::string& name) const {
    for (int j = 0; j < num_node_types(); ++j)
      if (node_types_[static_cast<size_t>(j)].name == name) return j;
    return -1;
  }

  // Sources adjacent to `dst` under edge type t, in stored (input) order.
  std::span<const i64> neighbors(int t, i64 dst) const {
    const auto& st = *edges_.at(static_cast<size_t>(t));
    check_node(edge_type(t).dst_type, dst, "neighbors");
    return csr_row(st.fwd, dst);
  }

  // Destinations adjacent to `src` under edge type t (the reverse channel).
  std::span<const i64> reverse_neighbors(int t, i64 src) const {
    const auto& st = *edges_.at(static_cast<size_t>(t));
    check_node(edge_type(t).src_type, src, "reverse_neighbors");
    return csr_row(st.rev, src);
  }

  // Structure sharing: true when both graphs point at the same edge stores,
  // which is how corrupted views are built.
  bool shares_structure_with(const HeteroGraph& o) const {
    if (edges_.size() != o.edges_.size()) return false;
    for (size_t t = 0; t < edges_.size(); ++t)
      if (edges_[t] != o.edges_[t]) return false;
    return true;
  }

  friend HeteroGraph corrupt(const HeteroGraph& g, u64 seed);
  friend HeteroGraph sparsify(const HeteroGraph& g, double keep_fraction, u64 seed);

 private:
  struct Csr {
    std::vector<i64> offsets;  // size count+1
    std::vector<i64> indices;  // size |edges|
  };
  struct EdgeStore {
    std::vector<std::pair<i64, i64>> list;
    Csr fwd;  // keyed by dst, values are srcs
    Csr rev;  // keyed by src, values are dsts
  };

  static void build_csr(const std::vector<std::pair<i64, i64>>& list, i64 key_count, Csr& out, bool by_dst) {
    out.offsets.assign(static_cast<size_t>(key_count) + 1, 0);
    for (const auto& [s, d] : list) ++out.offsets[static_cast<size_t>((by_dst ? d : s)) + 1];
    for (i64 i = 0; i < key_count; ++i)
      out.offsets[static_cast<size_t>(i) + 1] += out.offsets[static_cast<size_t>(i)];
    out.indices.resize(list.size());
    std::vector<i64> cursor(out.offsets.begin(), out.offsets.end() - 1);
    for (const auto& [s, d] : list) {
      const i64 key = by_dst ? d : s;
      out.indices[static_cast<size_t>(cursor[static_cast<size_t>(key)]++)] = by_dst ? s : d;
    }
  }

  static std::span<const i64> csr_row(const Csr& csr, i64 key) {
    const i64 lo = csr.offsets[static_cast<size_t>(key)];
    const i64 hi = csr.offsets[static_cast<size_t>(key) + 1];
    return {csr.indices.data() + lo, static_cast<size_t>(hi - lo)};
  }

  void check_node(int type, i64 node, const char* what) const {
    if (node < 0 || node >= node_type(type).count)
      throw ConfigError(std::string(what) + ": node index " + std::to_string(node) + " out of range for type '" +
                        node_type(type).name + "'");
  }

  std::vector<NodeTypeSpec> node_types_;
  std::vector<Matrix> features_;
  std::vector<EdgeTypeSpec> edge_types_;
  std::vector<std::shared_ptr<const EdgeStore>> edges_;
};

inline HeteroGraph build_graph(GraphSpec spec) { return HeteroGraph::build(std::move(spec)); }

// Negative-sample view: features of each type row-permuted independently,
// structure shared with the original. Stream per type: (seed, "corrupt.perm", j).
inline HeteroGraph corrupt(const HeteroGraph& g, u64 seed) {
  HeteroGraph out;
  out.node_types_ = g.node_types_;
  out.edge_types_ = g.edge_types_;
  out.edges_ = g.edges_;  // shared
  out.features_.reserve(g.features_.size());
  for (int j = 0; j < g.num_node_types(); ++j) {
    const Matrix& f = g.features(j);
    Rng rng(stream_seed(seed, "corrupt.perm", static_cast<u64>(j)));
    std::vector<i64> perm = rng.permutation(f.rows);
    Matrix pf(f.rows, f.cols);
    for (i64 i = 0; i < f.rows; ++i)
      std::copy(f.row(perm[static_cast<size_t>(i)]), f.row(perm[static_cast<size_t>(i)]) + f.cols, pf.row(i));
    out.features_.push_back(std::move(pf));
  }
  return out;
}

// Per-epoch meta-node membership: the node indices of each type that are
// connected to that type's meta-node.
struct MetaNodeSample {
  int ratio_r = 100;
  std::vector<std::vector<i64>> members;  // sorted, duplicate-free, one list per type

  static MetaNodeSample full(const HeteroGraph& g) {
    MetaNodeSample s;
    s.ratio_r = 100;
    s.members.resize(static_cast<size_t>(g.num_node_types()));
    for (int j = 0; j < g.num_node_types(); ++j) {
      auto& m = s.members[static_cast<size_t>(j)];
      m.resize(static_cast<size_t>(g.node_type(j).count));
      for (i64 i = 0; i < g.node_type(j).count; ++i) m[static_cast<size_t>(i)] = i;
    }
    return s;
  }
};

// Uniform without-replacement sample of round(r/100 * count) nodes per type,
// never fewer than one. Stream per type: (seed, "members", j).
inline MetaNodeSample sample_meta_members(const HeteroGraph& g, int r, u64 seed) {
  if (r < 1 || r > 100) throw ConfigError("sample_meta_members: r must be in [1, 100]");
  MetaNodeSample s;
  s.ratio_r = r;
  s.members.resize(static_cast<size_t>(g.num_node_types()));
  for (int j = 0; j < g.num_node_types(); ++j) {
    const i64 count = g.node_type(j).count;
    if (r == 100) {
      auto& m = s.members[static_cast<size_t>(j)];
      m.resize(static_cast<size_t>(count));
      for (i64 i = 0; i < count; ++i) m[static_cast<size_t>(i)] = i;
      continue;
    }
    i64 k = std::llround(static_cast<double>(r) / 100.0 * static_cast<double>(count));
    k = std::max<i64>(k, 1);
    k = std::min<i64>(k, count);
    Rng rng(stream_seed(seed, "members", static_cast<u64>(j)));
    s.members[static_cast<size_t>(j)] = rng.sample_without_replacement(count, k);
  }
  return s;
}

// Keeps a uniform subset of round(keep_fraction * |edges|) edges per edge
// type; node sets and features untouched. Stream per type: (seed, "edges", t).
inline HeteroGraph sparsify(const HeteroGraph& g, double keep_fraction, u64 seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw ConfigError("sparsify: keep_fraction must be in (0, 1]");
  GraphSpec spec;
  spec.node_types = g.node_types_;
  spec.features = g.features_;
  spec.edge_types = g.edge_types_;
  spec.edges.resize(g.edges_.size());
  for (int t = 0; t < g.num_edge_types(); ++t) {
    const auto& list = g.edges(t);
    const i64 m = static_cast<i64>(list.size());
    const i64 keep = std::min<i64>(m, std::llround(keep_fraction * static_cast<double>(m)));
    if (keep == m) {
      spec.edges[static_cast<size_t>(t)] = list;
      continue;
    }
    Rng rng(stream_seed(seed, "edges", static_cast<u64>(t)));
    std::vector<i64> kept = rng.sample_without_replacement(m, keep);
    auto& out = spec.edges[static_cast<size_t>(t)];
    out.reserve(kept.size());
    for (i64 idx : kept) out.push_back(list[static_cast<size_t>(idx)]);
  }
  return HeteroGraph::build(std::move(spec));
}

}  // namespace mn
