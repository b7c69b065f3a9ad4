#pragma once

// The meta-node message-passing encoder. Each layer combines, per node:
//   - the node's own current representation,
//   - a pooled representation of the sampled meta-node members of its type
//     (identical for every node of that type within a layer, computed from
//     pre-update values),
//   - the sum over edge types of aggregated neighbor messages, where each
//     relation contributes two directed channels sharing one linear map.
// The combination is a single affine layer + tanh over either the
// concatenation or the elementwise sum of the components.
//
// All forward passes are recorded on a Tape so training can differentiate
// through the whole stack; encode_values() is the plain-matrix wrapper.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/graph.hpp"
#include "metanode/matrix.hpp"
#include "metanode/params.hpp"
#include "metanode/rng.hpp"
#include "metanode/tape.hpp"

namespace mn {

enum class ComMode { Sum, Concat };
enum class PoolMode { Sum, Mean, Max };

inline std::string com_mode_name(ComMode m) { return m == ComMode::Sum ? "sum" : "concat"; }
inline std::string pool_mode_name(PoolMode m) {
  switch (m) {
    case PoolMode::Sum: return "sum";
    case PoolMode::Mean: return "mean";
    case PoolMode::Max: return "max";
  }
  return "mean";
}
inline ComMode parse_com_mode(const std::string& s) {
  if (s == "sum") return ComMode::Sum;
  if (s == "concat") return ComMode::Concat;
  throw ConfigError("invalid com mode '" + s + "' (expected sum|concat)");
}
inline PoolMode parse_pool_mode(const std::string& s) {
  if (s == "sum") return PoolMode::Sum;
  if (s == "mean") return PoolMode::Mean;
  if (s == "max") return PoolMode::Max;
  throw ConfigError("invalid pool mode '" + s + "' (expected sum|mean|max)");
}
inline SegMode pool_to_seg(PoolMode m) {
  switch (m) {
    case PoolMode::Sum: return SegMode::Sum;
    case PoolMode::Mean: return SegMode::Mean;
    case PoolMode::Max: return SegMode::Max;
  }
  return SegMode::Mean;
}

struct EncoderConfig {
  i64 dim = 64;
  int num_layers = 2;
  ComMode com = ComMode::Concat;
  PoolMode pool = PoolMode::Mean;
  bool use_meta_node = true;
  bool use_batch_norm = false;
  int r = 70;  // percentage of each type sampled as meta-node members while training

  void validate() const {
    if (dim < 1) throw ConfigError("encoder dim must be >= 1");
    if (num_layers < 1) throw ConfigError("encoder num_layers must be >= 1");
    if (r < 1 || r > 100) throw ConfigError("meta-node member percentage r must be in [1,100]");
  }

  // Width of the combined vector entering the per-layer affine map.
  i64 com_input_dim() const {
    if (com == ComMode::Sum) return dim;
    return use_meta_node ? 3 * dim : 2 * dim;
  }
};

// Registers every learnable tensor in a fixed order (projection per node
// type, then per layer the aggregators and the combination map, then the
// discriminator's bilinear matrix). A single init stream is consumed in
// exactly this order, so a (graph schema, config, seed) triple pins every
// initial value.
inline void init_encoder_params(ParamStore& store, const HeteroGraph& g, const EncoderConfig& cfg, u64 seed) {
  cfg.validate();
  Rng rng(stream_seed(seed, "init"));
  const i64 d = cfg.dim;
  for (int j = 0; j < g.num_node_types(); ++j) {
    const NodeTypeSpec& nt = g.node_type(j);
    store.add("proj.W." + nt.name, Matrix::glorot_uniform(d, nt.feature_dim, rng));
    store.add("proj.b." + nt.name, Matrix(1, d), /*decay=*/false);
    if (cfg.use_batch_norm) {
      store.add("proj.gamma." + nt.name, Matrix::full(1, d, 1.0), /*decay=*/false);
      store.add("proj.beta." + nt.name, Matrix(1, d), /*decay=*/false);
    }
  }
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string ls = std::to_string(l);
    for (int t = 0; t < g.num_edge_types(); ++t) {
      const EdgeTypeSpec& et = g.edge_type(t);
      store.add("agg.W." + ls + "." + et.name, Matrix::glorot_uniform(d, d, rng));
      store.add("agg.b." + ls + "." + et.name, Matrix(1, d), /*decay=*/false);
    }
    store.add("com.W." + ls, Matrix::glorot_uniform(d, cfg.com_input_dim(), rng));
    store.add("com.b." + ls, Matrix(1, d), /*decay=*/false);
  }
  store.add("disc.W", Matrix::glorot_uniform(d, d, rng));
}

// h_i = tanh(W x_i + b), optionally with full-batch normalization between
// the affine map and the activation. Returns one tape node per node type.
inline std::vector<Tape::Id> project_features(Tape& tape, TapeBind& bind, const HeteroGraph& g,
                                              const EncoderConfig& cfg) {
  std::vector<Tape::Id> h;
  h.reserve(static_cast<size_t>(g.num_node_types()));
  for (int j = 0; j < g.num_node_types(); ++j) {
    const NodeTypeSpec& nt = g.node_type(j);
    Tape::Id x = tape.constant(g.features(j));
    Tape::Id w = bind("proj.W." + nt.name);
    Tape::Id a = tape.add_row_broadcast(tape.matmul(x, tape.transpose(w)), bind("proj.b." + nt.name));
    if (cfg.use_batch_norm)
      a = tape.batch_norm(a, bind("proj.gamma." + nt.name), bind("proj.beta." + nt.name));
    h.push_back(tape.tanh(a));
  }
  return h;
}

// One directed aggregation channel of one edge type: mean of the source-side
// neighbor representations per destination node, then the edge type's linear
// map. Destinations without neighbors receive an exact zero row (the linear
// map, bias included, is applied only to populated destinations).
inline Tape::Id aggregate_neighbors(Tape& tape, const HeteroGraph& g, int edge_type, bool forward,
                                    Tape::Id h_src, Tape::Id w, Tape::Id b, i64 dst_count, i64 dim) {
  std::vector<i64> populated, gather;
  auto groups = std::make_shared<std::vector<std::vector<i64>>>();
  for (i64 dst = 0; dst < dst_count; ++dst) {
    const auto nbrs = forward ? g.neighbors(edge_type, dst) : g.reverse_neighbors(edge_type, dst);
    if (nbrs.empty()) continue;
    std::vector<i64> grp;
    grp.reserve(nbrs.size());
    for (i64 u : nbrs) {
      grp.push_back(static_cast<i64>(gather.size()));
      gather.push_back(u);
    }
    groups->push_back(std::move(grp));
    populated.push_back(dst);
  }
  if (populated.empty()) return tape.constant(Matrix(dst_count, dim));
  Tape::Id means = tape.segment_reduce(tape.row_gather(h_src, std::move(gather)), groups, SegMode::Mean);
  Tape::Id lin = tape.add_row_broadcast(tape.matmul(means, tape.transpose(w)), b);
  if (static_cast<i64>(populated.size()) == dst_count) return lin;
  return tape.row_scatter(lin, std::move(populated), dst_count);
}

// Pooled representation of the sampled members of type j: a single 1 x d row.
inline Tape::Id meta_node_repr(Tape& tape, Tape::Id h_type, const MetaNodeSample& sample, int j,
                               PoolMode pool) {
  if (static_cast<size_t>(j) >= sample.members.size() || sample.members[static_cast<size_t>(j)].empty())
    throw ConfigError("meta_node_repr: empty member set for type " + std::to_string(j));
  auto groups = std::make_shared<std::vector<std::vector<i64>>>(
      std::vector<std::vector<i64>>{sample.members[static_cast<size_t>(j)]});
  return tape.segment_reduce(h_type, std::move(groups), pool_to_seg(pool));
}

// One full message-passing layer: all types updated simultaneously from the
// incoming representations.
inline std::vector<Tape::Id> mn_mpl_layer(Tape& tape, TapeBind& bind, const HeteroGraph& g,
                                          const MetaNodeSample& sample, const EncoderConfig& cfg,
                                          int layer, const std::vector<Tape::Id>& h) {
  const i64 d = cfg.dim;
  const std::string ls = std::to_string(layer);
  std::vector<Tape::Id> out;
  out.reserve(h.size());
  for (int j = 0; j < g.num_node_types(); ++j) {
    const i64 count = g.node_type(j).count;

    std::optional<Tape::Id> nbr;
    for (int t = 0; t < g.num_edge_types(); ++t) {
      const EdgeTypeSpec& et = g.edge_type(t);
      Tape::Id w = bind("agg.W." + ls + "." + et.name);
      Tape::Id b = bind("agg.b." + ls + "." + et.name);
      if (et.dst_type == j) {
        Tape::Id c = aggregate_neighbors(tape, g, t, /*forward=*/true, h[static_cast<size_t>(et.src_type)], w, b, count, d);
        nbr = nbr ? tape.add(*nbr, c) : c;
      }
      if (et.src_type == j) {
        Tape::Id c = aggregate_neighbors(tape, g, t, /*forward=*/false, h[static_cast<size_t>(et.dst_type)], w, b, count, d);
        nbr = nbr ? tape.add(*nbr, c) : c;
      }
    }
    if (!nbr) nbr = tape.constant(Matrix(count, d));

    Tape::Id z;
    if (cfg.use_meta_node) {
      Tape::Id meta = meta_node_repr(tape, h[static_cast<size_t>(j)], sample, j, cfg.pool);
      Tape::Id meta_rows = tape.row_gather(meta, std::vector<i64>(static_cast<size_t>(count), 0));
      z = (cfg.com == ComMode::Concat)
              ? tape.concat_cols({h[static_cast<size_t>(j)], meta_rows, *nbr})
              : tape.add(tape.add(h[static_cast<size_t>(j)], meta_rows), *nbr);
    } else {
      z = (cfg.com == ComMode::Concat) ? tape.concat_cols({h[static_cast<size_t>(j)], *nbr})
                                       : tape.add(h[static_cast<size_t>(j)], *nbr);
    }
    Tape::Id affine = tape.add_row_broadcast(tape.matmul(z, tape.transpose(bind("com.W." + ls))), bind("com.b." + ls));
    out.push_back(tape.tanh(affine));
  }
  return out;
}

// Projection followed by num_layers message-passing layers.
inline std::vector<Tape::Id> encode(Tape& tape, TapeBind& bind, const HeteroGraph& g,
                                    const MetaNodeSample& sample, const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<Tape::Id> h = project_features(tape, bind, g, cfg);
  for (int l = 0; l < cfg.num_layers; ++l) h = mn_mpl_layer(tape, bind, g, sample, cfg, l, h);
  return h;
}

// Convenience wrapper: run the encoder on a throwaway tape and return plain
// per-type matrices.
inline std::vector<Matrix> encode_values(const HeteroGraph& g, ParamStore& store,
                                         const EncoderConfig& cfg, const MetaNodeSample& sample) {
  Tape tape;
  TapeBind bind(store, tape);
  std::vector<Tape::Id> h = encode(tape, bind, g, sample, cfg);
  std::vector<Matrix> out;
  out.reserve(h.size());
  for (Tape::Id id : h) out.push_back(tape.value(id));
  return out;
}

}  // namespace mn
