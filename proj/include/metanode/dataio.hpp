#pragma once

// On-disk artifacts: the graph directory layout, embedding files (TSV and
// binary), checkpoints, and the seeded synthetic graph generator used by
// the examples and the end-to-end tests.
//
// Graph directory layout:
//   schema.json                 node_types: [{name, count, feature_dim}],
//                               edge_types: [{name, src, dst}]
//   features_<type>.tsv|.bin    count x feature_dim reals
//   edges_<name>.tsv            one "src<TAB>dst" pair per line
//   labels_<type>.tsv           optional "node_id<TAB>class" lines
//
// Binary matrix format (embeddings and .bin features): magic "MNEM",
// version u32, rows u64, cols u64, then row-major little-endian f64.
// Checkpoint format: magic "MNCK", version u32, length-prefixed JSON config
// echo, then named tensors in parameter registration order.
// All multi-byte fields are little-endian. Text reals carry 17 significant
// digits so TSV round trips reproduce the exact double.

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "metanode/common.hpp"
#include "metanode/contrastive.hpp"
#include "metanode/encoder.hpp"
#include "metanode/graph.hpp"
#include "metanode/matrix.hpp"
#include "metanode/params.hpp"
#include "metanode/rng.hpp"

namespace mn {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] inline void file_error(const std::string& file, i64 line, const std::string& what) {
  throw ArtifactError(file + ":" + std::to_string(line) + ": " + what);
}

inline double parse_real(const std::string& file, i64 line, std::string_view field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    file_error(file, line, "expected a real number, got '" + std::string(field) + "'");
  return v;
}

inline i64 parse_int(const std::string& file, i64 line, std::string_view field) {
  i64 v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    file_error(file, line, "expected an integer, got '" + std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  size_t at = 0;
  while (true) {
    const size_t tab = line.find('\t', at);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(at));
      return out;
    }
    out.push_back(line.substr(at, tab - at));
    at = tab + 1;
  }
}

// Reads a text file into lines, stripping a trailing '\r' per line.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, b, 4);
}
inline void write_u64(std::ostream& out, u64 v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, b, 8);
}
inline void write_f64(std::ostream& out, double v) {
  u64 bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}
inline void read_bytes(std::istream& in, void* p, size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) throw ArtifactError(path + ": truncated file");
}
inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  read_bytes(in, b, 4, path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline u64 read_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  read_bytes(in, b, 8, path);
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<u64>(b[i]) << (8 * i);
  return v;
}
inline double read_f64(std::istream& in, const std::string& path) {
  const u64 bits = read_u64(in, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense matrix files ("MNEM")

inline constexpr std::uint32_t kMatrixFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline void save_matrix_bin(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path);
  detail::write_bytes(out, "MNEM", 4);
  detail::write_u32(out, kMatrixFormatVersion);
  detail::write_u64(out, static_cast<u64>(m.rows));
  detail::write_u64(out, static_cast<u64>(m.cols));
  for (double v : m.data) detail::write_f64(out, v);
  if (!out) throw ArtifactError("write failed for " + path);
}

inline Matrix load_matrix_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path);
  char magic[4];
  detail::read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, "MNEM", 4) != 0) throw ArtifactError(path + ": not a matrix file (bad magic)");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != kMatrixFormatVersion)
    throw ArtifactError(path + ": unsupported matrix format version " + std::to_string(version));
  const u64 rows = detail::read_u64(in, path);
  const u64 cols = detail::read_u64(in, path);
  if (rows > (1u << 30) || cols > (1u << 30)) throw ArtifactError(path + ": implausible dimensions");
  Matrix m(static_cast<i64>(rows), static_cast<i64>(cols));
  for (double& v : m.data) v = detail::read_f64(in, path);
  return m;
}

// Embedding TSV: node id, then the row's values at 17 significant digits.
inline void save_embeddings_tsv(const std::string& path, const std::vector<i64>& node_ids, const Matrix& h) {
  if (static_cast<i64>(node_ids.size()) != h.rows) throw ConfigError("save_embeddings: id/row count mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path);
  for (i64 i = 0; i < h.rows; ++i) {
    out << node_ids[static_cast<size_t>(i)];
    for (i64 j = 0; j < h.cols; ++j) out << '\t' << detail::fmt17(h(i, j));
    out << '\n';
  }
  if (!out) throw ArtifactError("write failed for " + path);
}

inline std::pair<std::vector<i64>, Matrix> load_embeddings_tsv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  std::vector<i64> ids;
  std::vector<std::vector<double>> rows;
  size_t width = 0;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty() && ln + 1 == lines.size()) break;
    const auto fields = detail::split_tabs(lines[ln]);
    if (fields.size() < 2) detail::file_error(path, static_cast<i64>(ln + 1), "expected node id plus values");
    if (width == 0) width = fields.size();
    if (fields.size() != width) detail::file_error(path, static_cast<i64>(ln + 1), "ragged row");
    ids.push_back(detail::parse_int(path, static_cast<i64>(ln + 1), fields[0]));
    std::vector<double> row;
    for (size_t f = 1; f < fields.size(); ++f)
      row.push_back(detail::parse_real(path, static_cast<i64>(ln + 1), fields[f]));
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<i64>(rows.size()), static_cast<i64>(width == 0 ? 0 : width - 1));
  for (i64 i = 0; i < m.rows; ++i)
    std::copy(rows[static_cast<size_t>(i)].begin(), rows[static_cast<size_t>(i)].end(), m.row(i));
  return {std::move(ids), std::move(m)};
}

// Extension-driven dispatch used by the command-line tool: ".bin" selects
// the binary format, anything else the TSV.
inline void save_embeddings(const std::string& path, const std::vector<i64>& node_ids, const Matrix& h) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
    if (static_cast<i64>(node_ids.size()) != h.rows) throw ConfigError("save_embeddings: id/row count mismatch");
    save_matrix_bin(path, h);
  } else {
    save_embeddings_tsv(path, node_ids, h);
  }
}

// ---------------------------------------------------------------------------
// Graph directories

struct LoadedGraph {
  HeteroGraph graph;
  // labels[type] is empty when the type has no labels file; otherwise one
  // class id per node with -1 for unlabeled nodes.
  std::vector<std::vector<int>> labels;

  // First labeled type, or 0 when nothing is labeled.
  int default_target_type() const {
    for (size_t j = 0; j < labels.size(); ++j)
      if (!labels[j].empty()) return static_cast<int>(j);
    return 0;
  }
};

inline GraphSpec to_spec(const HeteroGraph& g) {
  GraphSpec spec;
  for (int j = 0; j < g.num_node_types(); ++j) {
    spec.node_types.push_back(g.node_type(j));
    spec.features.push_back(g.features(j));
  }
  for (int t = 0; t < g.num_edge_types(); ++t) {
    spec.edge_types.push_back(g.edge_type(t));
    spec.edges.push_back(g.edges(t));
  }
  return spec;
}

inline void save_graph(const std::string& dir, const GraphSpec& spec,
                       const std::vector<std::vector<int>>& labels = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::ordered_json schema;
  schema["node_types"] = nlohmann::ordered_json::array();
  for (const NodeTypeSpec& nt : spec.node_types)
    schema["node_types"].push_back({{"name", nt.name}, {"count", nt.count}, {"feature_dim", nt.feature_dim}});
  schema["edge_types"] = nlohmann::ordered_json::array();
  for (const EdgeTypeSpec& et : spec.edge_types)
    schema["edge_types"].push_back({{"name", et.name},
                                    {"src", spec.node_types[static_cast<size_t>(et.src_type)].name},
                                    {"dst", spec.node_types[static_cast<size_t>(et.dst_type)].name}});
  {
    std::ofstream out(dir + "/schema.json", std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + dir + "/schema.json");
    out << schema.dump(2) << '\n';
  }

  for (size_t j = 0; j < spec.node_types.size(); ++j) {
    const std::string path = dir + "/features_" + spec.node_types[j].name + ".tsv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + path);
    const Matrix& f = spec.features[j];
    for (i64 i = 0; i < f.rows; ++i) {
      for (i64 c = 0; c < f.cols; ++c) {
        if (c) out << '\t';
        out << detail::fmt17(f(i, c));
      }
      out << '\n';
    }
    if (!out) throw ArtifactError("write failed for " + path);
  }

  for (size_t t = 0; t < spec.edge_types.size(); ++t) {
    const std::string path = dir + "/edges_" + spec.edge_types[t].name + ".tsv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + path);
    for (const auto& [src, dst] : spec.edges[t]) out << src << '\t' << dst << '\n';
    if (!out) throw ArtifactError("write failed for " + path);
  }

  for (size_t j = 0; j < labels.size() && j < spec.node_types.size(); ++j) {
    if (labels[j].empty()) continue;
    const std::string path = dir + "/labels_" + spec.node_types[j].name + ".tsv";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArtifactError("cannot write " + path);
    for (size_t i = 0; i < labels[j].size(); ++i)
      if (labels[j][i] >= 0) out << i << '\t' << labels[j][i] << '\n';
    if (!out) throw ArtifactError("write failed for " + path);
  }
}

inline LoadedGraph load_graph(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string schema_path = dir + "/schema.json";
  std::ifstream schema_in(schema_path);
  if (!schema_in) throw ArtifactError("cannot open " + schema_path);
  nlohmann::json schema;
  try {
    schema = nlohmann::json::parse(schema_in);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(schema_path + ": " + e.what());
  }
  for (const auto& [key, _] : schema.items())
    if (key != "node_types" && key != "edge_types")
      throw ArtifactError(schema_path + ": unknown key '" + key + "'");
  if (!schema.contains("node_types") || !schema.contains("edge_types"))
    throw ArtifactError(schema_path + ": node_types and edge_types are required");

  GraphSpec spec;
  std::map<std::string, int> type_index;
  for (const auto& entry : schema["node_types"]) {
    for (const auto& [key, _] : entry.items())
      if (key != "name" && key != "count" && key != "feature_dim")
        throw ArtifactError(schema_path + ": unknown node type key '" + key + "'");
    NodeTypeSpec nt;
    nt.name = entry.at("name").get<std::string>();
    nt.count = entry.at("count").get<i64>();
    nt.feature_dim = entry.at("feature_dim").get<i64>();
    if (type_index.count(nt.name)) throw ArtifactError(schema_path + ": duplicate node type '" + nt.name + "'");
    type_index[nt.name] = static_cast<int>(spec.node_types.size());
    spec.node_types.push_back(nt);
  }

  auto resolve_type = [&](const nlohmann::json& v) -> int {
    if (v.is_number_integer()) {
      const int idx = v.get<int>();
      if (idx < 0 || idx >= static_cast<int>(spec.node_types.size()))
        throw ArtifactError(schema_path + ": node type index " + std::to_string(idx) + " out of range");
      return idx;
    }
    const std::string name = v.get<std::string>();
    const auto it = type_index.find(name);
    if (it == type_index.end()) throw ArtifactError(schema_path + ": unknown node type '" + name + "'");
    return it->second;
  };
  for (const auto& entry : schema["edge_types"]) {
    for (const auto& [key, _] : entry.items())
      if (key != "name" && key != "src" && key != "dst")
        throw ArtifactError(schema_path + ": unknown edge type key '" + key + "'");
    EdgeTypeSpec et;
    et.name = entry.at("name").get<std::string>();
    et.src_type = resolve_type(entry.at("src"));
    et.dst_type = resolve_type(entry.at("dst"));
    spec.edge_types.push_back(et);
  }

  for (const NodeTypeSpec& nt : spec.node_types) {
    const std::string bin_path = dir + "/features_" + nt.name + ".bin";
    const std::string tsv_path = dir + "/features_" + nt.name + ".tsv";
    Matrix f;
    if (fs::exists(bin_path)) {
      f = load_matrix_bin(bin_path);
      if (f.rows != nt.count || f.cols != nt.feature_dim)
        throw ArtifactError(bin_path + ": shape " + shape_str(f) + " does not match schema (" +
                            std::to_string(nt.count) + "x" + std::to_string(nt.feature_dim) + ")");
    } else {
      const auto lines = detail::read_lines(tsv_path);
      i64 rows = 0;
      f = Matrix(nt.count, nt.feature_dim);
      for (size_t ln = 0; ln < lines.size(); ++ln) {
        if (lines[ln].empty() && ln + 1 == lines.size()) break;
        if (rows >= nt.count)
          detail::file_error(tsv_path, static_cast<i64>(ln + 1),
                             "more rows than the declared count " + std::to_string(nt.count));
        const auto fields = detail::split_tabs(lines[ln]);
        if (static_cast<i64>(fields.size()) != nt.feature_dim)
          detail::file_error(tsv_path, static_cast<i64>(ln + 1),
                             "expected " + std::to_string(nt.feature_dim) + " columns, got " + std::to_string(fields.size()));
        for (i64 c = 0; c < nt.feature_dim; ++c)
          f(rows, c) = detail::parse_real(tsv_path, static_cast<i64>(ln + 1), fields[static_cast<size_t>(c)]);
        ++rows;
      }
      if (rows != nt.count)
        detail::file_error(tsv_path, static_cast<i64>(lines.size()),
                           "declared count " + std::to_string(nt.count) + " but found " + std::to_string(rows) + " rows");
    }
    spec.features.push_back(std::move(f));
  }

  for (const EdgeTypeSpec& et : spec.edge_types) {
    const std::string path = dir + "/edges_" + et.name + ".tsv";
    const auto lines = detail::read_lines(path);
    std::vector<std::pair<i64, i64>> edges;
    const i64 src_count = spec.node_types[static_cast<size_t>(et.src_type)].count;
    const i64 dst_count = spec.node_types[static_cast<size_t>(et.dst_type)].count;
    for (size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty() && ln + 1 == lines.size()) break;
      const auto fields = detail::split_tabs(lines[ln]);
      if (fields.size() != 2) detail::file_error(path, static_cast<i64>(ln + 1), "expected 'src<TAB>dst'");
      const i64 s = detail::parse_int(path, static_cast<i64>(ln + 1), fields[0]);
      const i64 d = detail::parse_int(path, static_cast<i64>(ln + 1), fields[1]);
      if (s < 0 || s >= src_count)
        detail::file_error(path, static_cast<i64>(ln + 1),
                           "source " + std::to_string(s) + " out of range [0," + std::to_string(src_count) + ")");
      if (d < 0 || d >= dst_count)
        detail::file_error(path, static_cast<i64>(ln + 1),
                           "destination " + std::to_string(d) + " out of range [0," + std::to_string(dst_count) + ")");
      edges.emplace_back(s, d);
    }
    spec.edges.push_back(std::move(edges));
  }

  LoadedGraph out{build_graph(std::move(spec)), {}};
  out.labels.resize(static_cast<size_t>(out.graph.num_node_types()));
  for (int j = 0; j < out.graph.num_node_types(); ++j) {
    const NodeTypeSpec& nt = out.graph.node_type(j);
    const std::string path = dir + "/labels_" + nt.name + ".tsv";
    if (!fs::exists(path)) continue;
    std::vector<int>& lab = out.labels[static_cast<size_t>(j)];
    lab.assign(static_cast<size_t>(nt.count), -1);
    int max_class = -1;
    const auto lines = detail::read_lines(path);
    for (size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty() && ln + 1 == lines.size()) break;
      const auto fields = detail::split_tabs(lines[ln]);
      if (fields.size() != 2) detail::file_error(path, static_cast<i64>(ln + 1), "expected 'node_id<TAB>class'");
      const i64 id = detail::parse_int(path, static_cast<i64>(ln + 1), fields[0]);
      const i64 cls = detail::parse_int(path, static_cast<i64>(ln + 1), fields[1]);
      if (id < 0 || id >= nt.count)
        detail::file_error(path, static_cast<i64>(ln + 1), "node id " + std::to_string(id) + " out of range");
      if (cls < 0) detail::file_error(path, static_cast<i64>(ln + 1), "negative class id");
      if (lab[static_cast<size_t>(id)] != -1) detail::file_error(path, static_cast<i64>(ln + 1), "duplicate node id");
      lab[static_cast<size_t>(id)] = static_cast<int>(cls);
      max_class = std::max(max_class, static_cast<int>(cls));
    }
    std::vector<bool> seen(static_cast<size_t>(max_class + 1), false);
    for (int c : lab)
      if (c >= 0) seen[static_cast<size_t>(c)] = true;
    for (int c = 0; c <= max_class; ++c)
      if (!seen[static_cast<size_t>(c)])
        throw ArtifactError(path + ": class ids not contiguous (class " + std::to_string(c) + " missing)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints ("MNCK")

inline nlohmann::ordered_json train_config_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["target_type"] = cfg.target_type;
  j["dim"] = cfg.encoder.dim;
  j["num_layers"] = cfg.encoder.num_layers;
  j["com"] = com_mode_name(cfg.encoder.com);
  j["pool"] = pool_mode_name(cfg.encoder.pool);
  j["use_meta_node"] = cfg.encoder.use_meta_node;
  j["use_batch_norm"] = cfg.encoder.use_batch_norm;
  j["r"] = cfg.encoder.r;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& origin) {
  static const char* known[] = {"lr",          "weight_decay",  "max_epochs", "patience",       "seed",
                                "target_type", "dim",           "num_layers", "com",            "pool",
                                "use_meta_node", "use_batch_norm", "r"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(origin + ": unknown key '" + key + "'");
  }
  TrainConfig cfg;
  try {
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("max_epochs")) cfg.max_epochs = j.at("max_epochs").get<i64>();
    if (j.contains("patience")) cfg.patience = j.at("patience").get<i64>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<u64>();
    if (j.contains("target_type")) cfg.target_type = j.at("target_type").get<int>();
    if (j.contains("dim")) cfg.encoder.dim = j.at("dim").get<i64>();
    if (j.contains("num_layers")) cfg.encoder.num_layers = j.at("num_layers").get<int>();
    if (j.contains("com")) cfg.encoder.com = parse_com_mode(j.at("com").get<std::string>());
    if (j.contains("pool")) cfg.encoder.pool = parse_pool_mode(j.at("pool").get<std::string>());
    if (j.contains("use_meta_node")) cfg.encoder.use_meta_node = j.at("use_meta_node").get<bool>();
    if (j.contains("use_batch_norm")) cfg.encoder.use_batch_norm = j.at("use_batch_norm").get<bool>();
    if (j.contains("r")) cfg.encoder.r = j.at("r").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

inline void save_checkpoint(const std::string& path, const ParamStore& store, const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path);
  detail::write_bytes(out, "MNCK", 4);
  detail::write_u32(out, kCheckpointFormatVersion);
  const std::string config = train_config_json(cfg).dump();
  detail::write_u64(out, config.size());
  detail::write_bytes(out, config.data(), config.size());
  const auto& names = store.names();
  detail::write_u64(out, names.size());
  for (const std::string& name : names) {
    const Matrix& m = store.value(name);
    detail::write_u64(out, name.size());
    detail::write_bytes(out, name.data(), name.size());
    detail::write_u64(out, static_cast<u64>(m.rows));
    detail::write_u64(out, static_cast<u64>(m.cols));
    for (double v : m.data) detail::write_f64(out, v);
  }
  if (!out) throw ArtifactError("write failed for " + path);
}

struct Checkpoint {
  TrainConfig config;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path);
  char magic[4];
  detail::read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, "MNCK", 4) != 0) throw ArtifactError(path + ": not a checkpoint (bad magic)");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != kCheckpointFormatVersion)
    throw ArtifactError(path + ": unsupported checkpoint version " + std::to_string(version));
  const u64 config_len = detail::read_u64(in, path);
  if (config_len > (1u << 20)) throw ArtifactError(path + ": implausible config length");
  std::string config(config_len, '\0');
  detail::read_bytes(in, config.data(), config_len, path);
  Checkpoint ckpt;
  try {
    ckpt.config = train_config_from_json(nlohmann::json::parse(config), path);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(path + ": config echo is not valid JSON: " + e.what());
  }
  const u64 count = detail::read_u64(in, path);
  if (count > (1u << 20)) throw ArtifactError(path + ": implausible tensor count");
  for (u64 i = 0; i < count; ++i) {
    const u64 name_len = detail::read_u64(in, path);
    if (name_len > (1u << 16)) throw ArtifactError(path + ": implausible tensor name length");
    std::string name(name_len, '\0');
    detail::read_bytes(in, name.data(), name_len, path);
    const u64 rows = detail::read_u64(in, path);
    const u64 cols = detail::read_u64(in, path);
    if (rows > (1u << 30) || cols > (1u << 30)) throw ArtifactError(path + ": implausible tensor shape");
    Matrix m(static_cast<i64>(rows), static_cast<i64>(cols));
    for (double& v : m.data) v = detail::read_f64(in, path);
    ckpt.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

// Instantiates the checkpoint against a concrete graph: the expected tensor
// set is derived from (graph schema, stored config), then every stored
// tensor must match by name and shape. Catches dimension or schema drift
// with the offending tensor named.
inline ParamStore install_checkpoint(const Checkpoint& ckpt, const HeteroGraph& g) {
  ParamStore store;
  init_encoder_params(store, g, ckpt.config.encoder, ckpt.config.seed);
  if (ckpt.tensors.size() != store.names().size())
    throw ArtifactError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, graph+config expect " +
                        std::to_string(store.names().size()));
  for (const auto& [name, m] : ckpt.tensors) {
    if (!store.has(name)) throw ArtifactError("checkpoint tensor '" + name + "' has no counterpart for this graph");
    if (!store.value(name).same_shape(m))
      throw ArtifactError("checkpoint tensor '" + name + "' has shape " + shape_str(m) + ", expected " +
                          shape_str(store.value(name)));
    store.value(name) = m;
  }
  return store;
}

// ---------------------------------------------------------------------------
// Synthetic planted-community graphs

struct AuxTypeSpec {
  i64 count = 0;
  double affinity = 0.9;  // P(edge endpoint drawn from the same community)
};

struct SyntheticSpec {
  int num_classes = 3;
  i64 target_count = 1200;
  std::vector<AuxTypeSpec> aux_types;
  i64 feature_dim = 16;
  double feature_noise = 0.5;
  i64 edges_per_node = 5;  // per target node, per auxiliary type
  u64 seed = 1;

  void validate() const {
    if (num_classes < 2) throw ConfigError("synthetic spec: need at least 2 classes");
    if (target_count < num_classes) throw ConfigError("synthetic spec: fewer target nodes than classes");
    if (aux_types.empty()) throw ConfigError("synthetic spec: need at least one auxiliary type");
    for (const AuxTypeSpec& a : aux_types) {
      if (a.count < num_classes) throw ConfigError("synthetic spec: auxiliary type smaller than the community count");
      if (a.affinity < 0.0 || a.affinity > 1.0) throw ConfigError("synthetic spec: affinity must be in [0,1]");
    }
    if (feature_dim < num_classes) throw ConfigError("synthetic spec: feature_dim must be >= num_classes");
    if (feature_noise < 0.0) throw ConfigError("synthetic spec: negative feature noise");
    if (edges_per_node < 1) throw ConfigError("synthetic spec: edges_per_node must be >= 1");
  }
};

// The standard acceptance/demo fixture.
inline SyntheticSpec synth_easy_spec(u64 seed = 1) {
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.target_count = 1200;
  spec.aux_types = {{400, 0.9}, {600, 0.9}};
  spec.feature_dim = 16;
  spec.feature_noise = 0.5;
  spec.edges_per_node = 5;
  spec.seed = seed;
  return spec;
}

struct SyntheticGraph {
  GraphSpec spec;
  std::vector<int> target_labels;
  int target_type = 0;
};

// Planted-community generator. Classes and communities are assigned round
// robin, features are a class/community one-hot centroid plus Gaussian
// noise, and each target node draws `edges_per_node` endpoints per
// auxiliary type: with probability `affinity` uniformly from its own
// community, otherwise uniformly from all other communities. A single
// derived stream drives every draw, so a spec reproduces its graph exactly.
inline SyntheticGraph synthesize(const SyntheticSpec& s) {
  s.validate();
  const int k = s.num_classes;
  Rng rng(stream_seed(s.seed, "synth"));

  SyntheticGraph out;
  out.spec.node_types.push_back({"target", s.target_count, s.feature_dim});
  for (size_t a = 0; a < s.aux_types.size(); ++a)
    out.spec.node_types.push_back({"aux" + std::to_string(a), s.aux_types[a].count, s.feature_dim});

  out.target_labels.resize(static_cast<size_t>(s.target_count));
  for (i64 i = 0; i < s.target_count; ++i) out.target_labels[static_cast<size_t>(i)] = static_cast<int>(i % k);

  std::vector<std::vector<std::vector<i64>>> community_members(s.aux_types.size());
  for (size_t a = 0; a < s.aux_types.size(); ++a) {
    community_members[a].resize(static_cast<size_t>(k));
    for (i64 i = 0; i < s.aux_types[a].count; ++i)
      community_members[a][static_cast<size_t>(i % k)].push_back(i);
  }

  auto centroid_features = [&](i64 count, auto community_of) {
    Matrix f(count, s.feature_dim);
    for (i64 i = 0; i < count; ++i) {
      double* row = f.row(i);
      row[community_of(i)] = 1.0;
      for (i64 c = 0; c < s.feature_dim; ++c) row[c] += s.feature_noise * rng.gaussian();
    }
    return f;
  };
  out.spec.features.push_back(centroid_features(s.target_count, [&](i64 i) { return i % k; }));
  for (size_t a = 0; a < s.aux_types.size(); ++a)
    out.spec.features.push_back(centroid_features(s.aux_types[a].count, [&](i64 i) { return i % k; }));

  for (size_t a = 0; a < s.aux_types.size(); ++a) {
    out.spec.edge_types.push_back({"target_aux" + std::to_string(a), 0, static_cast<int>(a + 1)});
    std::vector<std::pair<i64, i64>> edges;
    edges.reserve(static_cast<size_t>(s.target_count * s.edges_per_node));
    for (i64 i = 0; i < s.target_count; ++i) {
      const int own = static_cast<int>(i % k);
      for (i64 e = 0; e < s.edges_per_node; ++e) {
        i64 endpoint;
        if (rng.unit() < s.aux_types[a].affinity) {
          const auto& members = community_members[a][static_cast<size_t>(own)];
          endpoint = members[rng.below(members.size())];
        } else {
          // Uniform over every node outside the target's community.
          const i64 outside = s.aux_types[a].count - static_cast<i64>(community_members[a][static_cast<size_t>(own)].size());
          i64 pick = static_cast<i64>(rng.below(static_cast<u64>(outside)));
          i64 endpoint_found = -1;
          for (int c = 0; c < k && endpoint_found < 0; ++c) {
            if (c == own) continue;
            const auto& members = community_members[a][static_cast<size_t>(c)];
            if (pick < static_cast<i64>(members.size()))
              endpoint_found = members[static_cast<size_t>(pick)];
            else
              pick -= static_cast<i64>(members.size());
          }
          endpoint = endpoint_found;
        }
        edges.emplace_back(i, endpoint);
      }
    }
    out.spec.edges.push_back(std::move(edges));
  }
  return out;
}

inline void generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  SyntheticGraph g = synthesize(spec);
  std::vector<std::vector<int>> labels(g.spec.node_types.size());
  labels[0] = g.target_labels;
  save_graph(out_dir, g.spec, labels);
}

}  // namespace mn
