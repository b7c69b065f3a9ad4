// Command-line front end for the meta-node embedding pipeline.
//
// Subcommands: generate, train, embed, classify, cluster, sparsify,
// gradcheck. Every command that draws random numbers requires an explicit
// --seed; there is no time-based seeding anywhere. Exit codes: 0 success,
// 2 usage/config error, 3 numerical failure, 4 artifact mismatch.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metanode/metanode.hpp"

namespace {

using namespace mn;

// MN_THREADS caps intra-op parallelism. All kernels currently run on one
// thread (a requirement of the deterministic summation orders), so any
// positive cap is honored trivially; the variable is still validated so a
// typo fails loudly instead of silently.
int thread_cap() {
  const char* env = std::getenv("MN_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) throw ConfigError("MN_THREADS must be a positive integer");
  return static_cast<int>(v);
}

std::pair<std::vector<i64>, Matrix> load_embeddings_any(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
    Matrix m = load_matrix_bin(path);
    std::vector<i64> ids(static_cast<size_t>(m.rows));
    for (i64 i = 0; i < m.rows; ++i) ids[static_cast<size_t>(i)] = i;
    return {std::move(ids), std::move(m)};
  }
  return load_embeddings_tsv(path);
}

int resolve_target_type(const LoadedGraph& loaded, const std::string& flag_name, int fallback) {
  if (!flag_name.empty()) {
    const int j = loaded.graph.find_node_type(flag_name);
    if (j < 0) throw ConfigError("unknown node type '" + flag_name + "'");
    return j;
  }
  if (fallback < 0 || fallback >= loaded.graph.num_node_types())
    throw ConfigError("target type index " + std::to_string(fallback) + " out of range");
  return fallback;
}

// Labels of the target type, indexed like the embedding rows.
std::vector<int> labels_for_rows(const LoadedGraph& loaded, int target, const std::vector<i64>& ids) {
  const auto& labels = loaded.labels[static_cast<size_t>(target)];
  if (labels.empty())
    throw ConfigError("node type '" + loaded.graph.node_type(target).name + "' has no labels file");
  std::vector<int> out;
  out.reserve(ids.size());
  for (i64 id : ids) {
    if (id < 0 || id >= static_cast<i64>(labels.size()))
      throw ArtifactError("embedding references node id " + std::to_string(id) + " outside the labeled type");
    out.push_back(labels[static_cast<size_t>(id)]);
  }
  return out;
}

struct TrainCli {
  std::string graph_dir, out_path, log_path, config_path, com = "concat", pool = "mean", target_name;
  u64 seed = 0;
  i64 epochs = 10000, patience = 20, dim = 64;
  int layers = 2, r = 70;
  double lr = 5e-4, wd = 0.0;
  bool use_meta_node = true, use_batch_norm = false;
};

int cmd_train(const TrainCli& cli, const CLI::App* sub) {
  TrainConfig cfg;
  std::string graph_dir = cli.graph_dir, out_path = cli.out_path, log_path = cli.log_path;
  bool seed_given = sub->count("--seed") > 0;
  if (!cli.config_path.empty()) {
    std::ifstream in(cli.config_path);
    if (!in) throw ConfigError("cannot open config file " + cli.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(cli.config_path + ": " + e.what());
    }
    if (j.contains("graph")) {
      if (graph_dir.empty()) graph_dir = j.at("graph").get<std::string>();
      j.erase("graph");
    }
    if (j.contains("out")) {
      if (out_path.empty()) out_path = j.at("out").get<std::string>();
      j.erase("out");
    }
    if (j.contains("log")) {
      if (log_path.empty()) log_path = j.at("log").get<std::string>();
      j.erase("log");
    }
    seed_given = seed_given || j.contains("seed");
    cfg = train_config_from_json(j, cli.config_path);
  }

  auto given = [&](const std::string& flag) { return sub->count(flag) > 0; };
  if (given("--seed")) cfg.seed = cli.seed;
  if (given("--epochs")) cfg.max_epochs = cli.epochs;
  if (given("--patience")) cfg.patience = cli.patience;
  if (given("--lr")) cfg.lr = cli.lr;
  if (given("--wd")) cfg.weight_decay = cli.wd;
  if (given("--dim")) cfg.encoder.dim = cli.dim;
  if (given("--layers")) cfg.encoder.num_layers = cli.layers;
  if (given("--com")) cfg.encoder.com = parse_com_mode(cli.com);
  if (given("--pool")) cfg.encoder.pool = parse_pool_mode(cli.pool);
  if (given("--r")) cfg.encoder.r = cli.r;
  if (given("--use-meta-node")) cfg.encoder.use_meta_node = cli.use_meta_node;
  if (given("--batch-norm")) cfg.encoder.use_batch_norm = cli.use_batch_norm;
  if (!seed_given) throw ConfigError("--seed is required (flag or config file)");
  if (graph_dir.empty()) throw ConfigError("--graph is required");
  if (out_path.empty()) throw ConfigError("--out is required");
  if (log_path.empty()) log_path = out_path + ".log";

  LoadedGraph loaded = load_graph(graph_dir);
  cfg.target_type = resolve_target_type(loaded, cli.target_name,
                                        cli.config_path.empty() ? loaded.default_target_type() : cfg.target_type);

  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw ArtifactError("cannot write " + log_path);
  ParamStore store;
  const TrainReport report = train(loaded.graph, cfg, store, &log);
  save_checkpoint(out_path, store, cfg);

  std::cout << "epochs_run=" << report.loss_history.size() << " best_epoch=" << report.best_epoch
            << " best_loss=" << detail::format_loss(report.best_loss)
            << " final_loss=" << detail::format_loss(report.loss_history.back()) << "\n"
            << "checkpoint: " << out_path << "\nlog: " << log_path << "\n";
  return 0;
}

int cmd_embed(const std::string& graph_dir, const std::string& ckpt_path, const std::string& out_path,
              const std::string& target_name) {
  LoadedGraph loaded = load_graph(graph_dir);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ParamStore store = install_checkpoint(ckpt, loaded.graph);
  const int target = resolve_target_type(loaded, target_name, ckpt.config.target_type);
  // Inference uses full meta-node membership: deterministic, no sampling.
  std::vector<Matrix> h = embed_all(loaded.graph, store, ckpt.config.encoder);
  const Matrix& ht = h[static_cast<size_t>(target)];
  std::vector<i64> ids(static_cast<size_t>(ht.rows));
  for (i64 i = 0; i < ht.rows; ++i) ids[static_cast<size_t>(i)] = i;
  save_embeddings(out_path, ids, ht);
  std::cout << "embedded " << ht.rows << " '" << loaded.graph.node_type(target).name << "' nodes ("
            << ht.cols << " dims) -> " << out_path << "\n";
  return 0;
}

int cmd_classify(const std::string& emb_path, const std::string& graph_dir, const std::string& target_name,
                 i64 n_per_class, i64 n_val, i64 n_test, u64 seed) {
  LoadedGraph loaded = load_graph(graph_dir);
  const int target = resolve_target_type(loaded, target_name, loaded.default_target_type());
  auto [ids, x] = load_embeddings_any(emb_path);
  const std::vector<int> labels = labels_for_rows(loaded, target, ids);

  const LabeledSplit split = make_split(labels, n_per_class, n_val, n_test, seed);
  const int k = num_classes(labels);
  Matrix x_train(static_cast<i64>(split.train.size()), x.cols);
  std::vector<int> y_train;
  for (size_t i = 0; i < split.train.size(); ++i) {
    std::copy(x.row(split.train[i]), x.row(split.train[i]) + x.cols, x_train.row(static_cast<i64>(i)));
    y_train.push_back(labels[static_cast<size_t>(split.train[i])]);
  }
  const LogisticModel model = logistic_fit(x_train, y_train, k);

  Matrix x_test(static_cast<i64>(split.test.size()), x.cols);
  std::vector<int> y_test;
  for (size_t i = 0; i < split.test.size(); ++i) {
    std::copy(x.row(split.test[i]), x.row(split.test[i]) + x.cols, x_test.row(static_cast<i64>(i)));
    y_test.push_back(labels[static_cast<size_t>(split.test[i])]);
  }

  MetricsRow row;
  row.add("macro_f1", macro_f1(y_test, model.predict(x_test), k));
  row.add("micro_f1", micro_f1(y_test, model.predict(x_test), k));
  row.add("auc", auc(y_test, model.predict_proba(x_test), k));
  std::cout << row.json_line() << "\n" << row.tsv();
  return 0;
}

int cmd_cluster(const std::string& emb_path, const std::string& graph_dir, const std::string& target_name,
                int k_flag, u64 seed) {
  LoadedGraph loaded = load_graph(graph_dir);
  const int target = resolve_target_type(loaded, target_name, loaded.default_target_type());
  auto [ids, x] = load_embeddings_any(emb_path);
  const std::vector<int> labels = labels_for_rows(loaded, target, ids);

  std::vector<i64> keep;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) keep.push_back(static_cast<i64>(i));
  if (keep.empty()) throw ConfigError("no labeled nodes to cluster");
  Matrix xl(static_cast<i64>(keep.size()), x.cols);
  std::vector<int> yl;
  for (size_t i = 0; i < keep.size(); ++i) {
    std::copy(x.row(keep[i]), x.row(keep[i]) + x.cols, xl.row(static_cast<i64>(i)));
    yl.push_back(labels[static_cast<size_t>(keep[i])]);
  }
  const int k = k_flag > 0 ? k_flag : num_classes(yl);

  const KMeansResult km = kmeans(xl, k, seed);
  MetricsRow row;
  row.add("nmi", nmi(yl, km.assignments));
  row.add("ari", ari(yl, km.assignments));
  row.add("silhouette", silhouette(xl, km.assignments));
  std::cout << row.json_line() << "\n" << row.tsv();
  return 0;
}

int cmd_sparsify(const std::string& graph_dir, const std::string& out_dir, double keep_fraction, u64 seed) {
  LoadedGraph loaded = load_graph(graph_dir);
  HeteroGraph sparse = sparsify(loaded.graph, keep_fraction, seed);
  save_graph(out_dir, to_spec(sparse), loaded.labels);
  for (int t = 0; t < sparse.num_edge_types(); ++t)
    std::cout << sparse.edge_type(t).name << ": kept " << sparse.edges(t).size() << " of "
              << loaded.graph.edges(t).size() << " edges\n";
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

struct GradcheckCli {
  std::string op, fault, com = "concat", pool = "mean";
  u64 seed = 0;
  i64 dim = 8;
  int layers = 2, r = 70;
  bool use_meta_node = true, use_batch_norm = false;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckCli& cli) {
  std::string fault = cli.fault;
  if (fault == "segment_sum" || fault == "segment_mean" || fault == "segment_max") fault = "segment_reduce";

  EncoderConfig enc = default_check_encoder();
  enc.dim = cli.dim;
  enc.num_layers = cli.layers;
  enc.com = parse_com_mode(cli.com);
  enc.pool = parse_pool_mode(cli.pool);
  enc.use_meta_node = cli.use_meta_node;
  enc.use_batch_norm = cli.use_batch_norm;
  enc.r = cli.r;

  std::vector<OpCheckResult> results;
  if (cli.op.empty()) {
    for (const std::string& op : checkable_primitives())
      results.push_back(check_primitive_gradient(op, cli.seed, fault));
    results.push_back(check_model_gradient(cli.seed, enc, fault));
  } else if (cli.op == "model") {
    results.push_back(check_model_gradient(cli.seed, enc, fault));
  } else {
    results.push_back(check_primitive_gradient(cli.op, cli.seed, fault));
  }

  bool ok = true;
  for (const OpCheckResult& r : results) {
    const bool pass = r.max_rel_err < cli.tolerance;
    ok = ok && pass;
    std::printf("%-18s max_rel_err=%-12.3e %s\n", r.op.c_str(), r.max_rel_err, pass ? "ok" : "FAIL");
  }
  if (!ok) throw NumericalError("gradient check exceeded tolerance " + std::to_string(cli.tolerance));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meta-node message passing: training, embedding, and evaluation for typed graphs"};
  app.require_subcommand(1);
  int exit_code = 0;

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write a seeded synthetic graph directory");
  struct {
    std::string out, preset = "synth-easy";
    u64 seed = 0;
    int classes = 0;
    i64 target_count = 0, feature_dim = 0, edges_per_node = 0;
    std::vector<i64> aux_counts;
    std::vector<double> aux_affinities;
    double noise = -1.0;
  } g;
  gen->add_option("--out", g.out, "output directory")->required();
  gen->add_option("--seed", g.seed, "generation seed")->required();
  gen->add_option("--preset", g.preset, "base spec to start from (synth-easy)");
  gen->add_option("--classes", g.classes, "number of target classes / communities");
  gen->add_option("--target-count", g.target_count, "number of target nodes");
  gen->add_option("--aux-count", g.aux_counts, "auxiliary type sizes (repeatable)");
  gen->add_option("--aux-affinity", g.aux_affinities, "same-community edge probability per auxiliary type");
  gen->add_option("--feature-dim", g.feature_dim, "feature dimension for every type");
  gen->add_option("--noise", g.noise, "feature noise standard deviation");
  gen->add_option("--edges-per-node", g.edges_per_node, "edges per target node per auxiliary type");
  gen->callback([&] {
    if (g.preset != "synth-easy") throw ConfigError("unknown preset '" + g.preset + "'");
    SyntheticSpec spec = synth_easy_spec(g.seed);
    if (gen->count("--classes")) spec.num_classes = g.classes;
    if (gen->count("--target-count")) spec.target_count = g.target_count;
    if (gen->count("--aux-count")) {
      spec.aux_types.clear();
      for (size_t i = 0; i < g.aux_counts.size(); ++i) {
        double affinity = 0.9;
        if (i < g.aux_affinities.size()) affinity = g.aux_affinities[i];
        spec.aux_types.push_back({g.aux_counts[i], affinity});
      }
    } else if (gen->count("--aux-affinity")) {
      if (g.aux_affinities.size() != spec.aux_types.size())
        throw ConfigError("--aux-affinity count must match the auxiliary type count");
      for (size_t i = 0; i < g.aux_affinities.size(); ++i) spec.aux_types[i].affinity = g.aux_affinities[i];
    }
    if (gen->count("--feature-dim")) spec.feature_dim = g.feature_dim;
    if (gen->count("--noise")) spec.feature_noise = g.noise;
    if (gen->count("--edges-per-node")) spec.edges_per_node = g.edges_per_node;
    generate_synthetic(spec, g.out);
    std::cout << "wrote " << g.out << "\n";
    exit_code = 0;
  });

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "contrastive training; writes a checkpoint and a loss log");
  TrainCli t;
  tr->add_option("--graph", t.graph_dir, "graph directory");
  tr->add_option("--out", t.out_path, "checkpoint output path");
  tr->add_option("--log", t.log_path, "loss log path (default: <out>.log)");
  tr->add_option("--config", t.config_path, "JSON config file; flags override");
  tr->add_option("--seed", t.seed, "training seed");
  tr->add_option("--epochs", t.epochs, "maximum epochs");
  tr->add_option("--patience", t.patience, "epochs without improvement before stopping");
  tr->add_option("--lr", t.lr, "learning rate");
  tr->add_option("--wd", t.wd, "weight decay");
  tr->add_option("--dim", t.dim, "embedding dimension");
  tr->add_option("--layers", t.layers, "message passing layers");
  tr->add_option("--com", t.com, "combination mode: sum|concat");
  tr->add_option("--pool", t.pool, "meta-node pooling: sum|mean|max");
  tr->add_option("--r", t.r, "meta-node member percentage per training epoch");
  tr->add_option("--use-meta-node", t.use_meta_node, "true|false: include the meta-node component");
  tr->add_option("--batch-norm", t.use_batch_norm, "true|false: batch norm in the projection");
  tr->add_option("--target-type", t.target_name, "node type whose embeddings downstream tasks use");
  tr->callback([&] { exit_code = cmd_train(t, tr); });

  // embed ------------------------------------------------------------------
  auto* em = app.add_subcommand("embed", "export embeddings for the target type from a checkpoint");
  struct {
    std::string graph, ckpt, out, target;
  } e;
  em->add_option("--graph", e.graph, "graph directory")->required();
  em->add_option("--checkpoint", e.ckpt, "checkpoint path")->required();
  em->add_option("--out", e.out, "output file (.bin for binary, otherwise TSV)")->required();
  em->add_option("--target-type", e.target, "node type to export (default: checkpoint's target)");
  em->callback([&] { exit_code = cmd_embed(e.graph, e.ckpt, e.out, e.target); });

  // classify ---------------------------------------------------------------
  auto* cl = app.add_subcommand("classify", "split, fit a softmax classifier, report F1/AUC");
  struct {
    std::string emb, graph, target;
    i64 n_per_class = 20, n_val = 300, n_test = 300;
    u64 seed = 0;
  } c;
  cl->add_option("--embeddings", c.emb, "embedding file")->required();
  cl->add_option("--graph", c.graph, "graph directory (source of labels)")->required();
  cl->add_option("--target-type", c.target, "labeled node type");
  cl->add_option("--n-per-class", c.n_per_class, "training nodes per class");
  cl->add_option("--n-val", c.n_val, "validation set size");
  cl->add_option("--n-test", c.n_test, "test set size");
  cl->add_option("--seed", c.seed, "split seed")->required();
  cl->callback([&] { exit_code = cmd_classify(c.emb, c.graph, c.target, c.n_per_class, c.n_val, c.n_test, c.seed); });

  // cluster ----------------------------------------------------------------
  auto* cu = app.add_subcommand("cluster", "k-means on embeddings, report NMI/ARI/silhouette");
  struct {
    std::string emb, graph, target;
    int k = 0;
    u64 seed = 0;
  } u;
  cu->add_option("--embeddings", u.emb, "embedding file")->required();
  cu->add_option("--graph", u.graph, "graph directory (source of labels)")->required();
  cu->add_option("--target-type", u.target, "labeled node type");
  cu->add_option("--k", u.k, "cluster count (default: number of classes)");
  cu->add_option("--seed", u.seed, "clustering seed")->required();
  cu->callback([&] { exit_code = cmd_cluster(u.emb, u.graph, u.target, u.k, u.seed); });

  // sparsify ---------------------------------------------------------------
  auto* sp = app.add_subcommand("sparsify", "keep a random fraction of each edge type");
  struct {
    std::string graph, out;
    double keep = 1.0;
    u64 seed = 0;
  } s;
  sp->add_option("--graph", s.graph, "input graph directory")->required();
  sp->add_option("--out", s.out, "output graph directory")->required();
  sp->add_option("--keep-fraction", s.keep, "fraction of edges to keep, per type")->required();
  sp->add_option("--seed", s.seed, "edge selection seed")->required();
  sp->callback([&] { exit_code = cmd_sparsify(s.graph, s.out, s.keep, s.seed); });

  // gradcheck --------------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "compare reverse-mode gradients against finite differences");
  GradcheckCli d;
  gc->add_option("--seed", d.seed, "seed for the random inputs")->required();
  gc->add_option("--op", d.op, "check one primitive (or 'model') instead of everything");
  gc->add_option("--break-backward", d.fault, "inject a backward-pass fault (negative control)");
  gc->add_option("--dim", d.dim, "model check: embedding dimension");
  gc->add_option("--layers", d.layers, "model check: layers");
  gc->add_option("--com", d.com, "model check: combination mode");
  gc->add_option("--pool", d.pool, "model check: pooling mode");
  gc->add_option("--use-meta-node", d.use_meta_node, "model check: meta-node component");
  gc->add_option("--batch-norm", d.use_batch_norm,
                 "model check: batch norm (note: makes the projection bias inert, so its "
                 "finite difference is pure roundoff and may trip the tolerance)");
  gc->add_option("--r", d.r, "model check: member percentage");
  gc->add_option("--tolerance", d.tolerance, "maximum allowed relative error");
  gc->callback([&] { exit_code = cmd_gradcheck(d); });

  try {
    thread_cap();
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  } catch (const mn::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const mn::NumericalError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const mn::ArtifactError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "unexpected error: " << err.what() << "\n";
    return 1;
  }
  return exit_code;
}
