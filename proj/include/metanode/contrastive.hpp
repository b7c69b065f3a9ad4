#pragma once

// Contrastive pretext task: a corrupted twin of the graph provides negative
// examples, a bilinear discriminator scores each node representation against
// a global summary vector, and the loss is the mean binary cross entropy
// over positives (original graph) and negatives (corrupted graph), built
// from numerically stable log-sigmoid terms.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/encoder.hpp"
#include "metanode/graph.hpp"
#include "metanode/params.hpp"
#include "metanode/tape.hpp"

namespace mn {

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 0.0;
  i64 max_epochs = 10000;
  i64 patience = 20;
  u64 seed = 1;
  int target_type = 0;  // node type whose embeddings downstream tasks consume
  EncoderConfig encoder;

  void validate() const {
    encoder.validate();
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight decay must be finite and >= 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs) throw ConfigError("patience must be in [1, max_epochs]");
  }
};

struct TrainReport {
  std::vector<double> loss_history;
  i64 best_epoch = 0;
  double best_loss = 0.0;
};

// s = logistic(mean over every node row). h_all stacks all node types.
inline Tape::Id summary_node(Tape& tape, Tape::Id h_all) {
  const Matrix& H = tape.value(h_all);
  if (H.rows == 0) throw ConfigError("summary: no node representations");
  std::vector<i64> everyone(static_cast<size_t>(H.rows));
  for (i64 i = 0; i < H.rows; ++i) everyone[static_cast<size_t>(i)] = i;
  auto groups = std::make_shared<std::vector<std::vector<i64>>>(std::vector<std::vector<i64>>{std::move(everyone)});
  return tape.logistic(tape.segment_reduce(h_all, std::move(groups), SegMode::Mean));
}

// Per-row discriminator logits h_i^T W s for a stack of representations.
inline Tape::Id bilinear_logits(Tape& tape, Tape::Id h_all, Tape::Id w, Tape::Id s) {
  return tape.matmul(tape.matmul(h_all, w), tape.transpose(s));
}

// Value to minimize: -(1/2|V|) [ sum log sigma(pos) + sum log sigma(-neg) ].
inline Tape::Id contrastive_loss_node(Tape& tape, Tape::Id pos_logits, Tape::Id neg_logits) {
  const Matrix& P = tape.value(pos_logits);
  const Matrix& N = tape.value(neg_logits);
  if (P.rows != N.rows || P.cols != 1 || N.cols != 1)
    throw ConfigError("contrastive loss: positive/negative logit column mismatch, " + shape_str(P) + " vs " + shape_str(N));
  Tape::Id pos_term = tape.mean_all(tape.log_sigmoid(pos_logits));
  Tape::Id neg_term = tape.mean_all(tape.log_sigmoid(tape.scale(neg_logits, -1.0)));
  return tape.scale(tape.add(pos_term, neg_term), -0.5);
}

// Plain-matrix counterparts used for spot checks.
inline Matrix summary_vector(const std::vector<Matrix>& h_per_type) {
  i64 total = 0;
  i64 d = -1;
  for (const Matrix& h : h_per_type) {
    total += h.rows;
    if (d < 0) d = h.cols;
    if (h.cols != d) throw ConfigError("summary: representation width mismatch");
  }
  if (total == 0) throw ConfigError("summary: no node representations");
  Matrix s(1, d);
  for (const Matrix& h : h_per_type)
    for (i64 i = 0; i < h.rows; ++i)
      for (i64 j = 0; j < d; ++j) s(0, j) += h(i, j);
  for (i64 j = 0; j < d; ++j) s(0, j) = logistic_scalar(s(0, j) / static_cast<double>(total));
  return s;
}

inline double discriminate(const Matrix& h_row, const Matrix& w, const Matrix& s_row) {
  if (h_row.rows != 1 || s_row.rows != 1 || h_row.cols != w.rows || w.cols != s_row.cols)
    throw ConfigError("discriminate: shape mismatch");
  double logit = 0.0;
  for (i64 a = 0; a < w.rows; ++a) {
    double acc = 0.0;
    for (i64 b = 0; b < w.cols; ++b) acc += w(a, b) * s_row.data[static_cast<size_t>(b)];
    logit += h_row.data[static_cast<size_t>(a)] * acc;
  }
  return logistic_scalar(logit);
}

// The complete per-epoch objective: encode the original and corrupted
// graphs through the shared encoder, read the summary off the original
// graph only, and score both against it.
inline Tape::Id build_contrastive_loss(Tape& tape, TapeBind& bind, const HeteroGraph& g,
                                       const HeteroGraph& corrupted, const MetaNodeSample& sample,
                                       const EncoderConfig& cfg) {
  std::vector<Tape::Id> h = encode(tape, bind, g, sample, cfg);
  std::vector<Tape::Id> h_neg = encode(tape, bind, corrupted, sample, cfg);
  Tape::Id h_all = tape.concat_rows(h);
  Tape::Id h_neg_all = tape.concat_rows(h_neg);
  Tape::Id s = summary_node(tape, h_all);
  Tape::Id w = bind("disc.W");
  return contrastive_loss_node(tape, bilinear_logits(tape, h_all, w, s),
                               bilinear_logits(tape, h_neg_all, w, s));
}

namespace detail {
inline std::string format_loss(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

// Full training loop. `store` must be freshly constructed; parameters are
// created and initialized here so that (graph, config) alone determine the
// result. Per epoch: resample meta-node members, redraw the corruption,
// encode both graphs through the shared encoder, score against the original
// graph's summary, then one Adam step. The parameters reported are the ones
// that produced the best loss (captured before that epoch's update).
inline TrainReport train(const HeteroGraph& g, const TrainConfig& cfg, ParamStore& store,
                         std::ostream* log = nullptr) {
  cfg.validate();
  if (cfg.target_type < 0 || cfg.target_type >= g.num_node_types())
    throw ConfigError("target_type out of range");
  if (!store.names().empty()) throw ConfigError("train: parameter store must start empty");
  init_encoder_params(store, g, cfg.encoder, cfg.seed);

  TrainReport report;
  std::vector<Matrix> best_values = store.snapshot_values();
  double best = std::numeric_limits<double>::infinity();
  i64 since_improvement = 0;
  if (log) *log << "epoch\tloss\telapsed_ms\n";

  for (i64 epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    MetaNodeSample sample = sample_meta_members(g, cfg.encoder.r, stream_seed(cfg.seed, "sample", static_cast<u64>(epoch)));
    HeteroGraph corrupted = corrupt(g, stream_seed(cfg.seed, "corrupt", static_cast<u64>(epoch)));

    Tape tape;
    TapeBind bind(store, tape);
    Tape::Id loss = build_contrastive_loss(tape, bind, g, corrupted, sample, cfg.encoder);

    const double value = tape.value(loss)(0, 0);
    if (!std::isfinite(value))
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (loss=" + detail::format_loss(value) + ")");
    report.loss_history.push_back(value);

    if (value < best - 1e-6) {
      best = value;
      report.best_epoch = epoch;
      best_values = store.snapshot_values();
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience) {
      if (log) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        *log << epoch << '\t' << detail::format_loss(value) << '\t' << ms << '\n';
      }
      break;
    }

    store.zero_grads();
    tape.backward(loss);
    bind.pull_grads();
    store.adam_step(cfg.lr, cfg.weight_decay);

    if (log) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      *log << epoch << '\t' << detail::format_loss(value) << '\t' << ms << '\n';
    }
  }

  store.restore_values(best_values);
  report.best_loss = best;
  return report;
}

// Inference-time embeddings: every node of every type is a meta-node member.
inline std::vector<Matrix> embed_all(const HeteroGraph& g, ParamStore& store, const EncoderConfig& cfg) {
  return encode_values(g, store, cfg, MetaNodeSample::full(g));
}

}  // namespace mn
