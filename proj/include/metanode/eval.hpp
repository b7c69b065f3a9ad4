#pragma once

// Downstream evaluation of embeddings: labeled splits, a softmax-regression
// classifier, F1/AUC classification metrics, k-means clustering, and the
// NMI/ARI/silhouette clustering metrics. Everything here is deterministic
// given its explicit seed; every metric has an independent brute-force
// oracle in the test suite.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/matrix.hpp"
#include "metanode/rng.hpp"

namespace mn {

struct LabeledSplit {
  std::vector<int> labels;  // class id per node, -1 = unlabeled
  std::vector<i64> train, val, test;
};

inline int num_classes(const std::vector<int>& labels) {
  int k = 0;
  for (int c : labels)
    if (c >= 0) k = std::max(k, c + 1);
  return k;
}

// Uniform without-replacement split: per class (ascending) n_per_class
// training nodes, then n_val validation and n_test test nodes from the
// shuffled remainder. One RNG stream drives the whole procedure, so the
// split is a pure function of (labels, sizes, seed).
inline LabeledSplit make_split(const std::vector<int>& labels, i64 n_per_class, i64 n_val, i64 n_test, u64 seed) {
  if (n_per_class < 1) throw ConfigError("make_split: n_per_class must be >= 1");
  if (n_val < 0 || n_test < 0) throw ConfigError("make_split: negative split size");
  const int k = num_classes(labels);
  if (k < 2) throw ConfigError("make_split: need at least 2 classes");

  LabeledSplit split;
  split.labels = labels;
  Rng rng(stream_seed(seed, "split"));
  std::vector<bool> in_train(labels.size(), false);

  for (int c = 0; c < k; ++c) {
    std::vector<i64> pool;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) pool.push_back(static_cast<i64>(i));
    if (static_cast<i64>(pool.size()) < n_per_class)
      throw ConfigError("make_split: class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                        " nodes, need " + std::to_string(n_per_class));
    for (i64 pos : rng.sample_without_replacement(static_cast<i64>(pool.size()), n_per_class)) {
      split.train.push_back(pool[static_cast<size_t>(pos)]);
      in_train[static_cast<size_t>(pool[static_cast<size_t>(pos)])] = true;
    }
  }

  std::vector<i64> rest;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0 && !in_train[i]) rest.push_back(static_cast<i64>(i));
  if (static_cast<i64>(rest.size()) < n_val + n_test)
    throw ConfigError("make_split: only " + std::to_string(rest.size()) + " labeled nodes remain, need " +
                      std::to_string(n_val + n_test));
  rng.shuffle(rest);
  split.val.assign(rest.begin(), rest.begin() + n_val);
  split.test.assign(rest.begin() + n_val, rest.begin() + n_val + n_test);
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

struct LogisticModel {
  Matrix w;  // K x d
  Matrix b;  // 1 x K

  Matrix predict_proba(const Matrix& x) const {
    Matrix logits = matmul_nt(x, w);
    for (i64 i = 0; i < logits.rows; ++i)
      for (i64 j = 0; j < logits.cols; ++j) logits(i, j) += b.data[static_cast<size_t>(j)];
    for (i64 i = 0; i < logits.rows; ++i) {
      double* row = logits.row(i);
      double hi = row[0];
      for (i64 j = 1; j < logits.cols; ++j) hi = std::max(hi, row[j]);
      double z = 0.0;
      for (i64 j = 0; j < logits.cols; ++j) {
        row[j] = std::exp(row[j] - hi);
        z += row[j];
      }
      for (i64 j = 0; j < logits.cols; ++j) row[j] /= z;
    }
    return logits;
  }

  std::vector<int> predict(const Matrix& x) const {
    Matrix p = predict_proba(x);
    std::vector<int> out(static_cast<size_t>(p.rows));
    for (i64 i = 0; i < p.rows; ++i) {
      int best = 0;
      for (i64 j = 1; j < p.cols; ++j)
        if (p(i, j) > p(i, best)) best = static_cast<int>(j);
      out[static_cast<size_t>(i)] = best;
    }
    return out;
  }
};

// Multinomial softmax regression from zero initialization: full-batch
// gradient descent, cosine-decayed step size, L2 on the weights only.
inline LogisticModel logistic_fit(const Matrix& x, const std::vector<int>& y, int k,
                                  double l2 = 1e-3, int iters = 500, double lr0 = 0.5) {
  if (k < 2) throw ConfigError("logistic_fit: need at least 2 classes");
  if (x.rows != static_cast<i64>(y.size())) throw ConfigError("logistic_fit: row/label count mismatch");
  if (x.rows == 0) throw ConfigError("logistic_fit: empty training set");
  for (int c : y)
    if (c < 0 || c >= k) throw ConfigError("logistic_fit: label out of range");

  LogisticModel model{Matrix(k, x.cols), Matrix(1, k)};
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (int it = 0; it < iters; ++it) {
    const double lr = lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(it) / static_cast<double>(iters)));
    Matrix p = model.predict_proba(x);
    for (i64 i = 0; i < p.rows; ++i) p(i, y[static_cast<size_t>(i)]) -= 1.0;  // P - onehot(y)
    Matrix gw = matmul_tn(p, x);  // K x d after transpose orientation: (n x K)^T (n x d)
    for (i64 c = 0; c < k; ++c)
      for (i64 j = 0; j < x.cols; ++j)
        model.w(c, j) -= lr * (gw(c, j) * inv_n + l2 * model.w(c, j));
    for (i64 c = 0; c < k; ++c) {
      double g = 0.0;
      for (i64 i = 0; i < p.rows; ++i) g += p(i, c);
      model.b(0, c) -= lr * g * inv_n;
    }
  }
  return model;
}

namespace detail {
struct Confusion {
  double tp = 0, fp = 0, fn = 0;
};
inline std::vector<Confusion> per_class_counts(const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
  if (y_true.size() != y_pred.size()) throw ConfigError("f1: length mismatch");
  std::vector<Confusion> c(static_cast<size_t>(k));
  for (size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= k || p < 0 || p >= k) throw ConfigError("f1: label out of range");
    if (t == p) {
      c[static_cast<size_t>(t)].tp += 1;
    } else {
      c[static_cast<size_t>(p)].fp += 1;
      c[static_cast<size_t>(t)].fn += 1;
    }
  }
  return c;
}
}  // namespace detail

// Mean over all K classes of per-class F1; a class absent from both truth
// and prediction contributes 0.
inline double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
  const auto counts = detail::per_class_counts(y_true, y_pred, k);
  double total = 0.0;
  for (const auto& c : counts) {
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    total += denom > 0.0 ? 2.0 * c.tp / denom : 0.0;
  }
  return total / static_cast<double>(k);
}

// Global-count F1; for single-label multiclass this equals accuracy.
inline double micro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int k) {
  const auto counts = detail::per_class_counts(y_true, y_pred, k);
  double tp = 0, fp = 0, fn = 0;
  for (const auto& c : counts) {
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  const double denom = tp + 0.5 * (fp + fn);
  return denom > 0.0 ? tp / denom : 0.0;
}

// Macro-averaged one-vs-rest ROC AUC via the Mann-Whitney statistic with
// midranks for tied scores. Classes lacking positives or negatives are
// skipped; if every class is skipped the value is undefined.
inline double auc(const std::vector<int>& y_true, const Matrix& scores, int k) {
  if (scores.rows != static_cast<i64>(y_true.size()) || scores.cols != k)
    throw ConfigError("auc: score matrix must be len(y) x K");
  const i64 n = scores.rows;
  double total = 0.0;
  int used = 0;
  std::vector<i64> order(static_cast<size_t>(n));
  std::vector<double> rank(static_cast<size_t>(n));
  for (int c = 0; c < k; ++c) {
    i64 pos = 0;
    for (int t : y_true) pos += (t == c) ? 1 : 0;
    const i64 neg = n - pos;
    if (pos == 0 || neg == 0) continue;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](i64 a, i64 b) { return scores(a, c) < scores(b, c); });
    for (i64 i = 0; i < n;) {
      i64 j = i;
      while (j < n && scores(order[static_cast<size_t>(j)], c) == scores(order[static_cast<size_t>(i)], c)) ++j;
      const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of 1-based ranks i+1..j
      for (i64 t = i; t < j; ++t) rank[static_cast<size_t>(order[static_cast<size_t>(t)])] = mid;
      i = j;
    }
    double rank_sum = 0.0;
    for (i64 i = 0; i < n; ++i)
      if (y_true[static_cast<size_t>(i)] == c) rank_sum += rank[static_cast<size_t>(i)];
    total += (rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1)) /
             (static_cast<double>(pos) * static_cast<double>(neg));
    ++used;
  }
  if (used == 0) throw NumericalError("auc undefined: every class lacks positives or negatives");
  return total / static_cast<double>(used);
}

namespace detail {
inline double sq_dist(const Matrix& x, i64 a, const std::vector<double>& center) {
  double d = 0.0;
  const double* ra = x.row(a);
  for (i64 j = 0; j < x.cols; ++j) {
    const double t = ra[j] - center[static_cast<size_t>(j)];
    d += t * t;
  }
  return d;
}
}  // namespace detail

struct KMeansResult {
  std::vector<int> assignments;
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, best-of-restarts by inertia.
// Each restart draws from its own sub-stream, assignments break ties toward
// the lowest center index, and an emptied cluster is re-seeded with the
// point farthest from its current center.
inline KMeansResult kmeans(const Matrix& x, int k, u64 seed, int restarts = 10, int max_iters = 300) {
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (x.rows < k) throw ConfigError("kmeans: more clusters than points");
  const i64 n = x.rows, d = x.cols;

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng(stream_seed(seed, "kmeans", static_cast<u64>(restart)));
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<size_t>(k));
    {
      const i64 first = static_cast<i64>(rng.below(static_cast<u64>(n)));
      centers.emplace_back(x.row(first), x.row(first) + d);
      std::vector<double> d2(static_cast<size_t>(n));
      while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (i64 i = 0; i < n; ++i) {
          double m = detail::sq_dist(x, i, centers[0]);
          for (size_t c = 1; c < centers.size(); ++c) m = std::min(m, detail::sq_dist(x, i, centers[c]));
          d2[static_cast<size_t>(i)] = m;
          total += m;
        }
        i64 pick;
        if (total <= 0.0) {
          pick = static_cast<i64>(rng.below(static_cast<u64>(n)));
        } else {
          const double target = rng.unit() * total;
          double cum = 0.0;
          pick = n - 1;
          for (i64 i = 0; i < n; ++i) {
            cum += d2[static_cast<size_t>(i)];
            if (cum > target) {
              pick = i;
              break;
            }
          }
        }
        centers.emplace_back(x.row(pick), x.row(pick) + d);
      }
    }

    std::vector<int> assign(static_cast<size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
      bool changed = false;
      for (i64 i = 0; i < n; ++i) {
        int arg = 0;
        double m = detail::sq_dist(x, i, centers[0]);
        for (int c = 1; c < k; ++c) {
          const double dist = detail::sq_dist(x, i, centers[static_cast<size_t>(c)]);
          if (dist < m) {
            m = dist;
            arg = c;
          }
        }
        if (assign[static_cast<size_t>(i)] != arg) {
          assign[static_cast<size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;

      std::vector<i64> size(static_cast<size_t>(k), 0);
      for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
      for (i64 i = 0; i < n; ++i) {
        auto& c = centers[static_cast<size_t>(assign[static_cast<size_t>(i)])];
        const double* row = x.row(i);
        for (i64 j = 0; j < d; ++j) c[static_cast<size_t>(j)] += row[j];
        ++size[static_cast<size_t>(assign[static_cast<size_t>(i)])];
      }
      for (int c = 0; c < k; ++c)
        if (size[static_cast<size_t>(c)] > 0)
          for (i64 j = 0; j < d; ++j)
            centers[static_cast<size_t>(c)][static_cast<size_t>(j)] /= static_cast<double>(size[static_cast<size_t>(c)]);

      std::vector<bool> claimed(static_cast<size_t>(n), false);
      for (int c = 0; c < k; ++c) {
        if (size[static_cast<size_t>(c)] > 0) continue;
        i64 far = -1;
        double far_d = -1.0;
        for (i64 i = 0; i < n; ++i) {
          if (claimed[static_cast<size_t>(i)]) continue;
          const double dist = detail::sq_dist(x, i, centers[static_cast<size_t>(assign[static_cast<size_t>(i)])]);
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        claimed[static_cast<size_t>(far)] = true;
        centers[static_cast<size_t>(c)].assign(x.row(far), x.row(far) + d);
      }
    }

    double inertia = 0.0;
    for (i64 i = 0; i < n; ++i) inertia += detail::sq_dist(x, i, centers[static_cast<size_t>(assign[static_cast<size_t>(i)])]);
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignments = assign;
    }
  }
  return best;
}

namespace detail {
struct Contingency {
  std::vector<std::vector<i64>> cell;  // ka x kb
  std::vector<i64> row_sum, col_sum;
  i64 n = 0;
};
inline Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty()) throw ConfigError("partition comparison: length mismatch or empty");
  int ka = 0, kb = 0;
  for (int v : a) {
    if (v < 0) throw ConfigError("partition comparison: negative label");
    ka = std::max(ka, v + 1);
  }
  for (int v : b) {
    if (v < 0) throw ConfigError("partition comparison: negative label");
    kb = std::max(kb, v + 1);
  }
  Contingency t;
  t.cell.assign(static_cast<size_t>(ka), std::vector<i64>(static_cast<size_t>(kb), 0));
  t.row_sum.assign(static_cast<size_t>(ka), 0);
  t.col_sum.assign(static_cast<size_t>(kb), 0);
  t.n = static_cast<i64>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    ++t.cell[static_cast<size_t>(a[i])][static_cast<size_t>(b[i])];
    ++t.row_sum[static_cast<size_t>(a[i])];
    ++t.col_sum[static_cast<size_t>(b[i])];
  }
  return t;
}
inline double entropy(const std::vector<i64>& counts, i64 n) {
  double h = 0.0;
  for (i64 c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  return h;
}
inline double comb2(i64 m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); }
}  // namespace detail

// Mutual information over the contingency table normalized by the geometric
// mean of the marginal entropies (natural log). A zero-entropy partition
// yields 0 by convention.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  const double ha = detail::entropy(t.row_sum, t.n);
  const double hb = detail::entropy(t.col_sum, t.n);
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  const double n = static_cast<double>(t.n);
  for (size_t i = 0; i < t.cell.size(); ++i)
    for (size_t j = 0; j < t.cell[i].size(); ++j) {
      const i64 c = t.cell[i][j];
      if (c == 0) continue;
      const double pij = static_cast<double>(c) / n;
      mi += pij * std::log(n * static_cast<double>(c) /
                           (static_cast<double>(t.row_sum[i]) * static_cast<double>(t.col_sum[j])));
    }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

// Standard permutation-model adjustment; degenerate tables (denominator 0)
// yield 0.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  double index = 0.0;
  for (const auto& row : t.cell)
    for (i64 c : row) index += detail::comb2(c);
  double sum_a = 0.0, sum_b = 0.0;
  for (i64 c : t.row_sum) sum_a += detail::comb2(c);
  for (i64 c : t.col_sum) sum_b += detail::comb2(c);
  const double pairs = detail::comb2(t.n);
  if (pairs == 0.0) return 0.0;
  const double expected = sum_a * sum_b / pairs;
  const double denom = 0.5 * (sum_a + sum_b) - expected;
  if (denom == 0.0) return 0.0;
  return (index - expected) / denom;
}

// Mean silhouette width with Euclidean distances; singleton clusters score 0.
inline double silhouette(const Matrix& x, const std::vector<int>& labels) {
  if (x.rows != static_cast<i64>(labels.size())) throw ConfigError("silhouette: row/label count mismatch");
  const i64 n = x.rows;
  int k = 0;
  for (int v : labels) {
    if (v < 0) throw ConfigError("silhouette: negative label");
    k = std::max(k, v + 1);
  }
  std::vector<i64> size(static_cast<size_t>(k), 0);
  for (int v : labels) ++size[static_cast<size_t>(v)];
  int populated = 0;
  for (i64 s : size) populated += (s > 0) ? 1 : 0;
  if (populated < 2) throw ConfigError("silhouette: need at least 2 clusters");

  double total = 0.0;
  std::vector<double> mean_dist(static_cast<size_t>(k));
  for (i64 i = 0; i < n; ++i) {
    if (size[static_cast<size_t>(labels[static_cast<size_t>(i)])] == 1) continue;  // singleton: s_i = 0
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (i64 j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      const double* ri = x.row(i);
      const double* rj = x.row(j);
      for (i64 c = 0; c < x.cols; ++c) {
        const double t = ri[c] - rj[c];
        d2 += t * t;
      }
      mean_dist[static_cast<size_t>(labels[static_cast<size_t>(j)])] += std::sqrt(d2);
    }
    const int own = labels[static_cast<size_t>(i)];
    const double a = mean_dist[static_cast<size_t>(own)] / static_cast<double>(size[static_cast<size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || size[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, mean_dist[static_cast<size_t>(c)] / static_cast<double>(size[static_cast<size_t>(c)]));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

// Flat key/value rendering of whichever metrics a command produced, in a
// fixed column order, as a one-line JSON object and a two-line TSV table.
struct MetricsRow {
  std::vector<std::pair<std::string, double>> values;

  void add(const std::string& name, double v) { values.emplace_back(name, v); }

  std::string json_line() const {
    std::string out = "{";
    for (size_t i = 0; i < values.size(); ++i) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.10g", values[i].second);
      out += "\"" + values[i].first + "\": " + buf;
      if (i + 1 < values.size()) out += ", ";
    }
    return out + "}";
  }

  std::string tsv() const {
    std::string head, row;
    for (size_t i = 0; i < values.size(); ++i) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.10g", values[i].second);
      head += values[i].first;
      row += buf;
      if (i + 1 < values.size()) {
        head += '\t';
        row += '\t';
      }
    }
    return head + "\n" + row + "\n";
  }
};

}  // namespace mn
