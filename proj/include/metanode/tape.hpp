#pragma once

// Reverse-mode automatic differentiation over dense matrices. A Tape records
// primitive operations in execution order; backward() walks the record in
// exact reverse order and accumulates gradients into the leaves. One tape
// serves one forward/backward round and is then discarded.
//
// Gradient correctness for every primitive is enforced against central
// finite differences in the test suite; see also grad_check() in params.hpp.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/matrix.hpp"

namespace mn {

enum class SegMode { Sum, Mean, Max };

// Stable pieces used by the loss composition. log_sigmoid is never computed
// as log(logistic(x)); it is -softplus(-x) throughout.
inline double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::fabs(t)));
}
inline double log_sigmoid_scalar(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::fabs(x))); }
inline double logistic_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class Tape {
 public:
  using Id = std::int32_t;

  enum class Op {
    Leaf,
    Constant,
    Matmul,
    Add,
    AddRowBroadcast,
    Scale,
    ConcatCols,
    ConcatRows,
    Tanh,
    Logistic,
    LogSigmoid,
    MeanAll,
    RowGather,
    RowScatter,
    SegmentReduce,
    BatchNorm,
    Transpose,
  };

  Id leaf(Matrix v) { return push(Op::Leaf, {}, std::move(v), /*needs_grad=*/true); }
  Id constant(Matrix v) { return push(Op::Constant, {}, std::move(v), /*needs_grad=*/false); }

  Id matmul(Id a, Id b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    return push(Op::Matmul, {a, b}, mn::matmul(A, B));
  }

  Id add(Id a, Id b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (!A.same_shape(B)) throw ConfigError("add: shape mismatch " + shape_str(A) + " + " + shape_str(B));
    Matrix out = A;
    add_inplace(out, B);
    return push(Op::Add, {a, b}, std::move(out));
  }

  // A (n x c) plus row vector b (1 x c) added to every row.
  Id add_row_broadcast(Id a, Id b) {
    const Matrix& A = value(a);
    const Matrix& B = value(b);
    if (B.rows != 1 || B.cols != A.cols)
      throw ConfigError("add_row_broadcast: expected (1x" + std::to_string(A.cols) + "), got " + shape_str(B));
    Matrix out = A;
    for (i64 i = 0; i < out.rows; ++i) {
      double* r = out.row(i);
      for (i64 j = 0; j < out.cols; ++j) r[j] += B.data[static_cast<size_t>(j)];
    }
    return push(Op::AddRowBroadcast, {a, b}, std::move(out));
  }

  Id scale(Id a, double c) {
    Matrix out = value(a);
    for (double& v : out.data) v *= c;
    Id id = push(Op::Scale, {a}, std::move(out));
    nodes_[static_cast<size_t>(id)].scalar = c;
    return id;
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw ConfigError("concat_cols: empty input list");
    const i64 rows = value(parts[0]).rows;
    i64 cols = 0;
    for (Id p : parts) {
      if (value(p).rows != rows) throw ConfigError("concat_cols: row count mismatch");
      cols += value(p).cols;
    }
    Matrix out(rows, cols);
    i64 at = 0;
    for (Id p : parts) {
      const Matrix& m = value(p);
      for (i64 i = 0; i < rows; ++i)
        std::copy(m.row(i), m.row(i) + m.cols, out.row(i) + at);
      at += m.cols;
    }
    return push(Op::ConcatCols, parts, std::move(out));
  }

  Id concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: empty input list");
    const i64 cols = value(parts[0]).cols;
    i64 rows = 0;
    for (Id p : parts) {
      if (value(p).cols != cols) throw ConfigError("concat_rows: column count mismatch");
      rows += value(p).rows;
    }
    Matrix out(rows, cols);
    i64 at = 0;
    for (Id p : parts) {
      const Matrix& m = value(p);
      std::copy(m.data.begin(), m.data.end(), out.data.begin() + static_cast<size_t>(at * cols));
      at += m.rows;
    }
    return push(Op::ConcatRows, parts, std::move(out));
  }

  Id tanh(Id a) {
    Matrix out = value(a);
    for (double& v : out.data) v = std::tanh(v);
    return push(Op::Tanh, {a}, std::move(out));
  }

  Id logistic(Id a) {
    Matrix out = value(a);
    for (double& v : out.data) v = logistic_scalar(v);
    return push(Op::Logistic, {a}, std::move(out));
  }

  Id log_sigmoid(Id a) {
    const Matrix& A = value(a);
    Matrix out(A.rows, A.cols);
    Matrix sig_neg(A.rows, A.cols);  // d/dx log sigmoid(x) = sigmoid(-x)
    for (size_t i = 0; i < A.data.size(); ++i) {
      out.data[i] = log_sigmoid_scalar(A.data[i]);
      sig_neg.data[i] = logistic_scalar(-A.data[i]);
    }
    Id id = push(Op::LogSigmoid, {a}, std::move(out));
    nodes_[static_cast<size_t>(id)].saved_a = std::move(sig_neg);
    return id;
  }

  Id mean_all(Id a) {
    const Matrix& A = value(a);
    if (A.size() == 0) throw ConfigError("mean_all: empty matrix");
    double s = 0.0;
    for (double v : A.data) s += v;
    Matrix out(1, 1);
    out(0, 0) = s / static_cast<double>(A.size());
    return push(Op::MeanAll, {a}, std::move(out));
  }

  Id row_gather(Id a, std::vector<i64> idx) {
    const Matrix& A = value(a);
    Matrix out(static_cast<i64>(idx.size()), A.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= A.rows) throw ConfigError("row_gather: index out of range");
      std::copy(A.row(idx[i]), A.row(idx[i]) + A.cols, out.row(static_cast<i64>(i)));
    }
    Id id = push(Op::RowGather, {a}, std::move(out));
    nodes_[static_cast<size_t>(id)].indices = std::move(idx);
    return id;
  }

  // Inverse of row_gather for disjoint destinations: row i of `a` lands at
  // row dst[i] of a num_rows-tall zero matrix.
  Id row_scatter(Id a, std::vector<i64> dst, i64 num_rows) {
    const Matrix& A = value(a);
    if (static_cast<i64>(dst.size()) != A.rows) throw ConfigError("row_scatter: one destination per row required");
    Matrix out(num_rows, A.cols);
    std::vector<bool> used(static_cast<size_t>(num_rows), false);
    for (size_t i = 0; i < dst.size(); ++i) {
      if (dst[i] < 0 || dst[i] >= num_rows) throw ConfigError("row_scatter: destination out of range");
      if (used[static_cast<size_t>(dst[i])]) throw ConfigError("row_scatter: duplicate destination row");
      used[static_cast<size_t>(dst[i])] = true;
      std::copy(A.row(static_cast<i64>(i)), A.row(static_cast<i64>(i)) + A.cols, out.row(dst[i]));
    }
    Id id = push(Op::RowScatter, {a}, std::move(out));
    nodes_[static_cast<size_t>(id)].indices = std::move(dst);
    return id;
  }

  // groups must be disjoint row-index lists into `a`. Mean and max reject
  // empty groups; sum of an empty group is a zero row. Max breaks ties
  // toward the lowest row index, and routes its gradient the same way.
  Id segment_reduce(Id a, std::shared_ptr<const std::vector<std::vector<i64>>> groups, SegMode mode) {
    const Matrix& A = value(a);
    const auto& G = *groups;
    Matrix out(static_cast<i64>(G.size()), A.cols);
    std::vector<i64> winners;
    if (mode == SegMode::Max) winners.assign(G.size() * static_cast<size_t>(A.cols), -1);
    for (size_t g = 0; g < G.size(); ++g) {
      const auto& grp = G[g];
      if (grp.empty() && mode != SegMode::Sum)
        throw ConfigError("segment_reduce: empty segment with mean/max mode");
      for (i64 r : grp)
        if (r < 0 || r >= A.rows) throw ConfigError("segment_reduce: row index out of range");
      double* o = out.row(static_cast<i64>(g));
      if (mode == SegMode::Max) {
        for (i64 j = 0; j < A.cols; ++j) {
          i64 win = grp[0];
          double best = A(grp[0], j);
          for (size_t k = 1; k < grp.size(); ++k) {
            const double v = A(grp[k], j);
            if (v > best) {
              best = v;
              win = grp[k];
            }
          }
          o[j] = best;
          winners[g * static_cast<size_t>(A.cols) + static_cast<size_t>(j)] = win;
        }
      } else {
        for (i64 r : grp) {
          const double* src = A.row(r);
          for (i64 j = 0; j < A.cols; ++j) o[j] += src[j];
        }
        if (mode == SegMode::Mean) {
          const double inv = 1.0 / static_cast<double>(grp.size());
          for (i64 j = 0; j < A.cols; ++j) o[j] *= inv;
        }
      }
    }
    Id id = push(Op::SegmentReduce, {a}, std::move(out));
    Node& n = nodes_[static_cast<size_t>(id)];
    n.groups = std::move(groups);
    n.seg_mode = mode;
    n.indices = std::move(winners);
    return id;
  }

  // Full-batch normalization of each column (biased variance, no running
  // statistics), then per-column affine with gamma/beta given as 1 x cols.
  Id batch_norm(Id x, Id gamma, Id beta, double eps = 1e-5) {
    const Matrix& X = value(x);
    const Matrix& Ga = value(gamma);
    const Matrix& Be = value(beta);
    if (Ga.rows != 1 || Ga.cols != X.cols || Be.rows != 1 || Be.cols != X.cols)
      throw ConfigError("batch_norm: gamma/beta must be (1x" + std::to_string(X.cols) + ")");
    if (X.rows == 0) throw ConfigError("batch_norm: empty batch");
    Matrix xhat(X.rows, X.cols);
    Matrix inv_std(1, X.cols);
    const double inv_n = 1.0 / static_cast<double>(X.rows);
    for (i64 j = 0; j < X.cols; ++j) {
      double mu = 0.0;
      for (i64 i = 0; i < X.rows; ++i) mu += X(i, j);
      mu *= inv_n;
      double var = 0.0;
      for (i64 i = 0; i < X.rows; ++i) {
        const double d = X(i, j) - mu;
        var += d * d;
      }
      var *= inv_n;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std(0, j) = is;
      for (i64 i = 0; i < X.rows; ++i) xhat(i, j) = (X(i, j) - mu) * is;
    }
    Matrix out(X.rows, X.cols);
    for (i64 i = 0; i < X.rows; ++i)
      for (i64 j = 0; j < X.cols; ++j) out(i, j) = Ga.data[static_cast<size_t>(j)] * xhat(i, j) + Be.data[static_cast<size_t>(j)];
    Id id = push(Op::BatchNorm, {x, gamma, beta}, std::move(out));
    Node& n = nodes_[static_cast<size_t>(id)];
    n.saved_a = std::move(xhat);
    n.saved_b = std::move(inv_std);
    n.scalar = eps;
    return id;
  }

  Id transpose(Id a) { return push(Op::Transpose, {a}, transposed(value(a))); }

  const Matrix& value(Id id) const { return nodes_.at(static_cast<size_t>(id)).value; }

  // Zero matrix if the node never received a gradient.
  Matrix grad(Id id) const {
    const Node& n = nodes_.at(static_cast<size_t>(id));
    if (n.grad.size() == 0) return Matrix(n.value.rows, n.value.cols);
    return n.grad;
  }

  bool needs_grad(Id id) const { return nodes_.at(static_cast<size_t>(id)).needs_grad; }
  size_t size() const { return nodes_.size(); }

  // Test hook: multiplies the named op's input-gradient contribution by 1.5,
  // deliberately corrupting the backward rule so checkers can prove they
  // would catch a real defect.
  void set_backward_fault(const std::string& op_name) { fault_op_ = op_from_name(op_name); }

  void backward(Id loss) {
    Node& ln = nodes_.at(static_cast<size_t>(loss));
    if (ln.value.rows != 1 || ln.value.cols != 1)
      throw ConfigError("backward: loss must be scalar, got " + shape_str(ln.value));
    if (!ln.needs_grad) return;
    ensure_grad(loss)(0, 0) = 1.0;
    for (Id id = loss; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      step_backward(id, n);
    }
  }

 private:
  struct Node {
    Op op;
    std::vector<Id> inputs;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    double scalar = 0.0;
    std::vector<i64> indices;  // RowGather/RowScatter targets; SegmentReduce(Max) winners
    std::shared_ptr<const std::vector<std::vector<i64>>> groups;
    SegMode seg_mode = SegMode::Sum;
    Matrix saved_a;
    Matrix saved_b;
  };

  Id push(Op op, std::vector<Id> inputs, Matrix value, bool needs_grad_override = false) {
    Node n;
    n.op = op;
    n.needs_grad = needs_grad_override;
    for (Id in : inputs)
      if (nodes_.at(static_cast<size_t>(in)).needs_grad) n.needs_grad = true;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Matrix& ensure_grad(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
  }

  void accumulate(Id input, const Matrix& contribution, Op source_op) {
    Node& in = nodes_[static_cast<size_t>(input)];
    if (!in.needs_grad) return;
    Matrix& g = ensure_grad(input);
    const double f = (fault_op_ >= 0 && static_cast<Op>(fault_op_) == source_op) ? 1.5 : 1.0;
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += f * contribution.data[i];
  }

  void step_backward(Id id, Node& n) {
    const Matrix& gy = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        return;
      case Op::Matmul: {
        const Matrix& A = value(n.inputs[0]);
        const Matrix& B = value(n.inputs[1]);
        if (needs_grad(n.inputs[0])) accumulate(n.inputs[0], matmul_nt(gy, B), n.op);
        if (needs_grad(n.inputs[1])) accumulate(n.inputs[1], matmul_tn(A, gy), n.op);
        return;
      }
      case Op::Add:
        accumulate(n.inputs[0], gy, n.op);
        accumulate(n.inputs[1], gy, n.op);
        return;
      case Op::AddRowBroadcast: {
        accumulate(n.inputs[0], gy, n.op);
        if (needs_grad(n.inputs[1])) {
          Matrix gb(1, gy.cols);
          for (i64 i = 0; i < gy.rows; ++i)
            for (i64 j = 0; j < gy.cols; ++j) gb(0, j) += gy(i, j);
          accumulate(n.inputs[1], gb, n.op);
        }
        return;
      }
      case Op::Scale: {
        Matrix ga = gy;
        for (double& v : ga.data) v *= n.scalar;
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::ConcatCols: {
        i64 at = 0;
        for (Id in : n.inputs) {
          const Matrix& m = value(in);
          if (needs_grad(in)) {
            Matrix gi(m.rows, m.cols);
            for (i64 i = 0; i < m.rows; ++i)
              std::copy(gy.row(i) + at, gy.row(i) + at + m.cols, gi.row(i));
            accumulate(in, gi, n.op);
          }
          at += m.cols;
        }
        return;
      }
      case Op::ConcatRows: {
        i64 at = 0;
        for (Id in : n.inputs) {
          const Matrix& m = value(in);
          if (needs_grad(in)) {
            Matrix gi(m.rows, m.cols);
            std::copy(gy.data.begin() + static_cast<size_t>(at * gy.cols),
                      gy.data.begin() + static_cast<size_t>((at + m.rows) * gy.cols), gi.data.begin());
            accumulate(in, gi, n.op);
          }
          at += m.rows;
        }
        return;
      }
      case Op::Tanh: {
        Matrix ga(gy.rows, gy.cols);
        for (size_t i = 0; i < gy.data.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] = gy.data[i] * (1.0 - y * y);
        }
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::Logistic: {
        Matrix ga(gy.rows, gy.cols);
        for (size_t i = 0; i < gy.data.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] = gy.data[i] * y * (1.0 - y);
        }
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::LogSigmoid: {
        Matrix ga(gy.rows, gy.cols);
        for (size_t i = 0; i < gy.data.size(); ++i) ga.data[i] = gy.data[i] * n.saved_a.data[i];
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::MeanAll: {
        const Matrix& A = value(n.inputs[0]);
        Matrix ga(A.rows, A.cols);
        const double g = gy(0, 0) / static_cast<double>(A.size());
        for (double& v : ga.data) v = g;
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::RowGather: {
        const Matrix& A = value(n.inputs[0]);
        Matrix ga(A.rows, A.cols);
        for (size_t i = 0; i < n.indices.size(); ++i) {
          double* dst = ga.row(n.indices[i]);
          const double* src = gy.row(static_cast<i64>(i));
          for (i64 j = 0; j < A.cols; ++j) dst[j] += src[j];
        }
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::RowScatter: {
        const Matrix& A = value(n.inputs[0]);
        Matrix ga(A.rows, A.cols);
        for (size_t i = 0; i < n.indices.size(); ++i)
          std::copy(gy.row(n.indices[i]), gy.row(n.indices[i]) + A.cols, ga.row(static_cast<i64>(i)));
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::SegmentReduce: {
        const Matrix& A = value(n.inputs[0]);
        Matrix ga(A.rows, A.cols);
        const auto& G = *n.groups;
        if (n.seg_mode == SegMode::Max) {
          for (size_t g = 0; g < G.size(); ++g)
            for (i64 j = 0; j < A.cols; ++j) {
              const i64 win = n.indices[g * static_cast<size_t>(A.cols) + static_cast<size_t>(j)];
              ga(win, j) += gy(static_cast<i64>(g), j);
            }
        } else {
          for (size_t g = 0; g < G.size(); ++g) {
            const double w = (n.seg_mode == SegMode::Mean) ? 1.0 / static_cast<double>(G[g].size()) : 1.0;
            const double* gr = gy.row(static_cast<i64>(g));
            for (i64 r : G[g]) {
              double* dst = ga.row(r);
              for (i64 j = 0; j < A.cols; ++j) dst[j] += w * gr[j];
            }
          }
        }
        accumulate(n.inputs[0], ga, n.op);
        return;
      }
      case Op::BatchNorm: {
        const Matrix& xhat = n.saved_a;
        const Matrix& inv_std = n.saved_b;
        const Matrix& Ga = value(n.inputs[1]);
        const i64 rows = xhat.rows, cols = xhat.cols;
        if (needs_grad(n.inputs[2])) {
          Matrix gbeta(1, cols);
          for (i64 i = 0; i < rows; ++i)
            for (i64 j = 0; j < cols; ++j) gbeta(0, j) += gy(i, j);
          accumulate(n.inputs[2], gbeta, n.op);
        }
        if (needs_grad(n.inputs[1])) {
          Matrix ggamma(1, cols);
          for (i64 i = 0; i < rows; ++i)
            for (i64 j = 0; j < cols; ++j) ggamma(0, j) += gy(i, j) * xhat(i, j);
          accumulate(n.inputs[1], ggamma, n.op);
        }
        if (needs_grad(n.inputs[0])) {
          Matrix gx(rows, cols);
          const double inv_n = 1.0 / static_cast<double>(rows);
          for (i64 j = 0; j < cols; ++j) {
            double sum_d = 0.0, sum_dx = 0.0;
            const double gj = Ga.data[static_cast<size_t>(j)];
            for (i64 i = 0; i < rows; ++i) {
              const double d = gy(i, j) * gj;
              sum_d += d;
              sum_dx += d * xhat(i, j);
            }
            const double mean_d = sum_d * inv_n;
            const double mean_dx = sum_dx * inv_n;
            for (i64 i = 0; i < rows; ++i) {
              const double d = gy(i, j) * gj;
              gx(i, j) = inv_std(0, j) * (d - mean_d - xhat(i, j) * mean_dx);
            }
          }
          accumulate(n.inputs[0], gx, n.op);
        }
        return;
      }
      case Op::Transpose:
        accumulate(n.inputs[0], transposed(gy), n.op);
        return;
    }
    (void)id;
  }

  static int op_from_name(const std::string& name) {
    if (name == "matmul") return static_cast<int>(Op::Matmul);
    if (name == "add") return static_cast<int>(Op::Add);
    if (name == "add_row_broadcast") return static_cast<int>(Op::AddRowBroadcast);
    if (name == "scale") return static_cast<int>(Op::Scale);
    if (name == "concat_cols") return static_cast<int>(Op::ConcatCols);
    if (name == "concat_rows") return static_cast<int>(Op::ConcatRows);
    if (name == "tanh") return static_cast<int>(Op::Tanh);
    if (name == "logistic") return static_cast<int>(Op::Logistic);
    if (name == "log_sigmoid") return static_cast<int>(Op::LogSigmoid);
    if (name == "mean_all") return static_cast<int>(Op::MeanAll);
    if (name == "row_gather") return static_cast<int>(Op::RowGather);
    if (name == "row_scatter") return static_cast<int>(Op::RowScatter);
    if (name == "segment_reduce") return static_cast<int>(Op::SegmentReduce);
    if (name == "batch_norm") return static_cast<int>(Op::BatchNorm);
    if (name == "transpose") return static_cast<int>(Op::Transpose);
    throw ConfigError("unknown op name '" + name + "'");
  }

  std::vector<Node> nodes_;
  int fault_op_ = -1;
};

}  // namespace mn
