#pragma once

// Dense row-major matrix of doubles plus the handful of kernels the tape
// needs. The matmul loop order (i, k, j) keeps the accumulation order of
// every output element fixed, so results are bit-reproducible run to run.

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "metanode/common.hpp"
#include "metanode/rng.hpp"

namespace mn {

struct Matrix {
  i64 rows = 0;
  i64 cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(i64 r, i64 c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {}
  Matrix(i64 r, i64 c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != static_cast<size_t>(r * c))
      throw ConfigError("Matrix: value count does not match shape");
  }

  double& operator()(i64 i, i64 j) { return data[static_cast<size_t>(i * cols + j)]; }
  double operator()(i64 i, i64 j) const { return data[static_cast<size_t>(i * cols + j)]; }

  double* row(i64 i) { return data.data() + static_cast<size_t>(i * cols); }
  const double* row(i64 i) const { return data.data() + static_cast<size_t>(i * cols); }

  i64 size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix zeros(i64 r, i64 c) { return Matrix(r, c); }

  static Matrix full(i64 r, i64 c, double v) {
    Matrix m(r, c);
    std::fill(m.data.begin(), m.data.end(), v);
    return m;
  }

  static Matrix glorot_uniform(i64 fan_out, i64 fan_in, Rng& rng) {
    Matrix m(fan_out, fan_in);
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data) v = (2.0 * rng.unit() - 1.0) * limit;
    return m;
  }

  static Matrix random_uniform(i64 r, i64 c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data) v = lo + (hi - lo) * rng.unit();
    return m;
  }
};

inline std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ConfigError("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
  Matrix c(a.rows, b.cols);
  const i64 n = a.rows, k = a.cols, m = b.cols;
  for (i64 i = 0; i < n; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (i64 p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.row(p);
      for (i64 j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

// C = A * B^T (used by backward passes to avoid materialized transposes)
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw ConfigError("matmul_nt: shape mismatch " + shape_str(a) + " * " + shape_str(b) + "^T");
  Matrix c(a.rows, b.rows);
  const i64 n = a.rows, k = a.cols, m = b.rows;
  for (i64 i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (i64 j = 0; j < m; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (i64 p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
  return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw ConfigError("matmul_tn: shape mismatch " + shape_str(a) + "^T * " + shape_str(b));
  Matrix c(a.cols, b.cols);
  const i64 n = a.cols, k = a.rows, m = b.cols;
  for (i64 p = 0; p < k; ++p) {
    const double* ap = a.row(p);
    const double* bp = b.row(p);
    for (i64 i = 0; i < n; ++i) {
      const double api = ap[i];
      double* ci = c.row(i);
      for (i64 j = 0; j < m; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

inline Matrix transposed(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (i64 i = 0; i < a.rows; ++i)
    for (i64 j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw ConfigError("add: shape mismatch " + shape_str(a) + " + " + shape_str(b));
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw ConfigError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace mn
