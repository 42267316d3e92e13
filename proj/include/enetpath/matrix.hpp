#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace enetpath {

/// Per-observation weights: finite, nonnegative, at least one positive.
class Weights {
 public:
  explicit Weights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw std::invalid_argument("weights: empty");
    bool any_pos = false;
    for (double v : w_) {
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("weights: entries must be finite and nonnegative");
      if (v > 0.0) any_pos = true;
    }
    if (!any_pos) throw std::invalid_argument("weights: all zero");
  }

  static Weights uniform(std::size_t n) { return Weights(std::vector<double>(n, 1.0)); }

  const std::vector<double>& values() const { return w_; }
  double operator[](std::size_t i) const { return w_[i]; }
  std::size_t size() const { return w_.size(); }
  double sum() const {
    double s = 0.0;
    for (double v : w_) s += v;
    return s;
  }

  /// Copy rescaled so the weights sum to `target`.
  Weights rescaled_to(double target) const {
    std::vector<double> out(w_);
    const double f = target / sum();
    for (double& v : out) v *= f;
    return Weights(std::move(out));
  }

 private:
  std::vector<double> w_;
};

/**
 * Design matrix with either dense column-major storage or
 * compressed-sparse-column storage. Immutable after construction.
 *
 * All column kernels visit entries in ascending row order and skip exact
 * zeros, so a CSC matrix and its densified copy run through identical
 * floating-point operations.
 */
class FeatureMatrix {
 public:
  static FeatureMatrix dense(int n_rows, int n_cols, std::vector<double> values) {
    if (n_rows < 0 || n_cols < 0)
      throw std::invalid_argument("FeatureMatrix: negative dimension");
    if (values.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols))
      throw std::invalid_argument("FeatureMatrix: dense value count does not match n_rows*n_cols");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("FeatureMatrix: nonfinite value");
    FeatureMatrix m;
    m.n_ = n_rows;
    m.p_ = n_cols;
    m.sparse_ = false;
    m.dense_ = std::move(values);
    return m;
  }

  static FeatureMatrix sparse(int n_rows, int n_cols, std::vector<int> col_ptr,
                              std::vector<int> row_idx, std::vector<double> values) {
    if (n_rows < 0 || n_cols < 0)
      throw std::invalid_argument("FeatureMatrix: negative dimension");
    if (col_ptr.size() != static_cast<std::size_t>(n_cols) + 1)
      throw std::invalid_argument("FeatureMatrix: col_ptr must have n_cols+1 entries");
    if (col_ptr.front() != 0)
      throw std::invalid_argument("FeatureMatrix: col_ptr[0] must be 0");
    for (int j = 0; j < n_cols; ++j) {
      if (col_ptr[j + 1] < col_ptr[j])
        throw std::invalid_argument("FeatureMatrix: col_ptr not nondecreasing at column " +
                                    std::to_string(j));
    }
    if (col_ptr.back() != static_cast<int>(row_idx.size()) ||
        row_idx.size() != values.size())
      throw std::invalid_argument("FeatureMatrix: final col_ptr must equal nonzero count");
    for (int j = 0; j < n_cols; ++j) {
      for (int k = col_ptr[j]; k < col_ptr[j + 1]; ++k) {
        if (row_idx[k] < 0 || row_idx[k] >= n_rows)
          throw std::invalid_argument("FeatureMatrix: row index out of range in column " +
                                      std::to_string(j));
        if (k > col_ptr[j] && row_idx[k] <= row_idx[k - 1])
          throw std::invalid_argument(
              "FeatureMatrix: row indices must be strictly increasing in column " +
              std::to_string(j));
      }
    }
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("FeatureMatrix: nonfinite value");
    FeatureMatrix m;
    m.n_ = n_rows;
    m.p_ = n_cols;
    m.sparse_ = true;
    m.col_ptr_ = std::move(col_ptr);
    m.row_idx_ = std::move(row_idx);
    m.values_ = std::move(values);
    return m;
  }

  int rows() const { return n_; }
  int cols() const { return p_; }
  bool is_sparse() const { return sparse_; }

  double at(int i, int j) const {
    check_col(j);
    if (i < 0 || i >= n_) throw std::out_of_range("FeatureMatrix: row index");
    if (!sparse_) return dense_[static_cast<std::size_t>(j) * n_ + i];
    for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k)
      if (row_idx_[k] == i) return values_[k];
    return 0.0;
  }

  /// Visit nonzero entries of column j as f(row, value), rows ascending.
  template <class F>
  void for_col(int j, F&& f) const {
    check_col(j);
    if (sparse_) {
      for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) f(row_idx_[k], values_[k]);
    } else {
      const double* col = dense_.data() + static_cast<std::size_t>(j) * n_;
      for (int i = 0; i < n_; ++i) {
        if (col[i] != 0.0) f(i, col[i]);
      }
    }
  }

  int col_nnz(int j) const {
    check_col(j);
    if (sparse_) return col_ptr_[j + 1] - col_ptr_[j];
    int c = 0;
    for_col(j, [&](int, double) { ++c; });
    return c;
  }

  /// New matrix holding the given columns (same storage kind).
  FeatureMatrix select_columns(const std::vector<int>& idx) const {
    for (int j : idx) check_col(j);
    if (!sparse_) {
      std::vector<double> vals;
      vals.reserve(static_cast<std::size_t>(n_) * idx.size());
      for (int j : idx) {
        const double* col = dense_.data() + static_cast<std::size_t>(j) * n_;
        vals.insert(vals.end(), col, col + n_);
      }
      return dense(n_, static_cast<int>(idx.size()), std::move(vals));
    }
    std::vector<int> cp{0};
    std::vector<int> ri;
    std::vector<double> vv;
    for (int j : idx) {
      for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
        ri.push_back(row_idx_[k]);
        vv.push_back(values_[k]);
      }
      cp.push_back(static_cast<int>(ri.size()));
    }
    return sparse(n_, static_cast<int>(idx.size()), std::move(cp), std::move(ri), std::move(vv));
  }

 private:
  void check_col(int j) const {
    if (j < 0 || j >= p_) throw std::out_of_range("FeatureMatrix: column index");
  }

  int n_ = 0;
  int p_ = 0;
  bool sparse_ = false;
  std::vector<double> dense_;   // column-major, n_ * p_
  std::vector<int> col_ptr_;    // p_ + 1
  std::vector<int> row_idx_;
  std::vector<double> values_;
};

/**
 * Weighted per-column moments with the population (1/n) convention:
 * means_j = sum_i wbar_i x_ij, scales_j = sqrt(sum_i wbar_i (x_ij - means_j)^2)
 * with wbar = w / sum(w). Constant columns get scale exactly 0 and are
 * flagged so solvers can skip them under standardization.
 */
struct ColumnStats {
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<char> zero_variance;
};

inline ColumnStats column_stats(const FeatureMatrix& X, const Weights& w) {
  const int n = X.rows(), p = X.cols();
  if (n == 0 || p == 0) throw std::invalid_argument("column_stats: empty matrix");
  if (w.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("column_stats: weight length mismatch");
  const double wsum = w.sum();
  std::vector<double> wbar(n);
  for (int i = 0; i < n; ++i) wbar[i] = w[i] / wsum;

  ColumnStats st;
  st.means.resize(p);
  st.scales.resize(p);
  st.zero_variance.assign(p, 0);
  for (int j = 0; j < p; ++j) {
    double m = 0.0, msq = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    int seen = 0;
    X.for_col(j, [&](int i, double x) {
      m += wbar[i] * x;
      msq += wbar[i] * x * x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ++seen;
    });
    if (seen < n) {  // skipped entries are exact zeros
      lo = std::min(lo, 0.0);
      hi = std::max(hi, 0.0);
    }
    st.means[j] = m;
    const bool constant = (lo == hi);
    double var = msq - 2.0 * st.means[j] * m + st.means[j] * st.means[j];
    if (constant || var < 0.0) var = 0.0;
    st.scales[j] = std::sqrt(var);
    st.zero_variance[j] = constant ? 1 : 0;
  }
  return st;
}

/**
 * sum_i w_i (x_ij - c_j) v_i with c_j the weighted column mean when
 * `centered`, else 0. Sparse columns use the algebraic form
 * sum_nz w_i x_ij v_i - c_j sum_i w_i v_i; no densification.
 */
inline double weighted_dot(const FeatureMatrix& X, int j, const std::vector<double>& v,
                           const Weights& w, bool centered) {
  const int n = X.rows();
  if (j < 0 || j >= X.cols()) throw std::out_of_range("weighted_dot: column index");
  if (v.size() != static_cast<std::size_t>(n) || w.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("weighted_dot: vector length mismatch");
  double acc = 0.0;
  X.for_col(j, [&](int i, double x) { acc += w[i] * x * v[i]; });
  if (!centered) return acc;
  const double wsum = w.sum();
  double mean = 0.0;
  X.for_col(j, [&](int i, double x) { mean += (w[i] / wsum) * x; });
  double wv = 0.0;
  for (int i = 0; i < n; ++i) wv += w[i] * v[i];
  return acc - mean * wv;
}

/// eta_i = intercept + x_i^T beta, accumulated column-wise.
inline std::vector<double> predict_linear(const FeatureMatrix& X,
                                          const std::vector<double>& beta, double intercept) {
  if (beta.size() != static_cast<std::size_t>(X.cols()))
    throw std::invalid_argument("predict_linear: coefficient length mismatch");
  std::vector<double> eta(X.rows(), intercept);
  for (int j = 0; j < X.cols(); ++j) {
    const double b = beta[j];
    if (b == 0.0) continue;
    X.for_col(j, [&](int i, double x) { eta[i] += x * b; });
  }
  return eta;
}

}  // namespace enetpath
