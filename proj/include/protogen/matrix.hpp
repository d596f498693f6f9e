#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace protogen {

// Row-major dense matrix. Everything runs in 64-bit floats: gradient
// checking at 1e-4 relative error is not reachable in single precision.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  size_t size() const { return data.size(); }

  std::string shape_str() const;

  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> values);
  static Matrix row_vector(const std::vector<double>& v);
  std::vector<double> row_as_vector(int r) const;
};

// Dense kernels. Loops are OpenMP-parallel above a size cutoff; every output
// entry is produced by exactly one thread with a fixed-order inner loop, so
// results are bit-identical at any thread count.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);

// Row-wise softmax, stabilized by per-row max subtraction.
Matrix softmax_rows(const Matrix& m);

// gamma * (v - mean) / sqrt(pop_variance + eps) + beta, elementwise.
// Population variance; a constant row comes out as beta.
std::vector<double> layer_norm(const std::vector<double>& v,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps);

// Row-wise layer norm. gamma and beta have length x.cols.
Matrix layer_norm_rows(const Matrix& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps);

// Column means as a 1 x cols matrix.
Matrix mean_rows(const Matrix& m);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double euclidean_distance(const double* a, const double* b, int n);
double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace protogen
