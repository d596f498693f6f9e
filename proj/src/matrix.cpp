#include "protogen/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace protogen {

namespace {
// Below this many output elements the OpenMP fork costs more than the loop.
constexpr int kParallelCutoff = 16 * 1024;
}  // namespace

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> values) {
  int r = static_cast<int>(values.size());
  int c = r == 0 ? 0 : static_cast<int>(values.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : values) {
    if (static_cast<int>(row.size()) != c)
      throw std::invalid_argument("from_rows: ragged initializer");
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.data = v;
  return m;
}

std::vector<double> Matrix::row_as_vector(int r) const {
  return std::vector<double>(row_ptr(r), row_ptr(r) + cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions differ, got " + a.shape_str() +
                                " and " + b.shape_str());
  Matrix out(a.rows, b.cols);
  const int n = a.rows, m = b.cols, k = a.cols;
#pragma omp parallel for schedule(static) if (static_cast<long>(n) * m * k >= kParallelCutoff)
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("add: shapes differ, got " + a.shape_str() + " and " +
                                b.shape_str());
  Matrix out(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("sub: shapes differ, got " + a.shape_str() + " and " +
                                b.shape_str());
  Matrix out(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * factor;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("hadamard: shapes differ, got " + a.shape_str() + " and " +
                                b.shape_str());
  Matrix out(a.rows, a.cols);
  for (size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("softmax_rows: empty matrix");
  Matrix out(m.rows, m.cols);
#pragma omp parallel for schedule(static) if (static_cast<long>(m.rows) * m.cols >= kParallelCutoff)
  for (int i = 0; i < m.rows; ++i) {
    const double* in = m.row_ptr(i);
    double* o = out.row_ptr(i);
    double mx = in[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < m.cols; ++j) o[j] /= sum;
  }
  return out;
}

std::vector<double> layer_norm(const std::vector<double>& v, const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps) {
  if (v.size() != gamma.size() || v.size() != beta.size())
    throw std::invalid_argument("layer_norm: vector dimensions differ");
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be > 0");
  const int n = static_cast<int>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  const double rstd = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(v.size());
  for (int j = 0; j < n; ++j) out[j] = gamma[j] * (v[j] - mean) * rstd + beta[j];
  return out;
}

Matrix layer_norm_rows(const Matrix& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps) {
  if (static_cast<int>(gamma.size()) != x.cols || static_cast<int>(beta.size()) != x.cols)
    throw std::invalid_argument("layer_norm_rows: affine dimension " +
                                std::to_string(gamma.size()) + " does not match " +
                                x.shape_str());
  if (eps <= 0.0) throw std::invalid_argument("layer_norm_rows: eps must be > 0");
  Matrix out(x.rows, x.cols);
  const int n = x.cols;
#pragma omp parallel for schedule(static) if (static_cast<long>(x.rows) * x.cols >= kParallelCutoff)
  for (int i = 0; i < x.rows; ++i) {
    const double* in = x.row_ptr(i);
    double* o = out.row_ptr(i);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += in[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) o[j] = gamma[j] * (in[j] - mean) * rstd + beta[j];
  }
  return out;
}

Matrix mean_rows(const Matrix& m) {
  if (m.rows == 0) throw std::invalid_argument("mean_rows: empty matrix");
  Matrix out(1, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const double* in = m.row_ptr(i);
    for (int j = 0; j < m.cols; ++j) out(0, j) += in[j];
  }
  for (int j = 0; j < m.cols; ++j) out(0, j) /= m.rows;
  return out;
}

bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("max_abs_diff: shapes differ, got " + a.shape_str() + " and " +
                                b.shape_str());
  double mx = 0.0;
  for (size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
  return mx;
}

double euclidean_distance(const double* a, const double* b, int n) {
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("euclidean_distance: dimensions differ");
  return euclidean_distance(a.data(), b.data(), static_cast<int>(a.size()));
}

}  // namespace protogen
