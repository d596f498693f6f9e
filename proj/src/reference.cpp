#include "protogen/reference.hpp"

#include <cmath>

namespace protogen::serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double sum = 0.0;
      for (int p = 0; p < a.cols; ++p) sum += a(i, p) * b(p, j);
      out(i, j) = sum;
    }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    double mx = m(i, 0);
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, m(i, j));
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      out(i, j) = std::exp(m(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < m.cols; ++j) out(i, j) /= sum;
  }
  return out;
}

Matrix layer_norm_rows(const Matrix& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps) {
  Matrix out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < x.cols; ++j) mean += x(i, j);
    mean /= x.cols;
    double var = 0.0;
    for (int j = 0; j < x.cols; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= x.cols;
    const double rstd = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < x.cols; ++j) out(i, j) = gamma[j] * (x(i, j) - mean) * rstd + beta[j];
  }
  return out;
}

Matrix generate_prototype(const GeneratorParams& params, const AttentionConfig& config,
                          const Matrix& support_stack) {
  const int k = support_stack.rows;
  const int dm = config.model_dim;
  const double logit_scale = 1.0 / std::sqrt(static_cast<double>(config.key_dim));

  // Per-head scaled dot-product attention, concatenated along columns.
  Matrix concat(k, config.value_dim * config.heads);
  for (int h = 0; h < config.heads; ++h) {
    const Matrix q = serial::matmul(support_stack, params.query_weight[h]);
    const Matrix kk = serial::matmul(support_stack, params.key_weight[h]);
    const Matrix v = serial::matmul(support_stack, params.value_weight[h]);

    Matrix logits(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        double dot = 0.0;
        for (int p = 0; p < config.key_dim; ++p) dot += q(i, p) * kk(j, p);
        logits(i, j) = dot * logit_scale;
      }
    const Matrix weights = serial::softmax_rows(logits);
    const Matrix z = serial::matmul(weights, v);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < config.value_dim; ++j) concat(i, h * config.value_dim + j) = z(i, j);
  }

  const Matrix attended = serial::matmul(concat, params.output_weight);
  Matrix pre_norm = serial::matmul(attended, params.fc_weight);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < dm; ++j) pre_norm(i, j) += support_stack(i, j);

  const Matrix refined =
      serial::layer_norm_rows(pre_norm, params.norm_scale.data, params.norm_shift.data, config.norm_eps);

  Matrix proto(1, dm);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < dm; ++j) proto(0, j) += refined(i, j);
  for (int j = 0; j < dm; ++j) proto(0, j) /= k;
  return proto;
}

}  // namespace protogen::serial
