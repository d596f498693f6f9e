#include "protogen/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace protogen {

Tape::VarId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<VarId>(nodes_.size()) - 1;
}

void Tape::check_id(VarId id) const {
  if (id < 0 || id >= static_cast<VarId>(nodes_.size()))
    throw std::logic_error("tape: unknown node id " + std::to_string(id));
}

Tape::VarId Tape::leaf(Matrix value) {
  return push({Op::kLeaf, {}, std::move(value), 0.0, {}});
}

Tape::VarId Tape::matmul(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  Matrix v = protogen::matmul(nodes_[a].value, nodes_[b].value);
  return push({Op::kMatmul, {a, b}, std::move(v), 0.0, {}});
}

Tape::VarId Tape::transpose(VarId a) {
  check_id(a);
  return push({Op::kTranspose, {a}, protogen::transpose(nodes_[a].value), 0.0, {}});
}

Tape::VarId Tape::add(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  return push({Op::kAdd, {a, b}, protogen::add(nodes_[a].value, nodes_[b].value), 0.0, {}});
}

Tape::VarId Tape::sub(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  return push({Op::kSub, {a, b}, protogen::sub(nodes_[a].value, nodes_[b].value), 0.0, {}});
}

Tape::VarId Tape::scale(VarId a, double factor) {
  check_id(a);
  return push({Op::kScale, {a}, protogen::scale(nodes_[a].value, factor), factor, {}});
}

Tape::VarId Tape::hadamard(VarId a, VarId b) {
  check_id(a);
  check_id(b);
  return push({Op::kHadamard, {a, b}, protogen::hadamard(nodes_[a].value, nodes_[b].value), 0.0, {}});
}

Tape::VarId Tape::softmax_rows(VarId a) {
  check_id(a);
  return push({Op::kSoftmaxRows, {a}, protogen::softmax_rows(nodes_[a].value), 0.0, {}});
}

Tape::VarId Tape::layer_norm_rows(VarId x, VarId gamma, VarId beta, double eps) {
  check_id(x);
  check_id(gamma);
  check_id(beta);
  const Matrix& gm = nodes_[gamma].value;
  const Matrix& bm = nodes_[beta].value;
  if (gm.rows != 1 || bm.rows != 1)
    throw std::invalid_argument("layer_norm_rows: gamma/beta must be row vectors, got " +
                                gm.shape_str() + " and " + bm.shape_str());
  Matrix v = protogen::layer_norm_rows(nodes_[x].value, gm.data, bm.data, eps);
  return push({Op::kLayerNormRows, {x, gamma, beta}, std::move(v), eps, {}});
}

Tape::VarId Tape::concat_cols(const std::vector<VarId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  int rows = -1, cols = 0;
  for (VarId p : parts) {
    check_id(p);
    const Matrix& m = nodes_[p].value;
    if (rows < 0) rows = m.rows;
    if (m.rows != rows)
      throw std::invalid_argument("concat_cols: row counts differ, got " +
                                  std::to_string(rows) + " and " + m.shape_str());
    cols += m.cols;
  }
  Matrix out(rows, cols);
  int offset = 0;
  for (VarId p : parts) {
    const Matrix& m = nodes_[p].value;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < m.cols; ++j) out(i, offset + j) = m(i, j);
    offset += m.cols;
  }
  return push({Op::kConcatCols, parts, std::move(out), 0.0, {}});
}

Tape::VarId Tape::mean_rows(VarId a) {
  check_id(a);
  return push({Op::kMeanRows, {a}, protogen::mean_rows(nodes_[a].value), 0.0, {}});
}

Tape::VarId Tape::dropout(VarId a, double rate, Rng& rng) {
  check_id(a);
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return a;
  const Matrix& x = nodes_[a].value;
  Matrix mask(x.rows, x.cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < mask.size(); ++i)
    mask.data[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Matrix v = protogen::hadamard(x, mask);
  return push({Op::kDropout, {a}, std::move(v), rate, std::move(mask)});
}

Tape::VarId Tape::sum_all(VarId a) {
  check_id(a);
  Matrix v(1, 1);
  for (double x : nodes_[a].value.data) v(0, 0) += x;
  return push({Op::kSumAll, {a}, std::move(v), 0.0, {}});
}

Tape::VarId Tape::euclidean_norm(VarId a) {
  check_id(a);
  double sum = 0.0;
  for (double x : nodes_[a].value.data) sum += x * x;
  Matrix v(1, 1);
  v(0, 0) = std::sqrt(sum);
  return push({Op::kEuclideanNorm, {a}, std::move(v), 0.0, {}});
}

const Matrix& Tape::value(VarId id) const {
  check_id(id);
  return nodes_[id].value;
}

const Matrix& Tape::grad(VarId id) const {
  if (!backward_done_) throw std::logic_error("tape: grad() before backward()");
  check_id(id);
  return grads_[id];
}

void Tape::backward(VarId loss, double seed) {
  if (nodes_.empty()) throw std::logic_error("tape: backward() before any forward op");
  check_id(loss);
  const Matrix& lv = nodes_[loss].value;
  if (lv.rows != 1 || lv.cols != 1)
    throw std::invalid_argument("tape: backward() needs a 1x1 loss node, got " + lv.shape_str());

  grads_.assign(nodes_.size(), Matrix());
  for (size_t i = 0; i < nodes_.size(); ++i)
    grads_[i] = Matrix(nodes_[i].value.rows, nodes_[i].value.cols);
  grads_[loss](0, 0) = seed;

  // Reverse order of recording: each record is visited exactly once.
  for (VarId id = static_cast<VarId>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Matrix& g = grads_[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        const Matrix& a = in_val(n, 0);
        const Matrix& b = in_val(n, 1);
        Matrix ga = protogen::matmul(g, protogen::transpose(b));
        Matrix gb = protogen::matmul(protogen::transpose(a), g);
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], ga);
        grads_[n.inputs[1]] = protogen::add(grads_[n.inputs[1]], gb);
        break;
      }
      case Op::kTranspose:
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], protogen::transpose(g));
        break;
      case Op::kAdd:
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], g);
        grads_[n.inputs[1]] = protogen::add(grads_[n.inputs[1]], g);
        break;
      case Op::kSub:
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], g);
        grads_[n.inputs[1]] = protogen::sub(grads_[n.inputs[1]], g);
        break;
      case Op::kScale:
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], protogen::scale(g, n.scalar));
        break;
      case Op::kHadamard: {
        const Matrix& a = in_val(n, 0);
        const Matrix& b = in_val(n, 1);
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], protogen::hadamard(g, b));
        grads_[n.inputs[1]] = protogen::add(grads_[n.inputs[1]], protogen::hadamard(g, a));
        break;
      }
      case Op::kSoftmaxRows: {
        const Matrix& y = n.value;
        Matrix ga(y.rows, y.cols);
        for (int i = 0; i < y.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols; ++j) dot += g(i, j) * y(i, j);
          for (int j = 0; j < y.cols; ++j) ga(i, j) = y(i, j) * (g(i, j) - dot);
        }
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], ga);
        break;
      }
      case Op::kLayerNormRows: {
        const Matrix& x = in_val(n, 0);
        const Matrix& gamma = in_val(n, 1);
        const double eps = n.scalar;
        const int cols = x.cols;
        Matrix gx(x.rows, x.cols);
        Matrix ggamma(1, cols);
        Matrix gbeta(1, cols);
        for (int i = 0; i < x.rows; ++i) {
          double mean = 0.0;
          for (int j = 0; j < cols; ++j) mean += x(i, j);
          mean /= cols;
          double var = 0.0;
          for (int j = 0; j < cols; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
          var /= cols;
          const double rstd = 1.0 / std::sqrt(var + eps);
          // q = dy * gamma; dx = rstd * (q - mean(q) - xhat * mean(q * xhat))
          double q_mean = 0.0, qx_mean = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double xhat = (x(i, j) - mean) * rstd;
            const double q = g(i, j) * gamma(0, j);
            q_mean += q;
            qx_mean += q * xhat;
            ggamma(0, j) += g(i, j) * xhat;
            gbeta(0, j) += g(i, j);
          }
          q_mean /= cols;
          qx_mean /= cols;
          for (int j = 0; j < cols; ++j) {
            const double xhat = (x(i, j) - mean) * rstd;
            const double q = g(i, j) * gamma(0, j);
            gx(i, j) = rstd * (q - q_mean - xhat * qx_mean);
          }
        }
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], gx);
        grads_[n.inputs[1]] = protogen::add(grads_[n.inputs[1]], ggamma);
        grads_[n.inputs[2]] = protogen::add(grads_[n.inputs[2]], gbeta);
        break;
      }
      case Op::kConcatCols: {
        int offset = 0;
        for (VarId p : n.inputs) {
          const Matrix& part = nodes_[p].value;
          Matrix gp(part.rows, part.cols);
          for (int i = 0; i < part.rows; ++i)
            for (int j = 0; j < part.cols; ++j) gp(i, j) = g(i, offset + j);
          grads_[p] = protogen::add(grads_[p], gp);
          offset += part.cols;
        }
        break;
      }
      case Op::kMeanRows: {
        const Matrix& a = in_val(n, 0);
        Matrix ga(a.rows, a.cols);
        for (int i = 0; i < a.rows; ++i)
          for (int j = 0; j < a.cols; ++j) ga(i, j) = g(0, j) / a.rows;
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], ga);
        break;
      }
      case Op::kDropout:
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], protogen::hadamard(g, n.aux));
        break;
      case Op::kSumAll: {
        const Matrix& a = in_val(n, 0);
        Matrix ga(a.rows, a.cols);
        for (size_t i = 0; i < ga.size(); ++i) ga.data[i] = g(0, 0);
        grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], ga);
        break;
      }
      case Op::kEuclideanNorm: {
        const Matrix& a = in_val(n, 0);
        const double norm = n.value(0, 0);
        // Subgradient 0 at the origin.
        if (norm > 0.0) {
          Matrix ga = protogen::scale(a, g(0, 0) / norm);
          grads_[n.inputs[0]] = protogen::add(grads_[n.inputs[0]], ga);
        }
        break;
      }
    }
  }
  backward_done_ = true;
}

}  // namespace protogen
