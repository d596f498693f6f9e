#pragma once

#include <vector>

#include "protogen/matrix.hpp"
#include "protogen/rng.hpp"

namespace protogen {

// Reverse-mode tape over Matrix values. Each operation appends a record with
// its inputs saved; backward() walks the records once, last to first, and
// accumulates gradients for every node. A tape is single-owner: one forward
// pass, one backward pass, never shared across threads.
class Tape {
 public:
  using VarId = int;

  VarId leaf(Matrix value);

  VarId matmul(VarId a, VarId b);
  VarId transpose(VarId a);
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId scale(VarId a, double factor);
  VarId hadamard(VarId a, VarId b);
  VarId softmax_rows(VarId a);
  // gamma and beta are 1 x cols nodes, broadcast over the rows of x.
  VarId layer_norm_rows(VarId x, VarId gamma, VarId beta, double eps);
  VarId concat_cols(const std::vector<VarId>& parts);
  VarId mean_rows(VarId a);
  // Inverted dropout: kept entries are scaled by 1/(1-rate) at record time,
  // so evaluation needs no rescaling. rate == 0 is the identity.
  VarId dropout(VarId a, double rate, Rng& rng);
  VarId sum_all(VarId a);
  VarId euclidean_norm(VarId a);

  const Matrix& value(VarId id) const;

  // Backpropagates from a 1x1 loss node, seeding dL/dloss = seed.
  void backward(VarId loss, double seed = 1.0);

  // Gradient of the loss w.r.t. any recorded node. Usage error before backward().
  const Matrix& grad(VarId id) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool backward_done() const { return backward_done_; }

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kSub,
    kScale,
    kHadamard,
    kSoftmaxRows,
    kLayerNormRows,
    kConcatCols,
    kMeanRows,
    kDropout,
    kSumAll,
    kEuclideanNorm,
  };

  struct Node {
    Op op;
    std::vector<VarId> inputs;
    Matrix value;
    double scalar = 0.0;  // scale factor or layer-norm eps
    Matrix aux;           // dropout mask
  };

  VarId push(Node node);
  const Matrix& in_val(const Node& n, int i) const { return nodes_[n.inputs[i]].value; }
  void check_id(VarId id) const;

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  bool backward_done_ = false;
};

}  // namespace protogen
