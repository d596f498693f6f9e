#pragma once

#include "protogen/generator.hpp"
#include "protogen/matrix.hpp"

// Serial reference path. Plain loops, no OpenMP, no tape: kept for testing
// the parallel kernels and the graph-built generator against an independent
// straight-line evaluation, and for the serial side of the benchmark.
namespace protogen::serial {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
Matrix layer_norm_rows(const Matrix& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps);

// Straight-line evaluation of the full generator forward (dropout off).
Matrix generate_prototype(const GeneratorParams& params, const AttentionConfig& config,
                          const Matrix& support_stack);

}  // namespace protogen::serial
