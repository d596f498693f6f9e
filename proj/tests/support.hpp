#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "protogen/matrix.hpp"
#include "protogen/rng.hpp"

namespace testsupport {

inline protogen::Matrix random_matrix(int rows, int cols, protogen::Rng& rng,
                                      double scale = 1.0) {
  protogen::Matrix m(rows, cols);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

inline std::vector<double> random_vector(int n, protogen::Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Central-difference gradient oracle. Perturbs every entry of every matrix in
// `leaves` by +/-h, re-evaluates `loss`, and returns the worst relative error
// against the analytic gradients. The denominator floor turns the comparison
// into an absolute check of h*floor once both gradients are below it, which
// keeps fp noise in the difference quotient from registering as error.
inline double max_rel_error_fd(const std::vector<protogen::Matrix*>& leaves,
                               const std::vector<const protogen::Matrix*>& analytic,
                               const std::function<double()>& loss, double h = 1e-5,
                               double floor = 1e-3) {
  double worst = 0.0;
  for (size_t m = 0; m < leaves.size(); ++m) {
    for (size_t i = 0; i < leaves[m]->size(); ++i) {
      double& x = leaves[m]->data[i];
      const double saved = x;
      x = saved + h;
      const double up = loss();
      x = saved - h;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[m]->data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace testsupport
