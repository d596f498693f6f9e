#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protogen/matrix.hpp"

namespace protogen {

struct Embedding {
  int class_id = 0;
  std::vector<double> features;
};

struct Dataset {
  int dim = 0;
  std::vector<Embedding> samples;
  // Dataset row indices per class, in row order.
  std::map<int, std::vector<int>> rows_by_class;

  void rebuild_index();
  int class_count() const { return static_cast<int>(rows_by_class.size()); }
};

// Parameters of the synthetic contamination regime: isotropic Gaussian
// classes with a fixed fraction of samples displaced by a random direction
// of length outlier_shift * within_std.
//
// within_std is the magnitude of a typical within-class deviation
// (E||x - mu||^2 = within_std^2; per-coordinate sigma is within_std/sqrt(d)),
// so outlier_shift counts cluster radii and the contamination stays equally
// harmful at any dimension. mean_scale is the per-coordinate scale of the
// class means: expected class separation is mean_scale * sqrt(2 d).
struct SyntheticSpec {
  int class_count = 2;
  int dim = 2;
  int samples_per_class = 1;
  double mean_scale = 1.0;
  double within_std = 1.0;
  double outlier_fraction = 0.0;  // in [0, 1]
  double outlier_shift = 0.0;     // in units of within_std
  uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  Matrix class_means;  // class_count x dim, the drawn (uncontaminated) means
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// CSV contract: header "class_id,f0,...,f{d-1}", one sample per line,
// decimal floats, LF endings, no quoting. Values are written with 17
// significant digits so save/load round-trips exactly.
Dataset load_embeddings(const std::string& path);
void save_embeddings(const Dataset& dataset, const std::string& path);

// Per-class mean embedding over the full dataset, dataset summation order.
struct GlobalPrototypeTable {
  int dim = 0;
  std::map<int, std::vector<double>> prototypes;
  std::map<int, int> counts;

  bool contains(int class_id) const { return prototypes.count(class_id) != 0; }
  const std::vector<double>& at(int class_id) const;
};

GlobalPrototypeTable compute_global_prototypes(const Dataset& dataset);

}  // namespace protogen
