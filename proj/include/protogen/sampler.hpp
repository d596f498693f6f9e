#pragma once

#include <cstdint>
#include <vector>

#include "protogen/data.hpp"
#include "protogen/matrix.hpp"

namespace protogen {

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 5;
  int queries_per_class = 15;
  uint64_t seed = 0;

  void validate() const;
};

// One N-way K-shot task. Support and query rows are copies of dataset rows;
// the *_indices fields keep the source row ids so disjointness is checkable
// by sample identity.
struct Episode {
  std::vector<int> class_ids;              // N original class ids, ascending
  std::vector<Matrix> support;             // N stacks of k_shot x dim
  Matrix queries;                          // (N * queries_per_class) x dim
  std::vector<int> query_labels;           // episode-internal labels in [0, N)
  std::vector<std::vector<int>> support_indices;
  std::vector<int> query_indices;

  int n_way() const { return static_cast<int>(class_ids.size()); }
};

// Deterministic function of (spec.seed, episode_index): distinct classes are
// drawn uniformly without replacement, then K+Q distinct samples per class,
// first K to support. Episode class order is the sort order of the drawn ids.
Episode sample_episode(const Dataset& dataset, const EpisodeSpec& spec, uint64_t episode_index);

}  // namespace protogen
