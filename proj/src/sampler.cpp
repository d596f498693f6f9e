#include "protogen/sampler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "protogen/rng.hpp"

namespace protogen {

void EpisodeSpec::validate() const {
  if (n_way < 2) throw std::invalid_argument("episode: n_way must be >= 2");
  if (k_shot < 1) throw std::invalid_argument("episode: k_shot must be >= 1");
  if (queries_per_class < 1)
    throw std::invalid_argument("episode: queries_per_class must be >= 1");
}

namespace {

// Partial Fisher-Yates: first `take` entries of pool become the draw.
void draw_prefix(std::vector<int>& pool, int take, Rng& rng) {
  const int n = static_cast<int>(pool.size());
  for (int i = 0; i < take; ++i) {
    const int j = i + static_cast<int>(rng.bounded(static_cast<uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

Episode sample_episode(const Dataset& dataset, const EpisodeSpec& spec, uint64_t episode_index) {
  spec.validate();
  if (dataset.class_count() < spec.n_way)
    throw std::invalid_argument("sample_episode: dataset has " +
                                std::to_string(dataset.class_count()) + " classes, need " +
                                std::to_string(spec.n_way));

  Rng rng = Rng::for_stream(spec.seed, episode_index);

  std::vector<int> class_pool;
  class_pool.reserve(dataset.rows_by_class.size());
  for (const auto& [class_id, rows] : dataset.rows_by_class) class_pool.push_back(class_id);
  draw_prefix(class_pool, spec.n_way, rng);

  Episode ep;
  ep.class_ids.assign(class_pool.begin(), class_pool.begin() + spec.n_way);
  std::sort(ep.class_ids.begin(), ep.class_ids.end());

  const int per_class = spec.k_shot + spec.queries_per_class;
  ep.queries = Matrix(spec.n_way * spec.queries_per_class, dataset.dim);
  int query_row = 0;
  for (int i = 0; i < spec.n_way; ++i) {
    const int class_id = ep.class_ids[i];
    std::vector<int> rows = dataset.rows_by_class.at(class_id);
    if (static_cast<int>(rows.size()) < per_class)
      throw std::invalid_argument("sample_episode: class " + std::to_string(class_id) +
                                  " has " + std::to_string(rows.size()) + " samples, need " +
                                  std::to_string(per_class));
    draw_prefix(rows, per_class, rng);

    Matrix stack(spec.k_shot, dataset.dim);
    std::vector<int> support_rows(spec.k_shot);
    for (int k = 0; k < spec.k_shot; ++k) {
      const Embedding& e = dataset.samples[rows[k]];
      for (int j = 0; j < dataset.dim; ++j) stack(k, j) = e.features[j];
      support_rows[k] = rows[k];
    }
    ep.support.push_back(std::move(stack));
    ep.support_indices.push_back(std::move(support_rows));

    for (int q = 0; q < spec.queries_per_class; ++q) {
      const int row = rows[spec.k_shot + q];
      const Embedding& e = dataset.samples[row];
      for (int j = 0; j < dataset.dim; ++j) ep.queries(query_row, j) = e.features[j];
      ep.query_labels.push_back(i);
      ep.query_indices.push_back(row);
      ++query_row;
    }
  }
  return ep;
}

}  // namespace protogen
