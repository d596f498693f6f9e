#include "protogen/eval.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace protogen {

const char* strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kMean: return "mean";
    case Strategy::kGenerator: return "generator";
    case Strategy::kGlobalOracle: return "global_oracle";
  }
  return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "mean") return Strategy::kMean;
  if (name == "generator") return Strategy::kGenerator;
  if (name == "global_oracle") return Strategy::kGlobalOracle;
  throw std::invalid_argument("unknown strategy '" + name +
                              "', expected mean|generator|global_oracle");
}

int classify(const std::vector<double>& query, const Matrix& prototypes) {
  if (prototypes.rows < 1) throw std::invalid_argument("classify: no prototypes");
  if (static_cast<int>(query.size()) != prototypes.cols)
    throw std::invalid_argument("classify: query dimension " + std::to_string(query.size()) +
                                " does not match prototypes " + prototypes.shape_str());
  int best = 0;
  double best_dist = euclidean_distance(query.data(), prototypes.row_ptr(0), prototypes.cols);
  for (int i = 1; i < prototypes.rows; ++i) {
    const double d = euclidean_distance(query.data(), prototypes.row_ptr(i), prototypes.cols);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double ci95_half_width(const std::vector<double>& values) {
  const size_t n = values.size();
  if (n <= 1) return 0.0;  // sample stddev undefined for n=1
  // identical values: exactly zero, without fp noise from the mean
  bool all_equal = true;
  for (double v : values)
    if (v != values[0]) {
      all_equal = false;
      break;
    }
  if (all_equal) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sample_std = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sample_std / std::sqrt(static_cast<double>(n));
}

namespace {

struct EpisodeScore {
  double accuracy = 0.0;
  double proto_dist = 0.0;
};

Matrix build_prototypes(const Episode& episode, Strategy strategy,
                        const GlobalPrototypeTable& table, const GeneratorParams* params,
                        const AttentionConfig* config) {
  const int n = episode.n_way();
  const int dim = episode.queries.cols;
  Matrix protos(n, dim);
  for (int i = 0; i < n; ++i) {
    switch (strategy) {
      case Strategy::kMean: {
        const Matrix m = mean_rows(episode.support[i]);
        for (int j = 0; j < dim; ++j) protos(i, j) = m(0, j);
        break;
      }
      case Strategy::kGenerator: {
        const GeneratorOutput out =
            generate_prototype(*params, *config, episode.support[i], Mode::kEval);
        for (int j = 0; j < dim; ++j) protos(i, j) = out.prototype(0, j);
        break;
      }
      case Strategy::kGlobalOracle: {
        const std::vector<double>& g = table.at(episode.class_ids[i]);
        for (int j = 0; j < dim; ++j) protos(i, j) = g[j];
        break;
      }
    }
  }
  return protos;
}

EpisodeScore score_episode(const Episode& episode, const Matrix& protos,
                           const GlobalPrototypeTable& table) {
  EpisodeScore s;
  int correct = 0;
  std::vector<double> query(episode.queries.cols);
  for (int q = 0; q < episode.queries.rows; ++q) {
    query.assign(episode.queries.row_ptr(q), episode.queries.row_ptr(q) + episode.queries.cols);
    if (classify(query, protos) == episode.query_labels[q]) ++correct;
  }
  s.accuracy = static_cast<double>(correct) / episode.queries.rows;
  double dist = 0.0;
  for (int i = 0; i < episode.n_way(); ++i)
    dist += euclidean_distance(protos.row_ptr(i), table.at(episode.class_ids[i]).data(),
                               protos.cols);
  s.proto_dist = dist / episode.n_way();
  return s;
}

EvalReport finalize(Strategy strategy, const EpisodeSpec& spec, std::vector<double> accs,
                    std::vector<double> dists) {
  EvalReport r;
  r.strategy = strategy;
  r.n_way = spec.n_way;
  r.k_shot = spec.k_shot;
  r.episode_count = static_cast<int>(accs.size());
  r.mean_accuracy = mean_of(accs);
  r.ci95_half_width = ci95_half_width(accs);
  r.mean_proto_dist = mean_of(dists);
  r.episode_accuracy = std::move(accs);
  r.episode_proto_dist = std::move(dists);
  return r;
}

void check_payload(const Dataset& dataset, Strategy strategy, const GeneratorParams* params,
                   const AttentionConfig* config) {
  if (strategy == Strategy::kGenerator) {
    if (params == nullptr || config == nullptr)
      throw std::invalid_argument("evaluate: generator strategy needs params and config");
    if (config->model_dim != dataset.dim)
      throw std::invalid_argument("evaluate: checkpoint model_dim " +
                                  std::to_string(config->model_dim) +
                                  " does not match dataset dimension " +
                                  std::to_string(dataset.dim));
  }
}

}  // namespace

EvalReport evaluate(const Dataset& dataset, Strategy strategy, const EpisodeSpec& spec,
                    int episode_count, const GlobalPrototypeTable& global_table,
                    const GeneratorParams* params, const AttentionConfig* generator_config) {
  if (episode_count < 1) throw std::invalid_argument("evaluate: episode_count must be >= 1");
  check_payload(dataset, strategy, params, generator_config);
  std::vector<double> accs(episode_count), dists(episode_count);
  // Exceptions must not unwind out of the parallel region.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < episode_count; ++e) {
    if (failure) continue;
    try {
      const Episode episode = sample_episode(dataset, spec, static_cast<uint64_t>(e));
      const Matrix protos =
          build_prototypes(episode, strategy, global_table, params, generator_config);
      const EpisodeScore s = score_episode(episode, protos, global_table);
      accs[e] = s.accuracy;
      dists[e] = s.proto_dist;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return finalize(strategy, spec, std::move(accs), std::move(dists));
}

std::array<EvalReport, 3> compare(const Dataset& dataset, const GeneratorParams& params,
                                  const AttentionConfig& generator_config,
                                  const GlobalPrototypeTable& global_table,
                                  const EpisodeSpec& spec, int episode_count) {
  if (episode_count < 1) throw std::invalid_argument("compare: episode_count must be >= 1");
  check_payload(dataset, Strategy::kGenerator, &params, &generator_config);
  constexpr std::array<Strategy, 3> kStrategies{Strategy::kMean, Strategy::kGenerator,
                                                Strategy::kGlobalOracle};
  std::array<std::vector<double>, 3> accs, dists;
  for (auto& v : accs) v.resize(episode_count);
  for (auto& v : dists) v.resize(episode_count);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int e = 0; e < episode_count; ++e) {
    if (failure) continue;
    try {
      // One shared episode per index keeps the three strategies paired.
      const Episode episode = sample_episode(dataset, spec, static_cast<uint64_t>(e));
      for (size_t s = 0; s < kStrategies.size(); ++s) {
        const Matrix protos = build_prototypes(episode, kStrategies[s], global_table, &params,
                                               &generator_config);
        const EpisodeScore score = score_episode(episode, protos, global_table);
        accs[s][e] = score.accuracy;
        dists[s][e] = score.proto_dist;
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return {finalize(kStrategies[0], spec, std::move(accs[0]), std::move(dists[0])),
          finalize(kStrategies[1], spec, std::move(accs[1]), std::move(dists[1])),
          finalize(kStrategies[2], spec, std::move(accs[2]), std::move(dists[2]))};
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "episode,accuracy,proto_dist\n";
  char buf[64];
  for (int e = 0; e < report.episode_count; ++e) {
    out << e;
    std::snprintf(buf, sizeof(buf), "%.17g", report.episode_accuracy[e]);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", report.episode_proto_dist[e]);
    out << ',' << buf << "\n";
  }
  out << "summary," << strategy_name(report.strategy) << ',' << report.n_way << ','
      << report.k_shot;
  std::snprintf(buf, sizeof(buf), "%.17g", report.mean_accuracy);
  out << ',' << buf;
  std::snprintf(buf, sizeof(buf), "%.17g", report.ci95_half_width);
  out << ',' << buf;
  std::snprintf(buf, sizeof(buf), "%.17g", report.mean_proto_dist);
  out << ',' << buf << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string summary_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %3s %3s %5s  %-16s %s\n", "strategy", "N", "K",
                "eps", "accuracy", "proto_dist");
  out << line;
  for (const EvalReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-14s %3d %3d %5d  %6.2f%% +/- %.2f  %.4f\n",
                  strategy_name(r.strategy), r.n_way, r.k_shot, r.episode_count,
                  100.0 * r.mean_accuracy, 100.0 * r.ci95_half_width, r.mean_proto_dist);
    out << line;
  }
  return out.str();
}

}  // namespace protogen
