#pragma once

#include <array>
#include <string>
#include <vector>

#include "protogen/data.hpp"
#include "protogen/generator.hpp"
#include "protogen/sampler.hpp"

namespace protogen {

// How per-class prototypes are built from an episode's support set.
enum class Strategy {
  kMean,          // arithmetic mean of the support rows
  kGenerator,     // attention generator in eval mode
  kGlobalOracle,  // global prototype looked up by class id, support ignored
};

const char* strategy_name(Strategy strategy);
Strategy strategy_from_name(const std::string& name);

struct EvalReport {
  Strategy strategy = Strategy::kMean;
  int n_way = 0;
  int k_shot = 0;
  int episode_count = 0;
  std::vector<double> episode_accuracy;
  std::vector<double> episode_proto_dist;  // per-episode mean over classes
  double mean_accuracy = 0.0;
  double ci95_half_width = 0.0;
  double mean_proto_dist = 0.0;
};

// Nearest prototype under Euclidean distance; ties go to the lowest index.
int classify(const std::vector<double>& query, const Matrix& prototypes);

double mean_of(const std::vector<double>& values);
// 1.96 * sample stddev / sqrt(n); zero for n <= 1 by convention.
double ci95_half_width(const std::vector<double>& values);

// Runs episode_count episodes and scores every query against the strategy's
// prototypes. The table provides oracle prototypes and the distance
// diagnostic, so it must cover the evaluated dataset's classes. Episodes are
// independent and evaluated in parallel; aggregation is ordered by index.
EvalReport evaluate(const Dataset& dataset, Strategy strategy, const EpisodeSpec& spec,
                    int episode_count, const GlobalPrototypeTable& global_table,
                    const GeneratorParams* params = nullptr,
                    const AttentionConfig* generator_config = nullptr);

// The three strategies over the identical episode sequence, for paired
// comparison: index 0 mean, 1 generator, 2 global oracle.
std::array<EvalReport, 3> compare(const Dataset& dataset, const GeneratorParams& params,
                                  const AttentionConfig& generator_config,
                                  const GlobalPrototypeTable& global_table,
                                  const EpisodeSpec& spec, int episode_count);

// CSV: per-episode rows, then one trailing summary record
// "summary,<strategy>,<N>,<K>,<mean_acc>,<ci95>,<mean_proto_dist>".
void save_eval_report(const EvalReport& report, const std::string& path);

// Table-shaped human summary: strategy, accuracy % +/- CI, prototype distance.
std::string summary_table(const std::vector<EvalReport>& reports);

}  // namespace protogen
