// Command-line front end: synthetic data generation, generator training,
// evaluation and the three-strategy comparison. Experiments are config
// files; flags override only the seed and file paths. OMP_NUM_THREADS caps
// the worker threads used for episode evaluation.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "protogen/config.hpp"
#include "protogen/data.hpp"
#include "protogen/eval.hpp"
#include "protogen/generator.hpp"
#include "protogen/rng.hpp"
#include "protogen/sampler.hpp"
#include "protogen/train.hpp"

namespace {

using namespace protogen;

// Stream tags for deriving per-purpose seeds from the run seed.
enum : uint64_t { kStreamTrainEpisodes = 10, kStreamValEpisodes = 11, kStreamTrainInit = 12,
                  kStreamEvalEpisodes = 20 };

struct PathOverrides {
  std::string dataset_out, train_data, val_data, eval_data, checkpoint, train_log, report;
  bool has_seed = false;
  uint64_t seed = 0;
};

RunConfig load_with_overrides(const std::string& config_path, const PathOverrides& ov) {
  RunConfig cfg = load_run_config(config_path);
  if (ov.has_seed) cfg.seed = ov.seed;
  if (!ov.dataset_out.empty()) cfg.paths.dataset_out = ov.dataset_out;
  if (!ov.train_data.empty()) cfg.paths.train_data = ov.train_data;
  if (!ov.val_data.empty()) cfg.paths.val_data = ov.val_data;
  if (!ov.eval_data.empty()) cfg.paths.eval_data = ov.eval_data;
  if (!ov.checkpoint.empty()) cfg.paths.checkpoint = ov.checkpoint;
  if (!ov.train_log.empty()) cfg.paths.train_log = ov.train_log;
  if (!ov.report.empty()) cfg.paths.report = ov.report;
  return cfg;
}

std::string require_path(const std::string& value, const char* key) {
  if (value.empty())
    throw std::runtime_error(std::string("config: paths.") + key +
                             " is required for this command");
  return value;
}

void cmd_gen_data(const RunConfig& cfg) {
  SyntheticSpec spec = cfg.data;
  spec.seed = cfg.seed;
  const SyntheticData synth = generate_synthetic(spec);
  const std::string out = require_path(cfg.paths.dataset_out, "dataset_out");
  save_embeddings(synth.dataset, out);
  std::printf("generated %d classes, dim %d, %d samples/class, outlier fraction %.2f -> %s (%zu rows)\n",
              spec.class_count, spec.dim, spec.samples_per_class, spec.outlier_fraction,
              out.c_str(), synth.dataset.samples.size());
}

void cmd_train(const RunConfig& cfg) {
  const Dataset train_data = load_embeddings(require_path(cfg.paths.train_data, "train_data"));
  const Dataset val_data = load_embeddings(require_path(cfg.paths.val_data, "val_data"));
  const GlobalPrototypeTable table = compute_global_prototypes(train_data);
  const AttentionConfig gcfg = resolve_generator_config(cfg, train_data.dim);

  TrainConfig tc;
  tc.epochs = cfg.train.epochs;
  tc.episodes_per_epoch = cfg.train.episodes_per_epoch;
  tc.initial_lr = cfg.train.learning_rate;
  tc.decay_factor = cfg.train.decay_factor;
  tc.patience = cfg.train.patience;
  tc.momentum = cfg.train.momentum;
  tc.val_episodes = cfg.train.val_episodes;
  tc.loss = cfg.train.loss;
  tc.train_episode = cfg.episode;
  tc.train_episode.seed = splitmix_seed(cfg.seed, kStreamTrainEpisodes);
  tc.val_episode = cfg.episode;
  tc.val_episode.seed = splitmix_seed(cfg.seed, kStreamValEpisodes);
  tc.seed = splitmix_seed(cfg.seed, kStreamTrainInit);

  const TrainResult result = train(train_data, val_data, table, gcfg, tc);
  save_params(result.params, gcfg, require_path(cfg.paths.checkpoint, "checkpoint"));
  if (!cfg.paths.train_log.empty()) save_train_log(result.log, cfg.paths.train_log);
  std::printf("trained %d epochs x %d episodes, best epoch %d (val acc %.4f) -> %s\n",
              tc.epochs, tc.episodes_per_epoch, result.log.best_epoch,
              result.log.best_val_accuracy, cfg.paths.checkpoint.c_str());
}

void cmd_eval(const RunConfig& cfg) {
  const Dataset data = load_embeddings(require_path(cfg.paths.eval_data, "eval_data"));
  const GlobalPrototypeTable table = compute_global_prototypes(data);
  EpisodeSpec spec = cfg.episode;
  spec.seed = splitmix_seed(cfg.seed, kStreamEvalEpisodes);

  EvalReport report;
  if (cfg.eval.strategy == Strategy::kGenerator) {
    const LoadedParams loaded = load_params(require_path(cfg.paths.checkpoint, "checkpoint"));
    report = evaluate(data, Strategy::kGenerator, spec, cfg.eval.episodes, table,
                      &loaded.params, &loaded.config);
  } else {
    report = evaluate(data, cfg.eval.strategy, spec, cfg.eval.episodes, table);
  }
  if (!cfg.paths.report.empty()) save_eval_report(report, cfg.paths.report);
  std::cout << summary_table({report});
}

void cmd_compare(const RunConfig& cfg) {
  const Dataset data = load_embeddings(require_path(cfg.paths.eval_data, "eval_data"));
  const GlobalPrototypeTable table = compute_global_prototypes(data);
  const LoadedParams loaded = load_params(require_path(cfg.paths.checkpoint, "checkpoint"));
  EpisodeSpec spec = cfg.episode;
  spec.seed = splitmix_seed(cfg.seed, kStreamEvalEpisodes);

  const auto reports = compare(data, loaded.params, loaded.config, table, spec,
                               cfg.eval.episodes);
  if (!cfg.paths.report.empty()) {
    // One file per strategy: <report>.mean.csv, .generator.csv, .global_oracle.csv
    for (const EvalReport& r : reports)
      save_eval_report(r, cfg.paths.report + "." + strategy_name(r.strategy) + ".csv");
  }
  std::cout << summary_table({reports[0], reports[1], reports[2]});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"episodic prototype generation for few-shot classification"};
  app.require_subcommand(1);

  std::string config_path;
  PathOverrides ov;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", ov.seed, "override [run] seed")
        ->each([&](const std::string&) { ov.has_seed = true; });
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic embedding CSV");
  add_common(gen);
  gen->add_option("--out", ov.dataset_out, "override paths.dataset_out");

  CLI::App* train_cmd = app.add_subcommand("train", "train the prototype generator");
  add_common(train_cmd);
  train_cmd->add_option("--train-data", ov.train_data, "override paths.train_data");
  train_cmd->add_option("--val-data", ov.val_data, "override paths.val_data");
  train_cmd->add_option("--checkpoint", ov.checkpoint, "override paths.checkpoint");
  train_cmd->add_option("--train-log", ov.train_log, "override paths.train_log");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate one prototype strategy");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", ov.eval_data, "override paths.eval_data");
  eval_cmd->add_option("--checkpoint", ov.checkpoint, "override paths.checkpoint");
  eval_cmd->add_option("--report", ov.report, "override paths.report");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "paired mean/generator/oracle comparison");
  add_common(compare_cmd);
  compare_cmd->add_option("--data", ov.eval_data, "override paths.eval_data");
  compare_cmd->add_option("--checkpoint", ov.checkpoint, "override paths.checkpoint");
  compare_cmd->add_option("--report", ov.report, "override paths.report");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_with_overrides(config_path, ov);
    if (gen->parsed()) cmd_gen_data(cfg);
    else if (train_cmd->parsed()) cmd_train(cfg);
    else if (eval_cmd->parsed()) cmd_eval(cfg);
    else if (compare_cmd->parsed()) cmd_compare(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
