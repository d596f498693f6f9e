#pragma once

#include <cstdint>
#include <string>

#include "protogen/data.hpp"
#include "protogen/eval.hpp"
#include "protogen/generator.hpp"
#include "protogen/sampler.hpp"
#include "protogen/train.hpp"

namespace protogen {

// Flat sectioned key=value experiment config. Unknown sections or keys are
// rejected with the offending name; every key has a default, so configs only
// state what they change.
struct RunConfig {
  SyntheticSpec data;   // [data]
  EpisodeSpec episode;  // [episode]; seed comes from [run] seed at command time

  // [generator]; model_dim is resolved from the dataset, key_dim/value_dim 0
  // means model_dim / heads.
  AttentionConfig generator{4, 0, 0, 0, 0.1, 1e-5};

  struct TrainSettings {
    int epochs = 200;
    int episodes_per_epoch = 200;
    double learning_rate = 0.01;
    double decay_factor = 0.618;
    int patience = 7;
    double momentum = 0.0;
    int val_episodes = 100;
    LossKind loss = LossKind::kEuclidean;
  } train;  // [train]

  struct EvalSettings {
    int episodes = 600;
    Strategy strategy = Strategy::kGenerator;
  } eval;  // [eval]

  struct Paths {
    std::string dataset_out;
    std::string train_data;
    std::string val_data;
    std::string eval_data;
    std::string checkpoint;
    std::string train_log;
    std::string report;
  } paths;  // [paths]

  uint64_t seed = 42;  // [run]
};

RunConfig load_run_config(const std::string& path);

// Attention shape with auto key/value widths resolved against a dataset dim.
AttentionConfig resolve_generator_config(const RunConfig& config, int model_dim);

}  // namespace protogen
