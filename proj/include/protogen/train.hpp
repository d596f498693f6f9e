#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "protogen/data.hpp"
#include "protogen/generator.hpp"
#include "protogen/sampler.hpp"

namespace protogen {

// Distance between a generated prototype and its global prototype. Plain
// Euclidean by default; squared is available since the metric is pluggable.
enum class LossKind { kEuclidean, kSquaredEuclidean };

struct TrainConfig {
  int epochs = 200;
  int episodes_per_epoch = 200;
  EpisodeSpec train_episode;
  EpisodeSpec val_episode;
  int val_episodes = 100;
  double initial_lr = 0.01;
  double decay_factor = 0.618;
  int patience = 7;
  double momentum = 0.0;
  LossKind loss = LossKind::kEuclidean;
  uint64_t seed = 0;  // drives parameter init and dropout streams

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

// CSV: epoch,train_loss,val_acc,lr
void save_train_log(const TrainLog& log, const std::string& path);

// Mean per-class distance between generated and global prototypes.
double distance_loss(const std::vector<Matrix>& generated, const GlobalPrototypeTable& table,
                     const std::vector<int>& class_ids, LossKind kind = LossKind::kEuclidean);

// Plateau rule: an observation improves when it beats the best score by more
// than tol; after `patience` consecutive non-improvements the learning rate
// is multiplied by `factor` and the window restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, int patience, double tol = 1e-6)
      : lr_(initial_lr), factor_(factor), tol_(tol), patience_(patience) {}

  bool observe(double score) {
    if (!seen_any_ || score > best_ + tol_) {
      seen_any_ = true;
      best_ = score;
      bad_count_ = 0;
      return true;
    }
    if (++bad_count_ >= patience_) {
      lr_ *= factor_;
      bad_count_ = 0;
    }
    return false;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  double tol_;
  int patience_;
  int bad_count_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
  bool seen_any_ = false;
};

// v <- momentum * v + g; theta <- theta - lr * v
void sgd_step(GeneratorParams& params, const GeneratorParams& grads, double lr, double momentum,
              GeneratorParams& velocity);

struct TrainResult {
  GeneratorParams params;  // from the best validation epoch
  TrainLog log;
};

// Meta-training loop: one SGD step per episode on the mean prototype
// distance over its N classes; per-epoch validation accuracy drives the
// plateau decay and best-epoch checkpointing.
TrainResult train(const Dataset& train_data, const Dataset& val_data,
                  const GlobalPrototypeTable& global_table,
                  const AttentionConfig& generator_config, const TrainConfig& config);

}  // namespace protogen
