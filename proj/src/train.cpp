#include "protogen/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "protogen/eval.hpp"

namespace protogen {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (episodes_per_epoch < 1)
    throw std::invalid_argument("train: episodes_per_epoch must be >= 1");
  if (initial_lr <= 0.0) throw std::invalid_argument("train: initial_lr must be > 0");
  if (decay_factor <= 0.0 || decay_factor >= 1.0)
    throw std::invalid_argument("train: decay_factor must be in (0,1)");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("train: momentum must be in [0,1)");
  if (val_episodes < 1) throw std::invalid_argument("train: val_episodes must be >= 1");
  train_episode.validate();
  val_episode.validate();
}

double distance_loss(const std::vector<Matrix>& generated, const GlobalPrototypeTable& table,
                     const std::vector<int>& class_ids, LossKind kind) {
  if (generated.size() != class_ids.size())
    throw std::invalid_argument("distance_loss: prototype/class count mismatch");
  if (generated.empty()) throw std::invalid_argument("distance_loss: empty episode");
  double sum = 0.0;
  for (size_t i = 0; i < generated.size(); ++i) {
    const std::vector<double>& target = table.at(class_ids[i]);
    const Matrix& proto = generated[i];
    if (proto.rows != 1 || proto.cols != table.dim)
      throw std::invalid_argument("distance_loss: prototype must be 1x" +
                                  std::to_string(table.dim) + ", got " + proto.shape_str());
    const double d = euclidean_distance(proto.row_ptr(0), target.data(), table.dim);
    sum += kind == LossKind::kEuclidean ? d : d * d;
  }
  return sum / static_cast<double>(generated.size());
}

void sgd_step(GeneratorParams& params, const GeneratorParams& grads, double lr, double momentum,
              GeneratorParams& velocity) {
  auto p = params.matrices();
  const auto g = grads.matrices();
  auto v = velocity.matrices();
  if (p.size() != g.size() || p.size() != v.size())
    throw std::invalid_argument("sgd_step: parameter layout mismatch");
  for (size_t m = 0; m < p.size(); ++m) {
    if (!p[m]->same_shape(*g[m]) || !p[m]->same_shape(*v[m]))
      throw std::invalid_argument("sgd_step: shape mismatch, got " + p[m]->shape_str() +
                                  " and " + g[m]->shape_str());
    for (size_t i = 0; i < p[m]->size(); ++i) {
      v[m]->data[i] = momentum * v[m]->data[i] + g[m]->data[i];
      p[m]->data[i] -= lr * v[m]->data[i];
    }
  }
}

namespace {

GeneratorParams zeros_like(const GeneratorParams& params) {
  GeneratorParams z = params;
  for (Matrix* m : z.matrices()) m->data.assign(m->size(), 0.0);
  return z;
}

[[noreturn]] void nonfinite_abort(const char* what, int epoch, int episode) {
  throw std::runtime_error("train: non-finite " + std::string(what) + " at epoch " +
                           std::to_string(epoch) + ", episode " + std::to_string(episode));
}

}  // namespace

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write train log: " + path);
  out << "epoch,train_loss,val_acc,lr\n";
  char buf[64];
  for (size_t e = 0; e < log.epochs.size(); ++e) {
    const EpochStats& s = log.epochs[e];
    out << e;
    std::snprintf(buf, sizeof(buf), "%.17g", s.train_loss);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", s.val_accuracy);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", s.lr);
    out << ',' << buf << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TrainResult train(const Dataset& train_data, const Dataset& val_data,
                  const GlobalPrototypeTable& global_table,
                  const AttentionConfig& generator_config, const TrainConfig& config) {
  config.validate();
  AttentionConfig gcfg = generator_config;
  gcfg.validate();
  if (gcfg.model_dim != train_data.dim)
    throw std::invalid_argument("train: model_dim " + std::to_string(gcfg.model_dim) +
                                " does not match dataset dimension " +
                                std::to_string(train_data.dim));

  GeneratorParams params = init_params(gcfg, splitmix_seed(config.seed, 0));
  TrainResult result{params, {}};
  if (config.epochs == 0) return result;

  GeneratorParams velocity = zeros_like(params);
  PlateauScheduler scheduler(config.initial_lr, config.decay_factor, config.patience);
  // Validation diagnostics are measured against the validation split's own
  // global prototypes; its class ids are unrelated to the training split's.
  const GlobalPrototypeTable val_table = compute_global_prototypes(val_data);
  const uint64_t dropout_seed = splitmix_seed(config.seed, 1);

  const double n_inv = 1.0 / static_cast<double>(config.train_episode.n_way);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = scheduler.lr();
    double loss_sum = 0.0;
    for (int step = 0; step < config.episodes_per_epoch; ++step) {
      const uint64_t episode_index =
          static_cast<uint64_t>(epoch) * config.episodes_per_epoch + step;
      const Episode episode = sample_episode(train_data, config.train_episode, episode_index);
      Rng dropout_rng = Rng::for_stream(dropout_seed, episode_index);

      Tape tape;
      const ParamVars vars = record_params(tape, params);
      Tape::VarId total = -1;
      for (int i = 0; i < episode.n_way(); ++i) {
        const Tape::VarId proto =
            build_prototype_graph(tape, vars, gcfg, episode.support[i], Mode::kTrain,
                                  &dropout_rng);
        const Tape::VarId target =
            tape.leaf(Matrix::row_vector(global_table.at(episode.class_ids[i])));
        const Tape::VarId diff = tape.sub(proto, target);
        const Tape::VarId dist = config.loss == LossKind::kEuclidean
                                     ? tape.euclidean_norm(diff)
                                     : tape.sum_all(tape.hadamard(diff, diff));
        total = i == 0 ? dist : tape.add(total, dist);
      }
      const Tape::VarId loss_node = tape.scale(total, n_inv);
      const double loss = tape.value(loss_node)(0, 0);
      if (!std::isfinite(loss)) nonfinite_abort("loss", epoch, step);
      tape.backward(loss_node);
      const GeneratorParams grads = read_param_grads(tape, vars);
      for (const Matrix* g : grads.matrices())
        if (!all_finite(*g)) nonfinite_abort("gradient", epoch, step);
      sgd_step(params, grads, lr, config.momentum, velocity);
      loss_sum += loss;
    }

    const EvalReport val_report =
        evaluate(val_data, Strategy::kGenerator, config.val_episode, config.val_episodes,
                 val_table, &params, &gcfg);
    const double val_acc = val_report.mean_accuracy;

    result.log.epochs.push_back({loss_sum / config.episodes_per_epoch, val_acc, lr});
    if (scheduler.observe(val_acc)) {
      result.params = params;
      result.log.best_epoch = epoch;
      result.log.best_val_accuracy = val_acc;
    }
  }
  return result;
}

}  // namespace protogen
