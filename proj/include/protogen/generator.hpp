#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protogen/matrix.hpp"
#include "protogen/rng.hpp"
#include "protogen/tape.hpp"

namespace protogen {

struct AttentionConfig {
  int heads = 4;
  int model_dim = 0;
  int key_dim = 0;    // per-head query/key width
  int value_dim = 0;  // per-head value width
  double dropout_rate = 0.1;
  double norm_eps = 1e-5;

  void validate() const;
};

// All learnable matrices of the episodic generator: per-head query/key/value
// projections, the head-mixing output projection, the residual FC projection
// and the layer-norm affine.
struct GeneratorParams {
  std::vector<Matrix> query_weight;  // heads x (model_dim x key_dim)
  std::vector<Matrix> key_weight;    // heads x (model_dim x key_dim)
  std::vector<Matrix> value_weight;  // heads x (model_dim x value_dim)
  Matrix output_weight;              // (value_dim * heads) x model_dim
  Matrix fc_weight;                  // model_dim x model_dim
  Matrix norm_scale;                 // 1 x model_dim
  Matrix norm_shift;                 // 1 x model_dim

  void validate_shapes(const AttentionConfig& config) const;

  // Stable flat order used by checkpoints, SGD and gradient checks.
  std::vector<Matrix*> matrices();
  std::vector<const Matrix*> matrices() const;
  static std::vector<std::string> matrix_names(int heads);
};

enum class Mode { kTrain, kEval };

// Projections start uniform in +/- sqrt(6 / (fan_in + fan_out)); the norm
// affine starts at identity (scale 1, shift 0).
GeneratorParams init_params(const AttentionConfig& config, uint64_t seed);

// Tape handles for one set of parameter leaves.
struct ParamVars {
  std::vector<Tape::VarId> query_weight, key_weight, value_weight;
  Tape::VarId output_weight = -1, fc_weight = -1, norm_scale = -1, norm_shift = -1;
};

ParamVars record_params(Tape& tape, const GeneratorParams& params);

// Records attention -> concat -> output projection -> FC residual ->
// dropout (train mode) -> layer norm -> mean over the K refined rows.
// Returns the 1 x model_dim prototype node; refined_out, when given,
// receives the K x model_dim refined-row node.
Tape::VarId build_prototype_graph(Tape& tape, const ParamVars& vars,
                                  const AttentionConfig& config, const Matrix& support_stack,
                                  Mode mode, Rng* dropout_rng,
                                  Tape::VarId* refined_out = nullptr);

struct GeneratorOutput {
  Matrix prototype;  // 1 x model_dim
  Matrix refined;    // K x model_dim
};

// One-off forward on a private tape.
GeneratorOutput generate_prototype(const GeneratorParams& params, const AttentionConfig& config,
                                   const Matrix& support_stack, Mode mode,
                                   Rng* dropout_rng = nullptr);

// Gradients read back in GeneratorParams layout. Call after tape.backward().
GeneratorParams read_param_grads(const Tape& tape, const ParamVars& vars);

// Checkpoint: self-describing text with a version field, the config, and
// each named matrix as shape plus row-major values at 17 significant digits.
void save_params(const GeneratorParams& params, const AttentionConfig& config,
                 const std::string& path);

struct LoadedParams {
  GeneratorParams params;
  AttentionConfig config;
};

LoadedParams load_params(const std::string& path);

}  // namespace protogen
