#include "protogen/generator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace protogen {

void AttentionConfig::validate() const {
  if (heads < 1) throw std::invalid_argument("attention: heads must be >= 1");
  if (model_dim < 1) throw std::invalid_argument("attention: model_dim must be >= 1");
  if (key_dim < 1) throw std::invalid_argument("attention: key_dim must be >= 1");
  if (value_dim < 1) throw std::invalid_argument("attention: value_dim must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("attention: dropout_rate must be in [0,1)");
  if (norm_eps <= 0.0) throw std::invalid_argument("attention: norm_eps must be > 0");
}

namespace {

void check_shape(const Matrix& m, int rows, int cols, const std::string& name) {
  if (m.rows != rows || m.cols != cols)
    throw std::invalid_argument("generator: " + name + " must be " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + m.shape_str());
}

Matrix xavier_uniform(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (double& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

void GeneratorParams::validate_shapes(const AttentionConfig& config) const {
  config.validate();
  if (static_cast<int>(query_weight.size()) != config.heads ||
      static_cast<int>(key_weight.size()) != config.heads ||
      static_cast<int>(value_weight.size()) != config.heads)
    throw std::invalid_argument("generator: head count mismatch");
  for (int h = 0; h < config.heads; ++h) {
    const std::string tag = "." + std::to_string(h);
    check_shape(query_weight[h], config.model_dim, config.key_dim, "w_query" + tag);
    check_shape(key_weight[h], config.model_dim, config.key_dim, "w_key" + tag);
    check_shape(value_weight[h], config.model_dim, config.value_dim, "w_value" + tag);
  }
  check_shape(output_weight, config.value_dim * config.heads, config.model_dim, "w_output");
  check_shape(fc_weight, config.model_dim, config.model_dim, "w_fc");
  check_shape(norm_scale, 1, config.model_dim, "norm_scale");
  check_shape(norm_shift, 1, config.model_dim, "norm_shift");
  for (const Matrix* m : matrices())
    if (!all_finite(*m)) throw std::invalid_argument("generator: non-finite parameter value");
}

std::vector<Matrix*> GeneratorParams::matrices() {
  std::vector<Matrix*> out;
  for (auto& m : query_weight) out.push_back(&m);
  for (auto& m : key_weight) out.push_back(&m);
  for (auto& m : value_weight) out.push_back(&m);
  out.push_back(&output_weight);
  out.push_back(&fc_weight);
  out.push_back(&norm_scale);
  out.push_back(&norm_shift);
  return out;
}

std::vector<const Matrix*> GeneratorParams::matrices() const {
  std::vector<const Matrix*> out;
  for (const auto& m : query_weight) out.push_back(&m);
  for (const auto& m : key_weight) out.push_back(&m);
  for (const auto& m : value_weight) out.push_back(&m);
  out.push_back(&output_weight);
  out.push_back(&fc_weight);
  out.push_back(&norm_scale);
  out.push_back(&norm_shift);
  return out;
}

std::vector<std::string> GeneratorParams::matrix_names(int heads) {
  std::vector<std::string> names;
  for (int h = 0; h < heads; ++h) names.push_back("w_query." + std::to_string(h));
  for (int h = 0; h < heads; ++h) names.push_back("w_key." + std::to_string(h));
  for (int h = 0; h < heads; ++h) names.push_back("w_value." + std::to_string(h));
  names.push_back("w_output");
  names.push_back("w_fc");
  names.push_back("norm_scale");
  names.push_back("norm_shift");
  return names;
}

GeneratorParams init_params(const AttentionConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  GeneratorParams p;
  for (int h = 0; h < config.heads; ++h) {
    p.query_weight.push_back(xavier_uniform(config.model_dim, config.key_dim, rng));
    p.key_weight.push_back(xavier_uniform(config.model_dim, config.key_dim, rng));
    p.value_weight.push_back(xavier_uniform(config.model_dim, config.value_dim, rng));
  }
  p.output_weight = xavier_uniform(config.value_dim * config.heads, config.model_dim, rng);
  p.fc_weight = xavier_uniform(config.model_dim, config.model_dim, rng);
  p.norm_scale = Matrix(1, config.model_dim);
  for (double& v : p.norm_scale.data) v = 1.0;
  p.norm_shift = Matrix(1, config.model_dim);
  return p;
}

ParamVars record_params(Tape& tape, const GeneratorParams& params) {
  ParamVars vars;
  for (const auto& m : params.query_weight) vars.query_weight.push_back(tape.leaf(m));
  for (const auto& m : params.key_weight) vars.key_weight.push_back(tape.leaf(m));
  for (const auto& m : params.value_weight) vars.value_weight.push_back(tape.leaf(m));
  vars.output_weight = tape.leaf(params.output_weight);
  vars.fc_weight = tape.leaf(params.fc_weight);
  vars.norm_scale = tape.leaf(params.norm_scale);
  vars.norm_shift = tape.leaf(params.norm_shift);
  return vars;
}

Tape::VarId build_prototype_graph(Tape& tape, const ParamVars& vars,
                                  const AttentionConfig& config, const Matrix& support_stack,
                                  Mode mode, Rng* dropout_rng, Tape::VarId* refined_out) {
  if (support_stack.rows < 1)
    throw std::invalid_argument("generator: need at least one support row");
  if (support_stack.cols != config.model_dim)
    throw std::invalid_argument("generator: support dimension " +
                                std::to_string(support_stack.cols) + " does not match model_dim " +
                                std::to_string(config.model_dim));

  const Tape::VarId x = tape.leaf(support_stack);
  const double logit_scale = 1.0 / std::sqrt(static_cast<double>(config.key_dim));

  std::vector<Tape::VarId> head_outputs;
  head_outputs.reserve(config.heads);
  for (int h = 0; h < config.heads; ++h) {
    const Tape::VarId q = tape.matmul(x, vars.query_weight[h]);
    const Tape::VarId k = tape.matmul(x, vars.key_weight[h]);
    const Tape::VarId v = tape.matmul(x, vars.value_weight[h]);
    const Tape::VarId logits = tape.scale(tape.matmul(q, tape.transpose(k)), logit_scale);
    const Tape::VarId weights = tape.softmax_rows(logits);
    head_outputs.push_back(tape.matmul(weights, v));
  }

  const Tape::VarId concat =
      config.heads == 1 ? head_outputs[0] : tape.concat_cols(head_outputs);
  const Tape::VarId attended = tape.matmul(concat, vars.output_weight);
  Tape::VarId pre_norm = tape.add(x, tape.matmul(attended, vars.fc_weight));

  if (mode == Mode::kTrain && config.dropout_rate > 0.0) {
    if (dropout_rng == nullptr)
      throw std::invalid_argument("generator: train mode with dropout needs an rng");
    pre_norm = tape.dropout(pre_norm, config.dropout_rate, *dropout_rng);
  }

  const Tape::VarId refined =
      tape.layer_norm_rows(pre_norm, vars.norm_scale, vars.norm_shift, config.norm_eps);
  if (refined_out != nullptr) *refined_out = refined;
  return tape.mean_rows(refined);
}

GeneratorOutput generate_prototype(const GeneratorParams& params, const AttentionConfig& config,
                                   const Matrix& support_stack, Mode mode, Rng* dropout_rng) {
  params.validate_shapes(config);
  Tape tape;
  const ParamVars vars = record_params(tape, params);
  Tape::VarId refined = -1;
  const Tape::VarId proto =
      build_prototype_graph(tape, vars, config, support_stack, mode, dropout_rng, &refined);
  return {tape.value(proto), tape.value(refined)};
}

GeneratorParams read_param_grads(const Tape& tape, const ParamVars& vars) {
  GeneratorParams grads;
  for (Tape::VarId id : vars.query_weight) grads.query_weight.push_back(tape.grad(id));
  for (Tape::VarId id : vars.key_weight) grads.key_weight.push_back(tape.grad(id));
  for (Tape::VarId id : vars.value_weight) grads.value_weight.push_back(tape.grad(id));
  grads.output_weight = tape.grad(vars.output_weight);
  grads.fc_weight = tape.grad(vars.fc_weight);
  grads.norm_scale = tape.grad(vars.norm_scale);
  grads.norm_shift = tape.grad(vars.norm_shift);
  return grads;
}

namespace {

constexpr const char* kCheckpointMagic = "protogen-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_double(std::ofstream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

[[noreturn]] void load_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path + ": " + what);
}

}  // namespace

void save_params(const GeneratorParams& params, const AttentionConfig& config,
                 const std::string& path) {
  params.validate_shapes(config);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << kCheckpointMagic << " " << kCheckpointVersion << "\n";
  out << "heads " << config.heads << "\n";
  out << "model_dim " << config.model_dim << "\n";
  out << "key_dim " << config.key_dim << "\n";
  out << "value_dim " << config.value_dim << "\n";
  out << "dropout_rate ";
  write_double(out, config.dropout_rate);
  out << "\nnorm_eps ";
  write_double(out, config.norm_eps);
  out << "\n";

  const auto names = GeneratorParams::matrix_names(config.heads);
  const auto mats = params.matrices();
  for (size_t i = 0; i < mats.size(); ++i) {
    const Matrix& m = *mats[i];
    out << "matrix " << names[i] << " " << m.rows << " " << m.cols << "\n";
    for (int r = 0; r < m.rows; ++r) {
      for (int c = 0; c < m.cols; ++c) {
        if (c) out << ' ';
        write_double(out, m(r, c));
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  std::string magic;
  int version = 0;
  if (!(in >> magic >> version)) load_fail(path, "missing header");
  if (magic != kCheckpointMagic) load_fail(path, "not a checkpoint file");
  if (version != kCheckpointVersion)
    load_fail(path, "format version " + std::to_string(version) + " unsupported, expected " +
                        std::to_string(kCheckpointVersion));

  AttentionConfig config;
  auto read_field = [&](const char* key, auto& value) {
    std::string k;
    if (!(in >> k >> value)) load_fail(path, std::string("truncated while reading ") + key);
    if (k != key) load_fail(path, "expected field '" + std::string(key) + "', got '" + k + "'");
  };
  read_field("heads", config.heads);
  read_field("model_dim", config.model_dim);
  read_field("key_dim", config.key_dim);
  read_field("value_dim", config.value_dim);
  read_field("dropout_rate", config.dropout_rate);
  read_field("norm_eps", config.norm_eps);
  config.validate();

  GeneratorParams params;
  params.query_weight.resize(config.heads);
  params.key_weight.resize(config.heads);
  params.value_weight.resize(config.heads);
  const auto names = GeneratorParams::matrix_names(config.heads);
  const auto mats = params.matrices();
  for (size_t i = 0; i < mats.size(); ++i) {
    std::string tag, name;
    int rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols)) load_fail(path, "truncated before " + names[i]);
    if (tag != "matrix" || name != names[i])
      load_fail(path, "expected matrix '" + names[i] + "', got '" + tag + " " + name + "'");
    if (rows < 1 || cols < 1) load_fail(path, names[i] + ": bad shape");
    Matrix m(rows, cols);
    for (double& v : m.data) {
      if (!(in >> v)) load_fail(path, names[i] + ": truncated values");
      if (!std::isfinite(v)) load_fail(path, names[i] + ": non-finite value");
    }
    *mats[i] = std::move(m);
  }
  std::string tail;
  if (!(in >> tail) || tail != "end") load_fail(path, "missing end marker");

  // Shape errors against the embedded config are explicit load errors.
  try {
    params.validate_shapes(config);
  } catch (const std::invalid_argument& e) {
    load_fail(path, e.what());
  }
  return {std::move(params), config};
}

}  // namespace protogen
