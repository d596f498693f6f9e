#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "protogen/generator.hpp"
#include "protogen/matrix.hpp"
#include "protogen/reference.hpp"
#include "protogen/rng.hpp"
#include "protogen/tape.hpp"
#include "support.hpp"

using namespace protogen;
using testsupport::max_rel_error_fd;
using testsupport::random_matrix;

namespace {

AttentionConfig small_config(int heads = 2, int model_dim = 8, int kv = 4) {
  AttentionConfig cfg;
  cfg.heads = heads;
  cfg.model_dim = model_dim;
  cfg.key_dim = kv;
  cfg.value_dim = kv;
  cfg.dropout_rate = 0.0;
  return cfg;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("init_params: affine identity, xavier bounds, determinism") {
  const AttentionConfig cfg = small_config(4, 16, 4);
  const GeneratorParams a = init_params(cfg, 9);
  for (double v : a.norm_scale.data) CHECK(v == 1.0);
  for (double v : a.norm_shift.data) CHECK(v == 0.0);

  const double limit_q = std::sqrt(6.0 / (cfg.model_dim + cfg.key_dim));
  for (const Matrix& w : a.query_weight)
    for (double v : w.data) CHECK(std::abs(v) <= limit_q);

  const GeneratorParams b = init_params(cfg, 9);
  const auto ma = a.matrices(), mb = b.matrices();
  for (size_t i = 0; i < ma.size(); ++i) CHECK(ma[i]->data == mb[i]->data);

  const GeneratorParams c = init_params(cfg, 10);
  CHECK(max_abs_diff(a.fc_weight, c.fc_weight) > 0.0);
}

TEST_CASE("config validation") {
  AttentionConfig cfg = small_config();
  cfg.heads = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.norm_eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("K=1: attention weight collapses to 1") {
  const AttentionConfig cfg = small_config(2, 6, 3);
  Rng rng(21);
  const GeneratorParams p = init_params(cfg, 31);
  const Matrix x = random_matrix(1, cfg.model_dim, rng);

  // By hand: z_h = x W_V[h]; z* = concat_h(z_h) W_O; out = LN(x + z* W_FC).
  Matrix concat(1, cfg.value_dim * cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    const Matrix v = matmul(x, p.value_weight[h]);
    for (int j = 0; j < cfg.value_dim; ++j) concat(0, h * cfg.value_dim + j) = v(0, j);
  }
  const Matrix pre = add(x, matmul(matmul(concat, p.output_weight), p.fc_weight));
  const Matrix expect =
      layer_norm_rows(pre, p.norm_scale.data, p.norm_shift.data, cfg.norm_eps);

  const GeneratorOutput out = generate_prototype(p, cfg, x, Mode::kEval);
  CHECK(max_abs_diff(out.prototype, expect) < 1e-12);
  CHECK(max_abs_diff(out.refined, expect) < 1e-12);
}

TEST_CASE("zero query/key weights give uniform attention") {
  const AttentionConfig cfg = small_config(2, 5, 3);
  Rng rng(22);
  GeneratorParams p = init_params(cfg, 32);
  for (Matrix& w : p.query_weight) w.data.assign(w.size(), 0.0);
  for (Matrix& w : p.key_weight) w.data.assign(w.size(), 0.0);

  const int k = 4;
  const Matrix x = random_matrix(k, cfg.model_dim, rng);

  // Uniform weights average the value rows: every z_h row is colmean(x W_V[h]).
  Matrix concat(k, cfg.value_dim * cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    const Matrix v = matmul(x, p.value_weight[h]);
    const Matrix vbar = mean_rows(v);
    for (int r = 0; r < k; ++r)
      for (int j = 0; j < cfg.value_dim; ++j) concat(r, h * cfg.value_dim + j) = vbar(0, j);
  }
  const Matrix pre = add(x, matmul(matmul(concat, p.output_weight), p.fc_weight));
  const Matrix refined =
      layer_norm_rows(pre, p.norm_scale.data, p.norm_shift.data, cfg.norm_eps);
  const Matrix expect = mean_rows(refined);

  const GeneratorOutput out = generate_prototype(p, cfg, x, Mode::kEval);
  CHECK(max_abs_diff(out.prototype, expect) < 1e-12);
}

TEST_CASE("matches the straight-line reference evaluation") {
  // K=5, d_model=8, H=2, d_k=d_v=4, dropout=0.
  const AttentionConfig cfg = small_config(2, 8, 4);
  for (uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(600 + seed);
    const GeneratorParams p = init_params(cfg, 700 + seed);
    const Matrix x = random_matrix(5, cfg.model_dim, rng);
    const Matrix expect = serial::generate_prototype(p, cfg, x);
    const GeneratorOutput out = generate_prototype(p, cfg, x, Mode::kEval);
    CHECK(max_abs_diff(out.prototype, expect) < 1e-9);
  }
}

TEST_CASE("attention weights per head sum to one") {
  const AttentionConfig cfg = small_config(3, 9, 3);
  Rng rng(23);
  const GeneratorParams p = init_params(cfg, 33);
  const Matrix x = random_matrix(6, cfg.model_dim, rng, 4.0);
  for (int h = 0; h < cfg.heads; ++h) {
    const Matrix q = matmul(x, p.query_weight[h]);
    const Matrix k = matmul(x, p.key_weight[h]);
    const Matrix w =
        softmax_rows(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(cfg.key_dim))));
    for (int i = 0; i < w.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < w.cols; ++j) sum += w(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("prototype is invariant to support order with dropout off") {
  const AttentionConfig cfg = small_config(2, 8, 4);
  Rng rng(24);
  for (int it = 0; it < 100; ++it) {
    const GeneratorParams p = init_params(cfg, 800 + it);
    const int k = 2 + static_cast<int>(rng.bounded(6));
    const Matrix x = random_matrix(k, cfg.model_dim, rng);
    Matrix shuffled(k, cfg.model_dim);
    std::vector<int> perm(k);
    for (int i = 0; i < k; ++i) perm[i] = i;
    for (int i = k - 1; i > 0; --i) std::swap(perm[i], perm[rng.bounded(i + 1)]);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < cfg.model_dim; ++j) shuffled(i, j) = x(perm[i], j);

    const Matrix a = generate_prototype(p, cfg, x, Mode::kEval).prototype;
    const Matrix b = generate_prototype(p, cfg, shuffled, Mode::kEval).prototype;
    CHECK(max_abs_diff(a, b) < 1e-9);
  }
}

TEST_CASE("eval mode is deterministic") {
  const AttentionConfig cfg = small_config();
  Rng rng(25);
  const GeneratorParams p = init_params(cfg, 35);
  const Matrix x = random_matrix(4, cfg.model_dim, rng);
  const Matrix a = generate_prototype(p, cfg, x, Mode::kEval).prototype;
  const Matrix b = generate_prototype(p, cfg, x, Mode::kEval).prototype;
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("train-mode dropout zeroes the configured fraction") {
  AttentionConfig cfg = small_config(1, 8, 4);
  cfg.dropout_rate = 0.3;
  const GeneratorParams p = init_params(cfg, 36);
  Rng rng(26);
  Rng drop_rng(27);
  const Matrix x = random_matrix(5, cfg.model_dim, rng);

  // Drive the dropout op directly at the generator's configured rate and
  // count zeroed entries over many draws.
  const int draws = 10000;
  long zeroed = 0, total = 0;
  for (int d = 0; d < draws; ++d) {
    Tape tape;
    const auto id = tape.dropout(tape.leaf(x), cfg.dropout_rate, drop_rng);
    const Matrix& v = tape.value(id);
    for (size_t i = 0; i < v.size(); ++i) {
      zeroed += v.data[i] == 0.0 ? 1 : 0;
      ++total;
    }
  }
  const double frac = static_cast<double>(zeroed) / total;
  const double sigma = std::sqrt(0.3 * 0.7 / total);
  CHECK(std::abs(frac - 0.3) < 3.0 * sigma);

  // train mode without an rng must fail when dropout is active
  CHECK_THROWS_AS(generate_prototype(p, cfg, x, Mode::kTrain, nullptr), std::invalid_argument);

  // kept entries are scaled by 1/(1-p): values are either 0 or x/(1-p)
  Tape tape;
  const auto id = tape.dropout(tape.leaf(x), cfg.dropout_rate, drop_rng);
  const Matrix& v = tape.value(id);
  for (size_t i = 0; i < v.size(); ++i) {
    const bool kept = v.data[i] != 0.0;
    if (kept) CHECK(v.data[i] == doctest::Approx(x.data[i] / 0.7).epsilon(1e-12));
  }
}

TEST_CASE("generator loss gradient matches finite differences") {
  // The training distance loss ||f' - target|| differentiated through the whole
  // attention stack; the oracle is central differences on every parameter.
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const AttentionConfig cfg = small_config(2, 8, 4);
    Rng rng(900 + seed);
    GeneratorParams params = init_params(cfg, 910 + seed);
    const int k = 3;
    const Matrix x = random_matrix(k, cfg.model_dim, rng);
    const Matrix target = random_matrix(1, cfg.model_dim, rng);

    auto loss_value = [&]() {
      Tape tape;
      const ParamVars vars = record_params(tape, params);
      const auto proto = build_prototype_graph(tape, vars, cfg, x, Mode::kEval, nullptr);
      return tape.value(tape.euclidean_norm(tape.sub(proto, tape.leaf(target))))(0, 0);
    };

    Tape tape;
    const ParamVars vars = record_params(tape, params);
    const auto proto = build_prototype_graph(tape, vars, cfg, x, Mode::kEval, nullptr);
    tape.backward(tape.euclidean_norm(tape.sub(proto, tape.leaf(target))));
    const GeneratorParams grads = read_param_grads(tape, vars);

    // The oracle perturbs params in place and restores every entry.
    CHECK(max_rel_error_fd(params.matrices(), grads.matrices(), loss_value) < 1e-4);
  }
}

TEST_CASE("dimension mismatches are shape errors") {
  const AttentionConfig cfg = small_config(2, 8, 4);
  const GeneratorParams p = init_params(cfg, 40);
  Rng rng(41);
  const Matrix wrong = random_matrix(3, cfg.model_dim + 1, rng);
  CHECK_THROWS_AS(generate_prototype(p, cfg, wrong, Mode::kEval), std::invalid_argument);
  const Matrix empty(0, 8);
  CHECK_THROWS_AS(generate_prototype(p, cfg, empty, Mode::kEval), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  const AttentionConfig cfg = small_config(3, 12, 4);
  const GeneratorParams p = init_params(cfg, 50);
  const std::string path = temp_path("protogen_ckpt_roundtrip.txt");
  save_params(p, cfg, path);
  const LoadedParams loaded = load_params(path);
  CHECK(loaded.config.heads == cfg.heads);
  CHECK(loaded.config.model_dim == cfg.model_dim);
  CHECK(loaded.config.dropout_rate == cfg.dropout_rate);
  const auto ma = p.matrices(), mb = loaded.params.matrices();
  REQUIRE(ma.size() == mb.size());
  for (size_t i = 0; i < ma.size(); ++i) CHECK(ma[i]->data == mb[i]->data);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint load failures") {
  const AttentionConfig cfg = small_config();
  const GeneratorParams p = init_params(cfg, 51);
  const std::string path = temp_path("protogen_ckpt_bad.txt");

  SUBCASE("truncated file") {
    save_params(p, cfg, path);
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(path, std::ios::binary);
    out << content.substr(0, content.size() / 2);
    out.close();
    CHECK_THROWS_AS(load_params(path), std::runtime_error);
  }
  SUBCASE("version mismatch") {
    std::ofstream out(path, std::ios::binary);
    out << "protogen-checkpoint 99\nheads 1\n";
    out.close();
    try {
      load_params(path);
      FAIL("expected version error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("wrong magic") {
    std::ofstream out(path, std::ios::binary);
    out << "something-else 1\n";
    out.close();
    CHECK_THROWS_AS(load_params(path), std::runtime_error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_params("/nonexistent/x.ckpt"), std::runtime_error); }
  std::remove(path.c_str());
}
