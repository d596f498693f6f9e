#include "protogen/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace protogen {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error("config " + path + ": line " + std::to_string(line) + ": " + what);
}

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
  int line;
};

std::vector<KeyValue> parse_ini(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::vector<KeyValue> entries;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_fail(path, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) config_fail(path, line_no, "empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) config_fail(path, line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_fail(path, line_no, "empty key");
    if (section.empty()) config_fail(path, line_no, "key '" + key + "' outside any section");
    entries.push_back({section, key, value, line_no});
  }
  return entries;
}

int parse_int(const KeyValue& kv, const std::string& path) {
  int v = 0;
  auto [p, ec] = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
  if (ec != std::errc() || p != kv.value.data() + kv.value.size())
    config_fail(path, kv.line, kv.key + ": not an integer: '" + kv.value + "'");
  return v;
}

uint64_t parse_u64(const KeyValue& kv, const std::string& path) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
  if (ec != std::errc() || p != kv.value.data() + kv.value.size())
    config_fail(path, kv.line, kv.key + ": not a nonnegative integer: '" + kv.value + "'");
  return v;
}

double parse_real(const KeyValue& kv, const std::string& path) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(kv.value.data(), kv.value.data() + kv.value.size(), v);
  if (ec != std::errc() || p != kv.value.data() + kv.value.size() || !std::isfinite(v))
    config_fail(path, kv.line, kv.key + ": not a finite number: '" + kv.value + "'");
  return v;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  for (const KeyValue& kv : parse_ini(path)) {
    const std::string id = kv.section + "." + kv.key;
    if (kv.section == "data") {
      if (kv.key == "classes") cfg.data.class_count = parse_int(kv, path);
      else if (kv.key == "dim") cfg.data.dim = parse_int(kv, path);
      else if (kv.key == "samples_per_class") cfg.data.samples_per_class = parse_int(kv, path);
      else if (kv.key == "mean_scale") cfg.data.mean_scale = parse_real(kv, path);
      else if (kv.key == "within_std") cfg.data.within_std = parse_real(kv, path);
      else if (kv.key == "outlier_fraction") cfg.data.outlier_fraction = parse_real(kv, path);
      else if (kv.key == "outlier_shift") cfg.data.outlier_shift = parse_real(kv, path);
      else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "episode") {
      if (kv.key == "n_way") cfg.episode.n_way = parse_int(kv, path);
      else if (kv.key == "k_shot") cfg.episode.k_shot = parse_int(kv, path);
      else if (kv.key == "queries_per_class") cfg.episode.queries_per_class = parse_int(kv, path);
      else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "generator") {
      if (kv.key == "heads") cfg.generator.heads = parse_int(kv, path);
      else if (kv.key == "key_dim") cfg.generator.key_dim = parse_int(kv, path);
      else if (kv.key == "value_dim") cfg.generator.value_dim = parse_int(kv, path);
      else if (kv.key == "dropout") cfg.generator.dropout_rate = parse_real(kv, path);
      else if (kv.key == "norm_eps") cfg.generator.norm_eps = parse_real(kv, path);
      else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "train") {
      if (kv.key == "epochs") cfg.train.epochs = parse_int(kv, path);
      else if (kv.key == "episodes_per_epoch") cfg.train.episodes_per_epoch = parse_int(kv, path);
      else if (kv.key == "learning_rate") cfg.train.learning_rate = parse_real(kv, path);
      else if (kv.key == "decay_factor") cfg.train.decay_factor = parse_real(kv, path);
      else if (kv.key == "patience") cfg.train.patience = parse_int(kv, path);
      else if (kv.key == "momentum") cfg.train.momentum = parse_real(kv, path);
      else if (kv.key == "val_episodes") cfg.train.val_episodes = parse_int(kv, path);
      else if (kv.key == "loss") {
        if (kv.value == "euclidean") cfg.train.loss = LossKind::kEuclidean;
        else if (kv.value == "squared") cfg.train.loss = LossKind::kSquaredEuclidean;
        else config_fail(path, kv.line, "loss must be euclidean|squared, got '" + kv.value + "'");
      } else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "eval") {
      if (kv.key == "episodes") cfg.eval.episodes = parse_int(kv, path);
      else if (kv.key == "strategy") {
        try {
          cfg.eval.strategy = strategy_from_name(kv.value);
        } catch (const std::invalid_argument& e) {
          config_fail(path, kv.line, e.what());
        }
      } else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "paths") {
      if (kv.key == "dataset_out") cfg.paths.dataset_out = kv.value;
      else if (kv.key == "train_data") cfg.paths.train_data = kv.value;
      else if (kv.key == "val_data") cfg.paths.val_data = kv.value;
      else if (kv.key == "eval_data") cfg.paths.eval_data = kv.value;
      else if (kv.key == "checkpoint") cfg.paths.checkpoint = kv.value;
      else if (kv.key == "train_log") cfg.paths.train_log = kv.value;
      else if (kv.key == "report") cfg.paths.report = kv.value;
      else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else if (kv.section == "run") {
      if (kv.key == "seed") cfg.seed = parse_u64(kv, path);
      else config_fail(path, kv.line, "unknown key '" + id + "'");
    } else {
      config_fail(path, kv.line, "unknown section '" + kv.section + "'");
    }
  }
  return cfg;
}

AttentionConfig resolve_generator_config(const RunConfig& config, int model_dim) {
  AttentionConfig g = config.generator;
  g.model_dim = model_dim;
  if (g.key_dim == 0) g.key_dim = std::max(1, model_dim / std::max(1, g.heads));
  if (g.value_dim == 0) g.value_dim = std::max(1, model_dim / std::max(1, g.heads));
  g.validate();
  return g;
}

}  // namespace protogen
