#include "protogen/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "protogen/rng.hpp"

namespace protogen {

void Dataset::rebuild_index() {
  rows_by_class.clear();
  for (size_t i = 0; i < samples.size(); ++i)
    rows_by_class[samples[i].class_id].push_back(static_cast<int>(i));
}

void SyntheticSpec::validate() const {
  if (class_count < 2) throw std::invalid_argument("synthetic: class_count must be >= 2");
  if (dim < 1) throw std::invalid_argument("synthetic: dim must be >= 1");
  if (samples_per_class < 1)
    throw std::invalid_argument("synthetic: samples_per_class must be >= 1");
  if (outlier_fraction < 0.0 || outlier_fraction > 1.0)
    throw std::invalid_argument("synthetic: outlier_fraction must be in [0,1]");
  if (outlier_shift < 0.0) throw std::invalid_argument("synthetic: outlier_shift must be >= 0");
  if (within_std < 0.0) throw std::invalid_argument("synthetic: within_std must be >= 0");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.dataset.dim = spec.dim;
  out.class_means = Matrix(spec.class_count, spec.dim);
  Rng rng(spec.seed);

  // within_std is the within-class deviation magnitude: per-coordinate sigma
  // is within_std/sqrt(dim), so E||x - mu||^2 = within_std^2 and an outlier
  // shifted by s*within_std sits s cluster-radii away at any dimension.
  const double coord_std = spec.within_std / std::sqrt(static_cast<double>(spec.dim));
  const int displaced = static_cast<int>(spec.outlier_fraction * spec.samples_per_class);
  const double shift_len = spec.outlier_shift * spec.within_std;
  std::vector<double> direction(spec.dim);

  for (int c = 0; c < spec.class_count; ++c) {
    for (int j = 0; j < spec.dim; ++j) out.class_means(c, j) = spec.mean_scale * rng.normal();
    for (int s = 0; s < spec.samples_per_class; ++s) {
      Embedding e;
      e.class_id = c;
      e.features.resize(spec.dim);
      for (int j = 0; j < spec.dim; ++j)
        e.features[j] = out.class_means(c, j) + coord_std * rng.normal();
      // The direction is drawn for every sample so that datasets differing
      // only in outlier_fraction share the same underlying draws.
      double norm = 0.0;
      for (int j = 0; j < spec.dim; ++j) {
        direction[j] = rng.normal();
        norm += direction[j] * direction[j];
      }
      norm = std::sqrt(norm);
      if (s < displaced) {
        if (norm < 1e-300) {
          direction.assign(spec.dim, 0.0);
          direction[0] = 1.0;
          norm = 1.0;
        }
        for (int j = 0; j < spec.dim; ++j) e.features[j] += direction[j] / norm * shift_len;
      }
      out.dataset.samples.push_back(std::move(e));
    }
  }
  out.dataset.rebuild_index();
  return out;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& s, const std::string& path, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    parse_fail(path, line, "not a number: '" + s + "'");
  if (!std::isfinite(v)) parse_fail(path, line, "non-finite value: '" + s + "'");
  return v;
}

}  // namespace

Dataset load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  Dataset ds;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, header expected");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.empty() || header[0] != "class_id")
    parse_fail(path, line_no, "header must start with 'class_id'");
  const int dim = static_cast<int>(header.size()) - 1;
  if (dim < 1) parse_fail(path, line_no, "header has no feature columns");
  for (int j = 0; j < dim; ++j) {
    const std::string expect = "f" + std::to_string(j);
    if (header[j + 1] != expect)
      parse_fail(path, line_no, "feature column " + std::to_string(j + 1) + " must be named '" +
                                    expect + "', got '" + header[j + 1] + "'");
  }
  ds.dim = dim;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != dim + 1)
      parse_fail(path, line_no, "expected " + std::to_string(dim + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    Embedding e;
    int id = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size() || id < 0)
      parse_fail(path, line_no, "class_id must be a nonnegative integer, got '" + fields[0] + "'");
    e.class_id = id;
    e.features.resize(dim);
    for (int j = 0; j < dim; ++j) e.features[j] = parse_double(fields[j + 1], path, line_no);
    ds.samples.push_back(std::move(e));
  }
  ds.rebuild_index();
  return ds;
}

void save_embeddings(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << "class_id";
  for (int j = 0; j < dataset.dim; ++j) out << ",f" << j;
  out << "\n";
  char buf[64];
  for (const Embedding& e : dataset.samples) {
    out << e.class_id;
    for (double v : e.features) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

const std::vector<double>& GlobalPrototypeTable::at(int class_id) const {
  auto it = prototypes.find(class_id);
  if (it == prototypes.end())
    throw std::invalid_argument("global prototype table has no class " +
                                std::to_string(class_id));
  return it->second;
}

GlobalPrototypeTable compute_global_prototypes(const Dataset& dataset) {
  if (dataset.samples.empty())
    throw std::invalid_argument("compute_global_prototypes: empty dataset");
  GlobalPrototypeTable table;
  table.dim = dataset.dim;
  // Left-to-right accumulation in dataset order keeps the result reproducible.
  for (const Embedding& e : dataset.samples) {
    auto& proto = table.prototypes[e.class_id];
    if (proto.empty()) proto.assign(dataset.dim, 0.0);
    for (int j = 0; j < dataset.dim; ++j) proto[j] += e.features[j];
    table.counts[e.class_id] += 1;
  }
  for (auto& [class_id, proto] : table.prototypes) {
    const int count = table.counts[class_id];
    for (double& v : proto) v /= count;
  }
  return table;
}

}  // namespace protogen
