#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "protogen/data.hpp"
#include "protogen/rng.hpp"
#include "support.hpp"

using namespace protogen;

namespace {

std::string temp_file(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

SyntheticSpec base_spec() {
  SyntheticSpec s;
  s.class_count = 5;
  s.dim = 16;
  s.samples_per_class = 100;
  s.outlier_fraction = 0.1;
  s.outlier_shift = 4.0;
  s.seed = 7;
  return s;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic in the seed") {
  const SyntheticSpec spec = base_spec();
  const SyntheticData a = generate_synthetic(spec);
  const SyntheticData b = generate_synthetic(spec);
  REQUIRE(a.dataset.samples.size() == b.dataset.samples.size());
  REQUIRE(a.dataset.samples.size() == 500);
  for (size_t i = 0; i < a.dataset.samples.size(); ++i) {
    CHECK(a.dataset.samples[i].class_id == b.dataset.samples[i].class_id);
    CHECK(a.dataset.samples[i].features == b.dataset.samples[i].features);  // byte-identical
  }
  CHECK(max_abs_diff(a.class_means, b.class_means) == 0.0);
}

TEST_CASE("outlier fraction displaces exactly the stated prefix") {
  SyntheticSpec clean = base_spec();
  clean.outlier_fraction = 0.0;
  clean.outlier_shift = 6.0;
  SyntheticSpec full = clean;
  full.outlier_fraction = 1.0;

  const Dataset a = generate_synthetic(clean).dataset;
  const Dataset b = generate_synthetic(full).dataset;
  const double expect = full.outlier_shift * full.within_std;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    // same seed, same base draws: displacement length is exactly shift*std
    const double d = euclidean_distance(a.samples[i].features, b.samples[i].features);
    CHECK(d == doctest::Approx(expect).epsilon(1e-12));
  }

  SyntheticSpec partial = clean;
  partial.outlier_fraction = 0.3;
  const Dataset c = generate_synthetic(partial).dataset;
  int displaced = 0;
  for (size_t i = 0; i < a.samples.size(); ++i)
    if (euclidean_distance(a.samples[i].features, c.samples[i].features) > 1e-9) ++displaced;
  CHECK(displaced == 5 * 30);  // floor(0.3 * 100) per class
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec s = base_spec();
  s.class_count = 1;
  CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
  s = base_spec();
  s.outlier_fraction = 1.5;
  CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
  s = base_spec();
  s.samples_per_class = 0;
  CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
}

TEST_CASE("csv round trip is exact") {
  Rng rng(3);
  Dataset ds;
  ds.dim = 7;
  for (int i = 0; i < 40; ++i) {
    Embedding e;
    e.class_id = i % 4;
    e.features = testsupport::random_vector(7, rng, 100.0);
    e.features[0] = 1.0 / 3.0;  // non-terminating decimal
    ds.samples.push_back(e);
  }
  ds.rebuild_index();
  const std::string path = temp_file("protogen_roundtrip.csv");
  save_embeddings(ds, path);
  const Dataset loaded = load_embeddings(path);
  REQUIRE(loaded.dim == ds.dim);
  REQUIRE(loaded.samples.size() == ds.samples.size());
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(loaded.samples[i].class_id == ds.samples[i].class_id);
    CHECK(loaded.samples[i].features == ds.samples[i].features);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv parsing") {
  const std::string path = temp_file("protogen_parse.csv");

  SUBCASE("single row") {
    write_file(path, "class_id,f0,f1\n0,1.0,2.0\n");
    const Dataset ds = load_embeddings(path);
    REQUIRE(ds.samples.size() == 1);
    CHECK(ds.dim == 2);
    CHECK(ds.samples[0].class_id == 0);
    CHECK(ds.samples[0].features == std::vector<double>{1.0, 2.0});
  }
  SUBCASE("empty data section keeps header dimension") {
    write_file(path, "class_id,f0,f1,f2\n");
    const Dataset ds = load_embeddings(path);
    CHECK(ds.dim == 3);
    CHECK(ds.samples.empty());
  }
  SUBCASE("wrong arity names the line") {
    write_file(path, "class_id,f0,f1\n0,1.0,2.0\n1,3.0\n");
    try {
      load_embeddings(path);
      FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("non-finite value rejected") {
    write_file(path, "class_id,f0\n0,nan\n");
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
    write_file(path, "class_id,f0\n0,inf\n");
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
  }
  SUBCASE("bad header rejected") {
    write_file(path, "id,f0\n");
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
    write_file(path, "class_id,f1,f0\n");
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
  }
  SUBCASE("negative class id rejected") {
    write_file(path, "class_id,f0\n-1,0.5\n");
    CHECK_THROWS_AS(load_embeddings(path), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_embeddings("/nonexistent/nowhere.csv"), std::runtime_error);
  }
  std::remove(path.c_str());
}

TEST_CASE("global prototypes on fixed datasets") {
  Dataset ds;
  ds.dim = 2;
  ds.samples = {{0, {1, 2}}, {0, {3, 4}}, {0, {5, 6}}, {1, {0, 0}}, {1, {2, 2}}, {2, {9, 9}}};
  ds.rebuild_index();
  const GlobalPrototypeTable table = compute_global_prototypes(ds);
  CHECK(table.at(0) == std::vector<double>{3, 4});   // hand arithmetic
  CHECK(table.at(1) == std::vector<double>{1, 1});   // midpoint
  CHECK(table.at(2) == std::vector<double>{9, 9});   // single sample
  CHECK(table.counts.at(0) == 3);
  CHECK_THROWS_AS(table.at(42), std::invalid_argument);
}

TEST_CASE("global prototypes reject an empty dataset") {
  Dataset ds;
  ds.dim = 3;
  CHECK_THROWS_AS(compute_global_prototypes(ds), std::invalid_argument);
}

TEST_CASE("global prototypes are permutation-invariant up to fp noise") {
  SyntheticSpec spec = base_spec();
  Dataset ds = generate_synthetic(spec).dataset;
  const GlobalPrototypeTable before = compute_global_prototypes(ds);

  Rng rng(17);
  for (size_t i = ds.samples.size(); i > 1; --i)
    std::swap(ds.samples[i - 1], ds.samples[rng.bounded(i)]);
  ds.rebuild_index();
  const GlobalPrototypeTable after = compute_global_prototypes(ds);
  for (const auto& [class_id, proto] : before.prototypes) {
    const auto& other = after.at(class_id);
    for (size_t j = 0; j < proto.size(); ++j) CHECK(std::abs(proto[j] - other[j]) < 1e-9);
  }
}

TEST_CASE("prototype error shrinks as per-class count grows") {
  // Mean over >= 20 seeds of ||g - mu|| for M in {10, 100, 1000}.
  const int kSeeds = 20;
  double avg[3] = {0, 0, 0};
  const int ms[3] = {10, 100, 1000};
  for (int seed = 0; seed < kSeeds; ++seed) {
    for (int mi = 0; mi < 3; ++mi) {
      SyntheticSpec spec;
      spec.class_count = 3;
      spec.dim = 8;
      spec.samples_per_class = ms[mi];
      spec.seed = 1000 + seed;
      const SyntheticData synth = generate_synthetic(spec);
      const GlobalPrototypeTable table = compute_global_prototypes(synth.dataset);
      for (int c = 0; c < spec.class_count; ++c) {
        const auto mu = synth.class_means.row_as_vector(c);
        avg[mi] += euclidean_distance(table.at(c), mu);
      }
    }
  }
  CHECK(avg[0] > avg[1]);
  CHECK(avg[1] > avg[2]);
}
