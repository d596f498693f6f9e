#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

#include "protogen/matrix.hpp"
#include "protogen/reference.hpp"
#include "protogen/rng.hpp"
#include "support.hpp"

using namespace protogen;
using testsupport::random_matrix;
using testsupport::random_vector;

TEST_CASE("matmul known products") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(max_abs_diff(matmul(Matrix::identity(2), a), a) == 0.0);

  const Matrix z = matmul(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{0}, {0}}));
  CHECK(z.rows == 1);
  CHECK(z.cols == 1);
  CHECK(z(0, 0) == 0.0);

  // hand arithmetic: [[1,2],[3,4]] * [[5],[6]] = [[17],[39]]
  const Matrix p = matmul(a, Matrix::from_rows({{5}, {6}}));
  CHECK(p(0, 0) == doctest::Approx(17).epsilon(1e-15));
  CHECK(p(1, 0) == doctest::Approx(39).epsilon(1e-15));
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  const Matrix a(3, 4), b(5, 2);
  try {
    matmul(a, b);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x4") != std::string::npos);
    CHECK(msg.find("5x2") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(42);
  for (int it = 0; it < 30; ++it) {
    const Matrix a = random_matrix(4, 6, rng);
    const Matrix b = random_matrix(6, 3, rng);
    const Matrix c = random_matrix(3, 5, rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
  }
}

TEST_CASE("parallel kernels agree bitwise with the serial reference") {
  Rng rng(7);
  // Sizes straddle the parallel cutoff.
  for (auto [n, m, k] :
       {std::tuple{3, 4, 5}, std::tuple{40, 50, 30}, std::tuple{150, 160, 170}}) {
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, m, rng);
    CHECK(max_abs_diff(matmul(a, b), serial::matmul(a, b)) == 0.0);
  }
  for (int rows : {3, 300}) {
    const Matrix m = random_matrix(rows, 64, rng);
    CHECK(max_abs_diff(softmax_rows(m), serial::softmax_rows(m)) == 0.0);
    const std::vector<double> gamma = random_vector(64, rng);
    const std::vector<double> beta = random_vector(64, rng);
    CHECK(max_abs_diff(layer_norm_rows(m, gamma, beta, 1e-5),
                       serial::layer_norm_rows(m, gamma, beta, 1e-5)) == 0.0);
  }
}

TEST_CASE("softmax rows on fixed inputs") {
  const Matrix u = softmax_rows(Matrix::from_rows({{0, 0, 0}}));
  for (int j = 0; j < 3; ++j) CHECK(u(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Matrix single = softmax_rows(Matrix::from_rows({{123.456}}));
  CHECK(single(0, 0) == 1.0);

  // closed form: e^0 / (e^0 + 3) = 1/4
  const Matrix two = softmax_rows(Matrix::from_rows({{0.0, std::log(3.0)}}));
  CHECK(two(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(two(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax row sums and shift invariance") {
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    const double spread = it % 3 == 0 ? 1000.0 : 3.0;  // include large logits
    Matrix m = random_matrix(5, 7, rng, spread);
    const Matrix s = softmax_rows(m);
    for (int i = 0; i < s.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < s.cols; ++j) {
        sum += s(i, j);
        CHECK(s(i, j) >= 0.0);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    const double c = rng.normal() * 10.0;
    Matrix shifted = m;
    for (double& v : shifted.data) v += c;
    CHECK(max_abs_diff(softmax_rows(shifted), s) < 1e-12);
  }
}

TEST_CASE("layer_norm fixed cases") {
  const std::vector<double> ones4(4, 1.0), zeros4(4, 0.0);
  const auto constant = layer_norm({1, 1, 1, 1}, ones4, zeros4, 1e-5);
  for (double v : constant) CHECK(std::abs(v) < 1e-2);

  // zero-variance input comes out as beta exactly
  const auto with_beta = layer_norm({5, 5, 5}, {1, 1, 1}, {7, 8, 9}, 1e-5);
  CHECK(with_beta[0] == 7.0);
  CHECK(with_beta[1] == 8.0);
  CHECK(with_beta[2] == 9.0);

  // already normalized, eps -> 0 limit
  const auto pm = layer_norm({1, -1}, {1, 1}, {0, 0}, 1e-15);
  CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-9));

  // var([0,2,4]) = 8/3
  const auto v = layer_norm({0, 2, 4}, {1, 1, 1}, {0, 0, 0}, 1e-5);
  const double expect = 2.0 / std::sqrt(8.0 / 3.0 + 1e-5);
  CHECK(v[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("layer_norm standardizes non-constant input") {
  Rng rng(13);
  for (int it = 0; it < 40; ++it) {
    const int n = 3 + static_cast<int>(rng.bounded(12));
    const std::vector<double> v = random_vector(n, rng, 2.0);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    if (var < 1e-12) continue;
    const double eps = 1e-8 * var;
    const auto out = layer_norm(v, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), eps);
    double out_mean = 0.0;
    for (double x : out) out_mean += x;
    out_mean /= n;
    CHECK(std::abs(out_mean) < 1e-10);
    double out_var = 0.0;
    for (double x : out) out_var += (x - out_mean) * (x - out_mean);
    out_var /= n;
    CHECK(std::abs(out_var - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm validates arguments") {
  CHECK_THROWS_AS(layer_norm({1, 2}, {1}, {0, 0}, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(layer_norm({1, 2}, {1, 1}, {0, 0}, 0.0), std::invalid_argument);
}

TEST_CASE("mean_rows and transpose basics") {
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const Matrix mean = mean_rows(m);
  CHECK(mean(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(mean(0, 1) == doctest::Approx(4.0).epsilon(1e-15));
  const Matrix t = transpose(m);
  CHECK(t.rows == 2);
  CHECK(t.cols == 3);
  CHECK(t(1, 2) == 6.0);
  CHECK(max_abs_diff(transpose(t), m) == 0.0);
}

TEST_CASE("kernel outputs stay finite on rough inputs") {
  Rng rng(99);
  const Matrix big = random_matrix(8, 8, rng, 1e8);
  CHECK(all_finite(softmax_rows(big)));
  CHECK(all_finite(matmul(big, big)));
  CHECK(all_finite(layer_norm_rows(big, random_vector(8, rng), random_vector(8, rng), 1e-5)));
}
