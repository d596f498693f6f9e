// Compares the OpenMP kernels against the serial reference path: wall time
// and bitwise agreement. Run with different OMP_NUM_THREADS to see scaling.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "protogen/data.hpp"
#include "protogen/eval.hpp"
#include "protogen/generator.hpp"
#include "protogen/matrix.hpp"
#include "protogen/reference.hpp"
#include "protogen/rng.hpp"

using namespace protogen;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void bench_kernels() {
  Rng rng(7);
  std::printf("%-18s %10s %12s %12s %9s %10s\n", "kernel", "size", "serial_ms", "parallel_ms",
              "speedup", "max_diff");
  for (int n : {64, 128, 256, 512}) {
    const Matrix a = random_matrix(n, n, rng);
    const Matrix b = random_matrix(n, n, rng);
    Matrix out_serial, out_parallel;
    const double ts = time_ms([&] { out_serial = serial::matmul(a, b); }, 3);
    const double tp = time_ms([&] { out_parallel = matmul(a, b); }, 3);
    std::printf("%-18s %7dx%-3d %12.3f %12.3f %8.2fx %10.3g\n", "matmul", n, n, ts, tp, ts / tp,
                max_abs_diff(out_serial, out_parallel));
  }
  for (int rows : {1024, 8192}) {
    const int cols = 256;
    const Matrix m = random_matrix(rows, cols, rng);
    Matrix out_serial, out_parallel;
    const double ts = time_ms([&] { out_serial = serial::softmax_rows(m); }, 5);
    const double tp = time_ms([&] { out_parallel = softmax_rows(m); }, 5);
    std::printf("%-18s %7dx%-3d %12.3f %12.3f %8.2fx %10.3g\n", "softmax_rows", rows, cols, ts,
                tp, ts / tp, max_abs_diff(out_serial, out_parallel));

    std::vector<double> gamma(cols, 1.0), beta(cols, 0.0);
    const double ls = time_ms([&] { out_serial = serial::layer_norm_rows(m, gamma, beta, 1e-5); }, 5);
    const double lp = time_ms([&] { out_parallel = layer_norm_rows(m, gamma, beta, 1e-5); }, 5);
    std::printf("%-18s %7dx%-3d %12.3f %12.3f %8.2fx %10.3g\n", "layer_norm_rows", rows, cols,
                ls, lp, ls / lp, max_abs_diff(out_serial, out_parallel));
  }
}

void bench_episode_eval() {
  SyntheticSpec spec;
  spec.class_count = 20;
  spec.dim = 64;
  spec.samples_per_class = 100;
  spec.outlier_fraction = 0.2;
  spec.outlier_shift = 4.0;
  spec.seed = 3;
  const SyntheticData synth = generate_synthetic(spec);
  const GlobalPrototypeTable table = compute_global_prototypes(synth.dataset);

  AttentionConfig cfg{4, spec.dim, 16, 16, 0.0, 1e-5};
  const GeneratorParams params = init_params(cfg, 11);
  EpisodeSpec episode{5, 5, 15, 99};

  const int episodes = 200;
  const int max_threads = omp_get_max_threads();
  std::printf("\n%-28s %8s %12s\n", "episode evaluation", "threads", "ms");
  for (int threads : {1, max_threads}) {
    omp_set_num_threads(threads);
    const double t = time_ms(
        [&] { evaluate(synth.dataset, Strategy::kGenerator, episode, episodes, table, &params, &cfg); },
        3);
    std::printf("%-28s %8d %12.3f\n", "  generator, 200 episodes", threads, t);
    if (threads == max_threads) break;  // avoid rerunning when max_threads == 1
  }
  omp_set_num_threads(max_threads);
}

}  // namespace

int main() {
  std::printf("openmp max threads: %d\n\n", omp_get_max_threads());
  bench_kernels();
  bench_episode_eval();
  return 0;
}
