#include <doctest.h>

#include <cstring>
#include <vector>

#include "edict/kernels.hpp"
#include "edict/parallel.hpp"
#include "edict/rng.hpp"

using namespace edict;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3.0, 3.0);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct ThreadGuard {
  int saved = parallel::max_threads();
  ~ThreadGuard() { parallel::set_max_threads(saved); }
};

}  // namespace

TEST_CASE("omp kernels are bitwise equal to the serial reference") {
  ThreadGuard guard;
  for (int threads : {1, 2, 4, 7}) {
    parallel::set_max_threads(threads);
    for (std::size_t n : {std::size_t{1}, std::size_t{1000}, std::size_t{1025}, parallel::kParallelThreshold + 17,
                          std::size_t{200000}}) {
      CAPTURE(threads);
      CAPTURE(n);
      const auto x = random_vector(n, 1);
      const auto y = random_vector(n, 2);
      std::vector<double> s(n), o(n), d(n);

      kernels::serial::axpby(0.3, x, -1.7, y, s);
      kernels::omp::axpby(0.3, x, -1.7, y, o);
      kernels::axpby(0.3, x, -1.7, y, d);
      CHECK(same_bits(s, o));
      CHECK(same_bits(s, d));

      kernels::serial::affine_solve(x, 0.4, y, 1.3, s);
      kernels::omp::affine_solve(x, 0.4, y, 1.3, o);
      CHECK(same_bits(s, o));

      kernels::serial::mix(0.93, x, y, s);
      kernels::omp::mix(0.93, x, y, o);
      CHECK(same_bits(s, o));

      kernels::serial::unmix(0.93, x, y, s);
      kernels::omp::unmix(0.93, x, y, o);
      CHECK(same_bits(s, o));

      CHECK(same_bits(kernels::serial::dot(x, y), kernels::omp::dot(x, y)));
      CHECK(same_bits(kernels::serial::dot(x, y), kernels::dot(x, y)));
    }
  }
}

TEST_CASE("matvec serial and omp agree bitwise") {
  ThreadGuard guard;
  parallel::set_max_threads(3);
  const std::size_t rows = 300, cols = 257;
  const auto m = random_vector(rows * cols, 5);
  const auto x = random_vector(cols, 6);
  std::vector<double> s(rows), o(rows), d(rows);
  kernels::serial::matvec(m, rows, cols, x, s);
  kernels::omp::matvec(m, rows, cols, x, o);
  kernels::matvec(m, rows, cols, x, d);
  CHECK(same_bits(s, o));
  CHECK(same_bits(s, d));
  double r0 = 0.0;
  for (std::size_t c = 0; c < cols; ++c) r0 += m[c] * x[c];
  CHECK(same_bits(r0, s[0]));
}

TEST_CASE("mix keeps x == y fixed and p == 1 returns x") {
  const auto x = random_vector(64, 9);
  const auto y = random_vector(64, 10);
  std::vector<double> out(64);
  kernels::serial::mix(0.37, x, x, out);
  CHECK(same_bits(out, x));
  kernels::serial::mix(1.0, x, y, out);
  CHECK(same_bits(out, x));
  kernels::serial::unmix(1.0, x, y, out);
  CHECK(same_bits(out, x));
}

TEST_CASE("dot uses a fixed block order") {
  const std::size_t n = 3 * kernels::kReduceBlock + 5;
  const auto x = random_vector(n, 3);
  const auto y = random_vector(n, 4);
  double expected = 0.0;
  for (std::size_t b = 0; b < n; b += kernels::kReduceBlock) {
    double acc = 0.0;
    for (std::size_t i = b; i < std::min(n, b + kernels::kReduceBlock); ++i) acc += x[i] * y[i];
    expected += acc;
  }
  CHECK(same_bits(expected, kernels::serial::dot(x, y)));
}
