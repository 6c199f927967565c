#include "edict/kernels.hpp"

#include <algorithm>
#include <vector>

#include <omp.h>

#include "edict/parallel.hpp"

namespace edict::kernels {

namespace {

using Index = std::ptrdiff_t;

double block_sum(const double* x, const double* y, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += x[i] * y[i];
  return acc;
}

bool use_omp(std::size_t n) {
  return n >= parallel::kParallelThreshold && !parallel::in_parallel_region() && parallel::max_threads() > 1;
}

void copy(std::span<const double> src, std::span<double> out) {
  std::copy(src.begin(), src.begin() + static_cast<Index>(out.size()), out.begin());
}

void copy_omp(std::span<const double> src, std::span<double> out) {
  const Index n = ssize(out);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = src[i];
}

}  // namespace

namespace serial {

void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
}

void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x[i] - b * y[i]) / a;
}

void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out) {
  if (p == 1.0) return copy(x, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + p * (x[i] - y[i]);
}

void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out) {
  if (p == 1.0) return copy(mixed, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + (mixed[i] - y[i]) / p;
}

void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += kReduceBlock) {
    total += block_sum(x.data(), y.data(), begin, std::min(n, begin + kReduceBlock));
  }
  return total;
}

}  // namespace serial

namespace omp {

void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out) {
  const Index n = ssize(out);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out) {
  const Index n = ssize(out);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = (x[i] - b * y[i]) / a;
}

void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out) {
  const Index n = ssize(out);
  if (p == 1.0) return copy_omp(x, out);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = y[i] + p * (x[i] - y[i]);
}

void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out) {
  const Index n = ssize(out);
  if (p == 1.0) return copy_omp(mixed, out);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = y[i] + (mixed[i] - y[i]) / p;
}

void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out) {
  const Index n = static_cast<Index>(rows);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < n; ++r) {
    const double* row = m.data() + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const Index blocks = static_cast<Index>((n + kReduceBlock - 1) / kReduceBlock);
  std::vector<double> partial(static_cast<std::size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kReduceBlock;
    partial[b] = block_sum(x.data(), y.data(), begin, std::min(n, begin + kReduceBlock));
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace omp

void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out) {
  use_omp(out.size()) ? omp::axpby(a, x, b, y, out) : serial::axpby(a, x, b, y, out);
}

void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out) {
  use_omp(out.size()) ? omp::affine_solve(x, b, y, a, out) : serial::affine_solve(x, b, y, a, out);
}

void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out) {
  use_omp(out.size()) ? omp::mix(p, x, y, out) : serial::mix(p, x, y, out);
}

void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out) {
  use_omp(out.size()) ? omp::unmix(p, mixed, y, out) : serial::unmix(p, mixed, y, out);
}

void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out) {
  use_omp(rows * cols) ? omp::matvec(m, rows, cols, x, out) : serial::matvec(m, rows, cols, x, out);
}

double dot(std::span<const double> x, std::span<const double> y) {
  return use_omp(x.size()) ? omp::dot(x, y) : serial::dot(x, y);
}

}  // namespace edict::kernels
