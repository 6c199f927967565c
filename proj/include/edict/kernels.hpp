#pragma once

// Flat-array kernels behind the Tensor arithmetic. Every kernel exists twice:
// `serial` is the reference, `omp` is the OpenMP version. Elementwise kernels
// are bitwise identical between the two. Reductions sum fixed-size blocks in
// index order and then combine block sums serially, so their results do not
// depend on the thread count either.

#include <cstddef>
#include <span>

namespace edict::kernels {

inline constexpr std::size_t kReduceBlock = 1024;

namespace serial {
void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out);
void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out);
void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out);
void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out);
// out = m * x for a row-major rows x cols matrix.
void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out);
double dot(std::span<const double> x, std::span<const double> y);
}  // namespace serial

namespace omp {
void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out);
void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out);
void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out);
void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out);
void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out);
double dot(std::span<const double> x, std::span<const double> y);
}  // namespace omp

// Dispatching entry points used by the library: OpenMP above the size
// threshold and outside an enclosing parallel region, serial otherwise.
void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out);
void affine_solve(std::span<const double> x, double b, std::span<const double> y, double a, std::span<double> out);
void mix(double p, std::span<const double> x, std::span<const double> y, std::span<double> out);
void unmix(double p, std::span<const double> mixed, std::span<const double> y, std::span<double> out);
void matvec(std::span<const double> m, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> out);
double dot(std::span<const double> x, std::span<const double> y);

}  // namespace edict::kernels
