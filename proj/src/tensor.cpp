#include "edict/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "edict/error.hpp"
#include "edict/kernels.hpp"

namespace edict {

const char* to_string(IoErrorKind kind) {
  switch (kind) {
    case IoErrorKind::open_failed: return "open failed";
    case IoErrorKind::bad_magic: return "bad magic";
    case IoErrorKind::truncated: return "truncated payload";
    case IoErrorKind::zero_rank: return "zero rank";
    case IoErrorKind::bad_header: return "bad header";
    case IoErrorKind::write_failed: return "write failed";
  }
  return "io error";
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " elements");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(data_[i]) != std::bit_cast<std::uint64_t>(other.data_[i])) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) { return axpby(1.0, a, 1.0, b); }

Tensor operator-(const Tensor& a, const Tensor& b) { return axpby(1.0, a, -1.0, b); }

Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

Tensor axpby(double a, const Tensor& x, double b, const Tensor& y) {
  require_same_shape(x, y, "axpby");
  Tensor out(x.shape());
  kernels::axpby(a, x.data(), b, y.data(), out.data());
  return out;
}

Tensor affine_solve(const Tensor& x, double b, const Tensor& y, double a) {
  require_same_shape(x, y, "affine_solve");
  Tensor out(x.shape());
  kernels::affine_solve(x.data(), b, y.data(), a, out.data());
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  return kernels::dot(a.data(), b.data());
}

double norm(const Tensor& a) { return std::sqrt(kernels::dot(a.data(), a.data())); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return d;
    if (d > m) m = d;
  }
  return m;
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  const Tensor d = a - b;
  return kernels::dot(d.data(), d.data()) / static_cast<double>(d.size());
}

}  // namespace edict
