#include "numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "common/error.hpp"

namespace dvr::num {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " + std::to_string(values_.size()) +
                     " values");
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(Shape{1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() < 2) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
  return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace dvr::num
