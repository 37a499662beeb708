#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dvr::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 array. Rank 0 (scalar), 1 and 2 are the only ranks
// the model uses; rank-1 tensors behave as 1 x n rows in matrix ops.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor row(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(Shape{rows, cols}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool is_scalar() const { return values_.size() == 1 && shape_.size() <= 1; }

  // Matrix view: rank 0 is 1x1, rank 1 is 1xn.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  std::span<const double> row_span(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols(), cols()}; }

  double item() const;
  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace dvr::num
