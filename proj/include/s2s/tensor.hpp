#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace s2s {

// Dense row-major tensor of 64-bit floats. Everything in the project is
// double precision so finite-difference checks stay sharp.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }

  double& at(int i, int j) { return values_[static_cast<std::size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * cols() + j]; }

  // Leading dimension helpers for the common 2-D case.
  int rows() const { return rank() == 0 ? 0 : shape_[0]; }
  int cols() const;

  double* row(int i) { return values_.data() + static_cast<std::size_t>(i) * cols(); }
  const double* row(int i) const { return values_.data() + static_cast<std::size_t>(i) * cols(); }

  void fill(double v);
  void set_zero() { fill(0.0); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

// Throws ValidationError naming expected vs actual shape.
void check_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what);

}  // namespace s2s
