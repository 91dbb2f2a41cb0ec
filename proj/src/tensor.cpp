#include "s2s/tensor.hpp"

#include <cmath>

#include "s2s/errors.hpp"

namespace s2s {

namespace {
std::int64_t product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    require(d >= 0, "Tensor: negative extent ", d);
    n *= d;
  }
  return n;
}

std::string shape_to_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(product(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(product(shape_) == static_cast<std::int64_t>(values_.size()),
          "Tensor: shape ", shape_to_str(shape_), " does not match ", values_.size(), " values");
}

int Tensor::dim(int i) const {
  require(i >= 0 && i < rank(), "Tensor: dim index ", i, " out of range for rank ", rank());
  return shape_[static_cast<std::size_t>(i)];
}

int Tensor::cols() const {
  if (rank() == 0) return 0;
  std::int64_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return static_cast<int>(c);
}

void Tensor::fill(double v) {
  for (double& x : values_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : values_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_str(shape_); }

void check_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what) {
  require(t.shape() == expected, what, ": expected shape ", shape_to_str(expected), ", got ",
          t.shape_str());
}

}  // namespace s2s
