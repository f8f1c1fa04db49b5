#pragma once

#include <utility>
#include <vector>

#include "pyformer/shape.hpp"

namespace pyformer {

// Dense row-major tensor of doubles. Data is always exactly shape.count()
// elements; default construction gives an empty tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_.count(), 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor(Shape{1}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// acc += t, elementwise; shapes must match.
void axpy(Tensor& acc, const Tensor& t);

}  // namespace pyformer
