#include "pyformer/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pyformer {

void Shape::validate() const {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("Shape: zero extent in " + str());
    if (d > std::numeric_limits<std::size_t>::max() / n)
      throw std::invalid_argument("Shape: element count overflow in " + str());
    n *= d;
  }
}

std::string Shape::str() const {
  if (dims.empty()) return "scalar";
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.count())
    throw std::invalid_argument("Tensor: " + std::to_string(data_.size()) +
                                " values do not fill shape " + shape_.str());
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = value;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void axpy(Tensor& acc, const Tensor& t) {
  if (!(acc.shape() == t.shape()))
    throw std::invalid_argument("axpy: shape " + acc.shape().str() +
                                " does not match " + t.shape().str());
  double* a = acc.data();
  const double* b = t.data();
  for (std::size_t i = 0; i < acc.size(); ++i) a[i] += b[i];
}

}  // namespace pyformer
