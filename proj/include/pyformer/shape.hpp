#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace pyformer {

// Extents of a dense row-major tensor. Every extent is at least 1; a scalar
// is represented as shape {1}.
struct Shape {
  std::vector<std::size_t> dims;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d) : dims(d) { validate(); }
  explicit Shape(std::vector<std::size_t> d) : dims(std::move(d)) { validate(); }

  std::size_t rank() const { return dims.size(); }
  std::size_t operator[](std::size_t i) const { return dims[i]; }

  std::size_t count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
  }

  bool operator==(const Shape&) const = default;

  // "2x3x4"
  std::string str() const;

 private:
  void validate() const;
};

}  // namespace pyformer
