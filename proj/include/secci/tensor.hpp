#pragma once

// Minimal dense tensor: a shape plus row-major single-precision
// storage. The compute kernels take raw pointers; this type carries
// data between layers, checkpoints, and tests.

#include <cstddef>
#include <numeric>
#include <vector>

namespace secci {

struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s)
      : shape(std::move(s)), data(element_count(shape)) {}
  Tensor(std::vector<int> s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static std::size_t element_count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t size() const { return data.size(); }

  bool operator==(const Tensor&) const = default;
};

}  // namespace secci
