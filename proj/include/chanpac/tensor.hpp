#ifndef CHANPAC_TENSOR_HPP
#define CHANPAC_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace chanpac {

// Dense row-major tensor of doubles. Desk scale: no views, no strides.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (size_of(shape) != data.size())
      throw std::invalid_argument("tensor: shape/data size mismatch");
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    auto n = size_of(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor vec(std::vector<double> d) {
    auto n = d.size();
    return Tensor({n}, std::move(d));
  }

  std::size_t size() const { return data.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::size_t size_of(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }
};

}  // namespace chanpac

#endif
