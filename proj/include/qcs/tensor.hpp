#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "qcs/error.hpp"

namespace qcs {

// Dense (batch, channels, height, width) tensor, row-major.
template <typename T>
class Tensor4 {
 public:
  using Shape = std::array<std::size_t, 4>;

  Tensor4() = default;
  explicit Tensor4(Shape shape, T fill = T{})
      : shape_(shape), data_(shape[0] * shape[1] * shape[2] * shape[3], fill) {}
  Tensor4(std::size_t b, std::size_t c, std::size_t h, std::size_t w, T fill = T{})
      : Tensor4(Shape{b, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t height() const { return shape_[2]; }
  std::size_t width() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return shape_[2] * shape_[3]; }

  T& operator()(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(b, c, h, w)];
  }
  const T& operator()(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(b, c, h, w)];
  }

  // Contiguous H x W plane of (b, c).
  T* plane(std::size_t b, std::size_t c) { return data_.data() + (b * shape_[1] + c) * plane_size(); }
  const T* plane(std::size_t b, std::size_t c) const {
    return data_.data() + (b * shape_[1] + c) * plane_size();
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  std::size_t index(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return ((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

using RealTensor = Tensor4<double>;
using ComplexTensor = Tensor4<std::complex<double>>;

inline std::string shape_string(const std::array<std::size_t, 4>& s) {
  return "(" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " + std::to_string(s[2]) +
         ", " + std::to_string(s[3]) + ")";
}

}  // namespace qcs
