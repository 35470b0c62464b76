#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace semcom {

// Dense row-major array of doubles. Activations are [batch, width]; parameters
// are [in, out] matrices or [width] vectors; losses are shape {}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), values(element_count(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> v);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor row(std::span<const double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v);

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  std::span<double> row_span(std::size_t r) { return {values.data() + r * cols(), cols()}; }
  std::span<const double> row_span(std::size_t r) const {
    return {values.data() + r * cols(), cols()};
  }

  bool all_finite() const;
  bool operator==(const Tensor&) const = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace semcom
