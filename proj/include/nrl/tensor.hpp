#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nrl {

std::size_t shape_size(std::span<const std::size_t> shape);
std::string shape_str(std::span<const std::size_t> shape);

// Throws a numeric-contract error naming `what` if any value is NaN/Inf.
void ensure_finite(std::span<const double> values, const std::string& what);

// Dense row-major n-dimensional array of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);  // zero-filled
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  std::size_t size() const { return data.size(); }

  double& operator()(std::size_t i) { return data[i]; }
  double operator()(std::size_t i) const { return data[i]; }
  double& operator()(std::size_t i, std::size_t j) {
    return data[i * shape[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }
  // NCHW access
  double& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  double at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
};

// out[j * rows + i] = in[i * cols + j]
void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols);

}  // namespace nrl
