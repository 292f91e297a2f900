#include "nrl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nrl {

std::size_t shape_size(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

void ensure_finite(std::span<const double> values, const std::string& what) {
  for (const double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("numeric contract violated: non-finite value in " +
                               what);
    }
  }
}

Tensor::Tensor(std::vector<std::size_t> s)
    : shape(std::move(s)), data(shape_size(shape), 0.0) {
  for (const std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor extent must be positive");
  }
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                " does not match data length " +
                                std::to_string(data.size()));
  }
}

void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[j * rows + i] = in[i * cols + j];
    }
  }
}

}  // namespace nrl
