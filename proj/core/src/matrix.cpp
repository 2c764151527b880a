#include "egur/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace egur {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data size does not match shape");
  }
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw std::invalid_argument("row width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double squared_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return sum;
}

void l2_normalize(std::span<double> v) {
  const double norm = std::sqrt(squared_norm(v));
  if (norm == 0.0) return;
  for (double& x : v) x /= norm;
}

}  // namespace egur
