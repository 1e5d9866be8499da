#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fsner {

// Dense row-major float64 array with shape metadata. Rank 0 (shape {}) is a
// scalar holding one value. Tensors are plain values; copying copies data.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty() && shape_.empty(); }

  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  // Scalar read: requires size() == 1 (shape {} or {1}).
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool is_scalar() const { return data_.size() == 1 && rank() <= 1; }

  void fill(double v);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// "[2x3]", "[]" for scalars; used in shape-mismatch error messages.
std::string shape_str(const Tensor& t);

bool all_finite(const Tensor& t);

}  // namespace fsner
