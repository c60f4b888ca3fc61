#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace semi3 {

using Shape = std::vector<std::size_t>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. An empty shape denotes a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Eigen::VectorXd values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::VectorXd& values() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }

  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

  // Multi-index access; the index count must equal rank().
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  // Row-major matrix view; rows * cols must equal size().
  ConstRowMatrixMap matrix(std::size_t rows, std::size_t cols) const;
  RowMatrixMap matrix(std::size_t rows, std::size_t cols);

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  double item() const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  Eigen::VectorXd values_;
};

/// Same shape and identical bit patterns in every element.
bool bitwise_equal(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace semi3
