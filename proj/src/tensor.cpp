#include "semi3/tensor.hpp"

#include "semi3/errors.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace semi3 {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)),
      values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape_size(shape_)))) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(size()) + " values");
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                                                  static_cast<Eigen::Index>(values.size()))) {}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.values_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) { return filled({}, value); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("index rank does not match tensor rank for shape " + shape_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw DimensionError("index out of range for shape " + shape_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return (*this)[offset(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return (*this)[offset(index)]; }

ConstRowMatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) const {
  if (rows * cols != size()) throw DimensionError("matrix view does not cover tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

RowMatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) {
  if (rows * cols != size()) throw DimensionError("matrix view does not cover tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const { return values_.allFinite(); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape_));
  return values_[0];
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  if (a.size() == 0) return 0.0;
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

}  // namespace semi3
