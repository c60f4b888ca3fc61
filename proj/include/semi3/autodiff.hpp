#pragma once

#include "semi3/parameter.hpp"
#include "semi3/tensor.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace semi3 {

class Recording;

/// Handle to a node of a Recording. Cheap to copy; valid while the
/// recording is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;
  Recording& recording() const { return *recording_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return recording_ != nullptr; }

 private:
  friend class Recording;
  Var(Recording* recording, std::size_t id) : recording_(recording), id_(id) {}

  Recording* recording_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by Recording::backward. Parameters that were not
/// reached report zero tensors of their own shape.
class GradMap {
 public:
  Tensor of(const Parameter& parameter) const;
  Tensor of(const Var& var) const;
  bool reached(const Parameter& parameter) const { return params_.count(&parameter) != 0; }
  std::size_t parameter_count() const { return params_.size(); }

 private:
  friend class Recording;
  std::unordered_map<const Parameter*, Tensor> params_;
  std::vector<Tensor> nodes_;
  std::vector<Shape> node_shapes_;
  const Recording* recording_ = nullptr;
};

/// Append-only record of the operations of one forward pass. Node order is
/// topological; backward walks it in exact reverse.
class Recording {
 public:
  // parent_grads[k] is null when parent k does not require a gradient.
  using Backward = std::function<void(const Tensor& grad_output, std::span<Tensor* const> parent_grads)>;

  Recording() = default;
  Recording(const Recording&) = delete;
  Recording& operator=(const Recording&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // One leaf per distinct Parameter; tied names resolve to the same leaf.
  Var parameter(const std::shared_ptr<Parameter>& parameter);

  // Appends an operation node. Throws NumericError on non-finite output.
  Var record(Tensor value, std::vector<Var> parents, Backward backward, const char* op);

  GradMap backward(const Var& loss) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
    std::shared_ptr<Parameter> parameter;
  };

  Var append(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> parameter_leaves_;
};

}  // namespace semi3
