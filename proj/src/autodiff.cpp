#include "semi3/autodiff.hpp"

#include "semi3/errors.hpp"

#include <string>

namespace semi3 {

const Tensor& Var::value() const {
  if (!recording_) throw ContractError("use of an unbound Var");
  return recording_->value(id_);
}

bool Var::requires_grad() const { return recording_ && recording_->requires_grad(id_); }

Tensor GradMap::of(const Parameter& parameter) const {
  auto it = params_.find(&parameter);
  if (it != params_.end()) return it->second;
  return Tensor(parameter.value.shape());
}

Tensor GradMap::of(const Var& var) const {
  if (&var.recording() != recording_) throw ContractError("Var belongs to a different recording");
  if (var.id() < nodes_.size() && nodes_[var.id()].size() != 0) return nodes_[var.id()];
  return Tensor(node_shapes_.at(var.id()));
}

Var Recording::append(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Recording::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return append(std::move(node));
}

Var Recording::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return append(std::move(node));
}

Var Recording::parameter(const std::shared_ptr<Parameter>& parameter) {
  auto it = parameter_leaves_.find(parameter.get());
  if (it != parameter_leaves_.end()) return Var(this, it->second);
  Node node;
  node.value = parameter->value;
  node.requires_grad = true;
  node.parameter = parameter;
  Var var = append(std::move(node));
  parameter_leaves_.emplace(parameter.get(), var.id());
  return var;
}

Var Recording::record(Tensor value, std::vector<Var> parents, Backward backward, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node node;
  node.value = std::move(value);
  for (const Var& parent : parents) {
    if (&parent.recording() != this) throw ContractError(std::string(op) + ": operand from another recording");
    node.parents.push_back(parent.id());
    node.requires_grad = node.requires_grad || nodes_[parent.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return append(std::move(node));
}

GradMap Recording::backward(const Var& loss) const {
  if (&loss.recording() != this) throw ContractError("backward: loss from another recording");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  GradMap grads;
  grads.recording_ = this;
  grads.nodes_.resize(nodes_.size());
  grads.node_shapes_.reserve(nodes_.size());
  for (const Node& node : nodes_) grads.node_shapes_.push_back(node.value.shape());

  if (nodes_[loss.id()].requires_grad) grads.nodes_[loss.id()] = Tensor::filled(loss.shape(), 1.0);

  std::vector<Tensor*> parent_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    Tensor& grad = grads.nodes_[i];
    if (grad.size() == 0 || !node.backward) continue;
    parent_grads.assign(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = node.parents[k];
      if (!nodes_[p].requires_grad) continue;
      if (grads.nodes_[p].size() == 0) grads.nodes_[p] = Tensor(nodes_[p].value.shape());
      parent_grads[k] = &grads.nodes_[p];
    }
    node.backward(grad, parent_grads);
  }

  for (const auto& [parameter, id] : parameter_leaves_) {
    if (id <= loss.id() && grads.nodes_[id].size() != 0) grads.params_.emplace(parameter, grads.nodes_[id]);
  }
  return grads;
}

}  // namespace semi3
