#pragma once

#include "semi3/autodiff.hpp"
#include "semi3/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace semi3 {

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;  // max |analytic - numeric| / max(1, |numeric|)
  double tolerance = 0.0;
  std::size_t coordinates = 0;

  bool passed() const { return max_error <= tolerance; }
};

using LossBuilder = std::function<Var(const std::vector<Var>& inputs)>;

// Central differences over every coordinate of every input.
GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor>& inputs, const LossBuilder& loss,
                                double step = 1e-6, double tolerance = 1e-5);

// Central differences over every coordinate of every distinct model
// parameter. `loss` runs a full forward pass on the recording it is given.
GradCheckResult check_parameter_gradients(const std::string& name, Semi3Model& model,
                                          const std::function<Var(Recording&)>& loss, double step = 1e-6,
                                          double tolerance = 1e-4);

// Every differentiable operation, the attention and loss compositions, and
// the end-to-end hybrid loss on a two-sample desk batch.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 2024);

}  // namespace semi3
