#pragma once

#include "semi3/tensor.hpp"

#include <string>

namespace semi3 {

// One trainable tensor plus its momentum buffer. Tied names in a
// ParameterStore share a single Parameter object.
struct Parameter {
  std::string name;  // first registered member
  Tensor value;
  Tensor velocity;
};

}  // namespace semi3
