#pragma once

#include "semi3/autodiff.hpp"

namespace semi3 {

enum class Activation { kRelu, kSigmoid };

// Convolution and pooling act on [N, C, H, W] tensors.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t pad);
// Backward routes to the first maximum of each window in row-major order.
Var maxpool2d(const Var& input, std::size_t k, std::size_t stride);
// input [N, D], weight [M, D], bias [M] -> [N, M]
Var linear(const Var& input, const Var& weight, const Var& bias);

Var activation(const Var& input, Activation kind);
Var relu(const Var& input);
Var sigmoid(const Var& input);

// [N, C, H, W] -> [N, C]
Var global_avg_pool(const Var& input);
Var mul(const Var& a, const Var& b);
// out[n, c, :, :] = mask[n, c] * input[n, c, :, :]
Var channel_scale(const Var& input, const Var& mask);
// Each row divided by max(||row||, eps).
Var l2_normalize(const Var& input, double eps = 1e-12);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// scale * x + shift, elementwise
Var affine(const Var& x, double scale, double shift = 0.0);
Var reshape(const Var& x, Shape shape);
// [N, ...] -> [N, prod(...)]
Var flatten(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);

// Per-row distances between [N, D] operands, returned as [N].
Var row_squared_distance(const Var& a, const Var& b);
// Euclidean distance; the gradient at coincident rows is taken as zero.
Var row_distance(const Var& a, const Var& b);

// Mean over rows of -sum_k y_k log softmax(z)_k, computed with log-sum-exp.
Var softmax_cross_entropy(const Var& logits, const Var& onehot);

// Operator sugar for composing scalar losses.
inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& x) { return affine(x, s); }

}  // namespace semi3
