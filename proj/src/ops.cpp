#include "semi3/ops.hpp"

#include "semi3/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace semi3 {
namespace {

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

// Unfolds one sample [Cin, H, W] into a (Cin*kh*kw) x (oh*ow) matrix.
RowMatrix im2col(const double* image, const ConvGeometry& g) {
  RowMatrix cols = RowMatrix::Zero(idx(g.patch()), idx(g.pixels()));
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const std::size_t row = (c * g.kh + i) * g.kw + j;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + i) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + j) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            cols(idx(row), idx(y * g.ow + x)) = image[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                                                       static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, double* image, const ConvGeometry& g) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const std::size_t row = (c * g.kh + i) * g.kw + j;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + i) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + j) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            image[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                cols(idx(row), idx(y * g.ow + x));
          }
        }
      }
    }
  }
}

Var unary(const Var& x, Tensor out, std::function<void(const Tensor&, Tensor&)> grad_fn, const char* op) {
  return x.recording().record(
      std::move(out), {x},
      [grad_fn = std::move(grad_fn)](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) grad_fn(g, *pg[0]);
      },
      op);
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (kernel.dim(1) != g.cin) {
    throw DimensionError("conv2d: input has " + std::to_string(g.cin) + " channels, kernel expects " +
                         std::to_string(kernel.dim(1)));
  }
  if (bias.dim(0) != g.cout) throw DimensionError("conv2d: bias length does not match output channels");
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) throw DimensionError("conv2d: kernel larger than padded input");
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;

  const Tensor& x = input.value();
  const auto weights = kernel.value().matrix(g.cout, g.patch());
  const Eigen::VectorXd& b = bias.value().values();
  Tensor out({g.n, g.cout, g.oh, g.ow});
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * g.pixels();
  for (std::size_t n = 0; n < g.n; ++n) {
    RowMatrixMap y(out.data() + n * out_stride, idx(g.cout), idx(g.pixels()));
    y.noalias() = weights * im2col(x.data() + n * in_stride, g);
    y.colwise() += b;
  }

  return input.recording().record(
      std::move(out), {input, kernel, bias},
      [g, x, w = kernel.value(), in_stride, out_stride](const Tensor& grad, std::span<Tensor* const> pg) {
        const auto weights = w.matrix(g.cout, g.patch());
        for (std::size_t n = 0; n < g.n; ++n) {
          ConstRowMatrixMap gy(grad.data() + n * out_stride, idx(g.cout), idx(g.pixels()));
          if (pg[1]) {
            pg[1]->matrix(g.cout, g.patch()).noalias() += gy * im2col(x.data() + n * in_stride, g).transpose();
          }
          if (pg[2]) pg[2]->values() += gy.rowwise().sum();
          if (pg[0]) {
            RowMatrix gcols = weights.transpose() * gy;
            col2im_add(gcols, pg[0]->data() + n * in_stride, g);
          }
        }
      },
      "conv2d");
}

Var maxpool2d(const Var& input, std::size_t k, std::size_t stride) {
  require_rank(input, 4, "maxpool2d");
  if (k < 1 || stride < 1) throw ContractError("maxpool2d: window and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (k > h || k > w) throw DimensionError("maxpool2d: window larger than input " + shape_string(input.shape()));
  const std::size_t oh = (h - k) / stride + 1;
  const std::size_t ow = (w - k) / stride + 1;
  const Tensor& x = input.value();
  Tensor out({n, c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
        std::size_t best = base + (y * stride) * w + xo * stride;
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const std::size_t at = base + (y * stride + u) * w + xo * stride + v;
            if (x[at] > x[best]) best = at;
          }
        }
        argmax[o] = best;
        out[o] = x[best];
      }
    }
  }
  return unary(
      input, std::move(out),
      [argmax = std::move(argmax)](const Tensor& g, Tensor& gx) {
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
      },
      "maxpool2d");
}

Var linear(const Var& input, const Var& weight, const Var& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != d) {
    throw DimensionError("linear: input width " + std::to_string(d) + " vs weight " + shape_string(weight.shape()));
  }
  if (bias.dim(0) != m) throw DimensionError("linear: bias length does not match output width");
  Tensor out({n, m});
  out.matrix(n, m).noalias() = input.value().matrix(n, d) * weight.value().matrix(m, d).transpose();
  out.matrix(n, m).rowwise() += bias.value().values().transpose();
  return input.recording().record(
      std::move(out), {input, weight, bias},
      [x = input.value(), w = weight.value(), n, d, m](const Tensor& g, std::span<Tensor* const> pg) {
        const auto gy = g.matrix(n, m);
        if (pg[0]) pg[0]->matrix(n, d).noalias() += gy * w.matrix(m, d);
        if (pg[1]) pg[1]->matrix(m, d).noalias() += gy.transpose() * x.matrix(n, d);
        if (pg[2]) pg[2]->values() += gy.colwise().sum().transpose();
      },
      "linear");
}

Var relu(const Var& input) {
  Tensor out = input.value();
  out.values() = out.values().cwiseMax(0.0);
  return unary(
      input, std::move(out),
      [x = input.value()](const Tensor& g, Tensor& gx) {
        gx.values().array() += (x.values().array() > 0.0).select(g.values().array(), 0.0);
      },
      "relu");
}

namespace {
const double kSigmoidFloor = std::sqrt(std::numeric_limits<double>::min());
}  // namespace

Var sigmoid(const Var& input) {
  Tensor out = input.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    // Branch on sign so neither exp() overflows.
    const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    // Keep the open interval, with a floor whose square is still a normal double.
    out[i] = std::clamp(y, kSigmoidFloor, std::nextafter(1.0, 0.0));
  }
  Tensor saved = out;
  return unary(
      input, std::move(out),
      [y = std::move(saved)](const Tensor& g, Tensor& gx) {
        gx.values().array() += g.values().array() * y.values().array() * (1.0 - y.values().array());
      },
      "sigmoid");
}

Var activation(const Var& input, Activation kind) {
  return kind == Activation::kRelu ? relu(input) : sigmoid(input);
}

Var global_avg_pool(const Var& input) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (hw == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  Tensor out({n, c});
  out.values() = input.value().matrix(n * c, hw).rowwise().sum() / static_cast<double>(hw);
  return unary(
      input, std::move(out),
      [n, c, hw](const Tensor& g, Tensor& gx) {
        gx.matrix(n * c, hw).colwise() += g.values() / static_cast<double>(hw);
      },
      "global_avg_pool");
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), a.value().values().cwiseProduct(b.value().values()));
  return a.recording().record(
      std::move(out), {a, b},
      [av = a.value(), bv = b.value()](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) pg[0]->values() += g.values().cwiseProduct(bv.values());
        if (pg[1]) pg[1]->values() += g.values().cwiseProduct(av.values());
      },
      "mul");
}

Var channel_scale(const Var& input, const Var& mask) {
  require_rank(input, 4, "channel_scale");
  require_rank(mask, 2, "channel_scale");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (mask.dim(0) != n || mask.dim(1) != c) {
    throw DimensionError("channel_scale: mask " + shape_string(mask.shape()) + " does not match input " +
                         shape_string(input.shape()));
  }
  Tensor out = input.value();
  out.matrix(n * c, hw).array().colwise() *= mask.value().values().array();
  return input.recording().record(
      std::move(out), {input, mask},
      [x = input.value(), m = mask.value(), n, c, hw](const Tensor& g, std::span<Tensor* const> pg) {
        const auto gy = g.matrix(n * c, hw);
        if (pg[0]) pg[0]->matrix(n * c, hw).array() += gy.array().colwise() * m.values().array();
        if (pg[1]) pg[1]->values() += gy.cwiseProduct(x.matrix(n * c, hw)).rowwise().sum();
      },
      "channel_scale");
}

Var l2_normalize(const Var& input, double eps) {
  require_rank(input, 2, "l2_normalize");
  const std::size_t n = input.dim(0), d = input.dim(1);
  Eigen::VectorXd divisor = input.value().matrix(n, d).rowwise().norm();
  Tensor out = input.value();
  for (std::size_t r = 0; r < n; ++r) {
    divisor[idx(r)] = std::max(divisor[idx(r)], eps);
    out.matrix(n, d).row(idx(r)) /= divisor[idx(r)];
  }
  Tensor y = out;
  return unary(
      input, std::move(out),
      [y = std::move(y), divisor = std::move(divisor), n, d, eps](const Tensor& g, Tensor& gx) {
        const auto gy = g.matrix(n, d);
        const auto yy = y.matrix(n, d);
        auto gxm = gx.matrix(n, d);
        for (std::size_t r = 0; r < n; ++r) {
          const Eigen::Index i = idx(r);
          if (divisor[i] > eps) {
            gxm.row(i) += (gy.row(i) - yy.row(i) * yy.row(i).dot(gy.row(i))) / divisor[i];
          } else {
            gxm.row(i) += gy.row(i) / eps;
          }
        }
      },
      "l2_normalize");
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), a.value().values() + b.value().values());
  return a.recording().record(
      std::move(out), {a, b},
      [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) pg[0]->values() += g.values();
        if (pg[1]) pg[1]->values() += g.values();
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), a.value().values() - b.value().values());
  return a.recording().record(
      std::move(out), {a, b},
      [](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) pg[0]->values() += g.values();
        if (pg[1]) pg[1]->values() -= g.values();
      },
      "sub");
}

Var affine(const Var& x, double scale, double shift) {
  Tensor out = x.value();
  out.values().array() = out.values().array() * scale + shift;
  return unary(
      x, std::move(out), [scale](const Tensor& g, Tensor& gx) { gx.values() += scale * g.values(); }, "affine");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return unary(
      x, std::move(out), [](const Tensor& g, Tensor& gx) { gx.values() += g.values(); }, "reshape");
}

Var flatten(const Var& x) {
  if (x.value().rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t n = x.dim(0);
  return reshape(x, {n, n ? x.value().size() / n : 0});
}

Var sum(const Var& x) {
  return unary(
      x, Tensor::scalar(x.value().values().sum()),
      [](const Tensor& g, Tensor& gx) { gx.values().array() += g.item(); }, "sum");
}

Var mean(const Var& x) {
  const double count = static_cast<double>(x.value().size());
  if (count == 0) throw DimensionError("mean: empty tensor");
  return unary(
      x, Tensor::scalar(x.value().values().sum() / count),
      [count](const Tensor& g, Tensor& gx) { gx.values().array() += g.item() / count; }, "mean");
}

Var row_squared_distance(const Var& a, const Var& b) {
  require_rank(a, 2, "row_squared_distance");
  require_same_shape(a, b, "row_squared_distance");
  const std::size_t n = a.dim(0), d = a.dim(1);
  RowMatrix diff = a.value().matrix(n, d) - b.value().matrix(n, d);
  Tensor out({n}, diff.rowwise().squaredNorm());
  return a.recording().record(
      std::move(out), {a, b},
      [diff = std::move(diff)](const Tensor& g, std::span<Tensor* const> pg) {
        const RowMatrix gd = 2.0 * (diff.array().colwise() * g.values().array()).matrix();
        const auto rows = static_cast<std::size_t>(gd.rows()), cols = static_cast<std::size_t>(gd.cols());
        if (pg[0]) pg[0]->matrix(rows, cols) += gd;
        if (pg[1]) pg[1]->matrix(rows, cols) -= gd;
      },
      "row_squared_distance");
}

Var row_distance(const Var& a, const Var& b) {
  require_rank(a, 2, "row_distance");
  require_same_shape(a, b, "row_distance");
  const std::size_t n = a.dim(0), d = a.dim(1);
  RowMatrix diff = a.value().matrix(n, d) - b.value().matrix(n, d);
  Eigen::VectorXd dist = diff.rowwise().norm();
  Tensor out({n}, dist);
  return a.recording().record(
      std::move(out), {a, b},
      [diff = std::move(diff), dist = std::move(dist), n, d](const Tensor& g, std::span<Tensor* const> pg) {
        for (std::size_t r = 0; r < n; ++r) {
          const Eigen::Index i = idx(r);
          if (dist[i] == 0.0) continue;
          const Eigen::RowVectorXd gd = diff.row(i) * (g[r] / dist[i]);
          if (pg[0]) pg[0]->matrix(n, d).row(i) += gd;
          if (pg[1]) pg[1]->matrix(n, d).row(i) -= gd;
        }
      },
      "row_distance");
}

Var softmax_cross_entropy(const Var& logits, const Var& onehot) {
  require_rank(logits, 2, "softmax_cross_entropy");
  require_same_shape(logits, onehot, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (n == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  const auto z = logits.value().matrix(n, k);
  const auto y = onehot.value().matrix(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    int ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = y(idx(r), idx(j));
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw ContractError("softmax_cross_entropy: label row " + std::to_string(r) + " is not one-hot");
  }
  RowMatrix probs(idx(n), idx(k));
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::Index i = idx(r);
    const double peak = z.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = z.row(i).array() - peak;
    const double lse = std::log(shifted.array().exp().sum());
    probs.row(i) = (shifted.array() - lse).exp();
    total += lse - shifted.dot(y.row(i));
  }
  RowMatrix delta = (probs - y) / static_cast<double>(n);
  return logits.recording().record(
      Tensor::scalar(total / static_cast<double>(n)), {logits, onehot},
      [delta = std::move(delta), n, k](const Tensor& g, std::span<Tensor* const> pg) {
        if (pg[0]) pg[0]->matrix(n, k) += g.item() * delta;
      },
      "softmax_cross_entropy");
}

}  // namespace semi3
