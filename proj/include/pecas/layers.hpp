#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pecas/tensor.hpp"

namespace pecas {

/// Gradients of one layer: w.r.t. its input, and w.r.t. each of its
/// parameters in declaration order (empty for parameter-free layers).
struct LayerGrad {
  Tensor input_grad;
  std::vector<Tensor> param_grads;
};

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Output extent of a convolution along one axis.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, ConvGeometry g);

// Convolution over a [C,H,W] input with [F,C,kH,kW] kernels and zero padding.
// Each output element accumulates in channel-major, then row-major kernel
// order, and the bias is added last. The loop nest is fixed so results are
// bitwise reproducible.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, ConvGeometry g);

/// param_grads = {kernel grad, bias grad}. With `want_input_grad == false`
/// the input gradient is returned as zeros (used for the first layer of a net).
LayerGrad conv2d_backward(const Tensor& input, const Tensor& kernels, ConvGeometry g, const Tensor& upstream,
                          bool want_input_grad = true);

// 2x2 non-overlapping max pooling. H and W must be even. Ties resolve to the
// first maximum in row-major order within the window.
Tensor maxpool2_forward(const Tensor& input);
LayerGrad maxpool2_backward(const Tensor& input, const Tensor& upstream);

/// Flat index (within the input) of each pooling window's winner.
std::vector<std::size_t> maxpool2_argmax(const Tensor& input);

Tensor relu_forward(const Tensor& input);
/// Gradient passes where input > 0; the subgradient at exactly 0 is 0.
LayerGrad relu_backward(const Tensor& input, const Tensor& upstream);

/// y = W x + b for x:[N], W:[M,N], b:[M].
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
/// param_grads = {dW = upstream (x) input, db = upstream}.
LayerGrad dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream);

/// Max-shifted softmax over a rank-1 tensor with at least two entries.
/// Throws NumericError on non-finite logits.
Tensor softmax(const Tensor& logits);

struct CrossEntropy {
  double loss = 0.0;
  Tensor logit_grad;  // probs - onehot(label)
};

inline constexpr double kCrossEntropyEpsilon = 1e-12;

/// -ln(probs[label] + 1e-12) and the fused softmax+cross-entropy gradient
/// with respect to the logits.
CrossEntropy cross_entropy_loss(const Tensor& probs, std::size_t label);

/// p <- p - lr * g for every pair. Throws DimensionError on misaligned lists.
void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads, double lr);

}  // namespace pecas
