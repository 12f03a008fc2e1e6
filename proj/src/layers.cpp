#include "pecas/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pecas/errors.hpp"

namespace pecas {

namespace {

struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive
};

// Output positions o for which o*stride + offset - padding lands inside [0, extent).
Range valid_outputs(std::size_t extent, std::size_t offset, ConvGeometry g, std::size_t out_extent) {
  const long s = static_cast<long>(g.stride);
  const long shift = static_cast<long>(g.padding) - static_cast<long>(offset);
  const long lo = shift > 0 ? (shift + s - 1) / s : 0;
  const long span = static_cast<long>(extent) + shift;
  const long hi = span > 0 ? std::min<long>(static_cast<long>(out_extent), (span + s - 1) / s) : 0;
  if (hi <= lo) return {};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Index of the input pixel read by output (oy, ox) through kernel tap (ky, kx).
std::size_t input_offset(std::size_t oy, std::size_t ky, std::size_t ox, std::size_t kx, std::size_t W,
                         ConvGeometry g) {
  return (oy * g.stride + ky - g.padding) * W + (ox * g.stride + kx - g.padding);
}

void check_conv_args(const Tensor& input, const Tensor& kernels, ConvGeometry g) {
  if (g.stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (input.rank() != 3) throw DimensionError("conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
  if (kernels.rank() != 4) {
    throw DimensionError("conv2d: kernels must be [F,C,kH,kW], got " + shape_string(kernels.shape()));
  }
  if (kernels.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d: kernel channels " + std::to_string(kernels.dim(1)) +
                         " do not match input channels " + std::to_string(input.dim(0)));
  }
  if (kernels.dim(2) > input.dim(1) + 2 * g.padding || kernels.dim(3) > input.dim(2) + 2 * g.padding) {
    throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) + " larger than padded input " +
                         shape_string(input.shape()));
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, ConvGeometry g) {
  return (in + 2 * g.padding - kernel) / g.stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, ConvGeometry g) {
  check_conv_args(input, kernels, g);
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t F = kernels.dim(0), KH = kernels.dim(2), KW = kernels.dim(3);
  require_shape(bias, {F}, "conv2d bias");

  const std::size_t OH = conv_output_extent(H, KH, g);
  const std::size_t OW = conv_output_extent(W, KW, g);
  Tensor out({F, OH, OW});
  const double* in = input.data().data();
  const double* k = kernels.data().data();
  double* o = out.data().data();

  for (std::size_t f = 0; f < F; ++f) {
    double* plane = o + f * OH * OW;
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = in + c * H * W;
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const Range rows = valid_outputs(H, ky, g, OH);
        for (std::size_t kx = 0; kx < KW; ++kx) {
          const Range cols = valid_outputs(W, kx, g, OW);
          const double w = k[((f * C + c) * KH + ky) * KW + kx];
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            const double* src_row = src + input_offset(oy, ky, cols.lo, kx, W, g);
            double* dst = plane + oy * OW;
            if (g.stride == 1) {
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox] += src_row[ox - cols.lo] * w;
            } else {
              for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox] += src_row[(ox - cols.lo) * g.stride] * w;
            }
          }
        }
      }
    }
    const double b = bias[f];
    for (std::size_t i = 0; i < OH * OW; ++i) plane[i] += b;
  }
  return out;
}

LayerGrad conv2d_backward(const Tensor& input, const Tensor& kernels, ConvGeometry g, const Tensor& upstream,
                          bool want_input_grad) {
  check_conv_args(input, kernels, g);
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t F = kernels.dim(0), KH = kernels.dim(2), KW = kernels.dim(3);
  const std::size_t OH = conv_output_extent(H, KH, g);
  const std::size_t OW = conv_output_extent(W, KW, g);
  require_shape(upstream, {F, OH, OW}, "conv2d upstream gradient");

  LayerGrad grad{Tensor::zeros_like(input), {Tensor::zeros_like(kernels), Tensor({F})}};
  const double* in = input.data().data();
  const double* k = kernels.data().data();
  const double* up = upstream.data().data();
  double* din = grad.input_grad.data().data();
  double* dk = grad.param_grads[0].data().data();
  double* db = grad.param_grads[1].data().data();

  for (std::size_t f = 0; f < F; ++f) {
    const double* up_plane = up + f * OH * OW;
    double bias_sum = 0.0;
    for (std::size_t i = 0; i < OH * OW; ++i) bias_sum += up_plane[i];
    db[f] = bias_sum;

    for (std::size_t c = 0; c < C; ++c) {
      const double* src = in + c * H * W;
      double* dsrc = din + c * H * W;
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const Range rows = valid_outputs(H, ky, g, OH);
        for (std::size_t kx = 0; kx < KW; ++kx) {
          const Range cols = valid_outputs(W, kx, g, OW);
          const std::size_t widx = ((f * C + c) * KH + ky) * KW + kx;
          const double w = k[widx];
          // Four interleaved partial sums; the order is fixed so results stay reproducible.
          double acc[4] = {0.0, 0.0, 0.0, 0.0};
          const std::size_t n = cols.hi - cols.lo;
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            const std::size_t row_off = input_offset(oy, ky, cols.lo, kx, W, g);
            const double* src_row = src + row_off;
            const double* up_row = up_plane + oy * OW + cols.lo;
            const std::size_t s = g.stride;
            std::size_t i = 0;
            for (; i + 4 <= n; i += 4) {
              acc[0] += up_row[i] * src_row[i * s];
              acc[1] += up_row[i + 1] * src_row[(i + 1) * s];
              acc[2] += up_row[i + 2] * src_row[(i + 2) * s];
              acc[3] += up_row[i + 3] * src_row[(i + 3) * s];
            }
            for (; i < n; ++i) acc[0] += up_row[i] * src_row[i * s];
            if (want_input_grad) {
              double* dst_row = dsrc + row_off;
              if (s == 1) {
                for (i = 0; i < n; ++i) dst_row[i] += up_row[i] * w;
              } else {
                for (i = 0; i < n; ++i) dst_row[i * s] += up_row[i] * w;
              }
            }
          }
          dk[widx] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
      }
    }
  }
  return grad;
}

std::vector<std::size_t> maxpool2_argmax(const Tensor& input) {
  if (input.rank() != 3) throw DimensionError("maxpool2: input must be [C,H,W], got " + shape_string(input.shape()));
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("maxpool2: height and width must be even, got " + shape_string(input.shape()));
  }
  const std::size_t OH = H / 2, OW = W / 2;
  std::vector<std::size_t> winners(C * OH * OW);
  const double* in = input.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        const std::size_t top = (c * H + 2 * oy) * W + 2 * ox;
        const std::size_t candidates[4] = {top, top + 1, top + W, top + W + 1};
        std::size_t best = candidates[0];
        for (std::size_t i = 1; i < 4; ++i) {
          if (in[candidates[i]] > in[best]) best = candidates[i];
        }
        winners[(c * OH + oy) * OW + ox] = best;
      }
    }
  }
  return winners;
}

Tensor maxpool2_forward(const Tensor& input) {
  const auto winners = maxpool2_argmax(input);
  Tensor out({input.dim(0), input.dim(1) / 2, input.dim(2) / 2});
  for (std::size_t i = 0; i < winners.size(); ++i) out[i] = input[winners[i]];
  return out;
}

LayerGrad maxpool2_backward(const Tensor& input, const Tensor& upstream) {
  const auto winners = maxpool2_argmax(input);
  require_shape(upstream, {input.dim(0), input.dim(1) / 2, input.dim(2) / 2}, "maxpool2 upstream gradient");
  LayerGrad grad{Tensor::zeros_like(input), {}};
  for (std::size_t i = 0; i < winners.size(); ++i) grad.input_grad[winners[i]] += upstream[i];
  return grad;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

LayerGrad relu_backward(const Tensor& input, const Tensor& upstream) {
  require_shape(upstream, input.shape(), "relu upstream gradient");
  LayerGrad grad{Tensor::zeros_like(input), {}};
  for (std::size_t i = 0; i < input.size(); ++i) grad.input_grad[i] = input[i] > 0.0 ? upstream[i] : 0.0;
  return grad;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw DimensionError("dense: weights must be [M,N], got " + shape_string(weights.shape()));
  const std::size_t M = weights.dim(0), N = weights.dim(1);
  if (input.size() != N) {
    throw DimensionError("dense: input has " + std::to_string(input.size()) + " values, weights expect " +
                         std::to_string(N));
  }
  require_shape(bias, {M}, "dense bias");
  Tensor out({M});
  const double* x = input.data().data();
  for (std::size_t m = 0; m < M; ++m) {
    const double* row = weights.data().data() + m * N;
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += row[n] * x[n];
    out[m] = acc + bias[m];
  }
  return out;
}

LayerGrad dense_backward(const Tensor& input, const Tensor& weights, const Tensor& upstream) {
  if (weights.rank() != 2) throw DimensionError("dense: weights must be [M,N], got " + shape_string(weights.shape()));
  const std::size_t M = weights.dim(0), N = weights.dim(1);
  if (input.size() != N) {
    throw DimensionError("dense: input has " + std::to_string(input.size()) + " values, weights expect " +
                         std::to_string(N));
  }
  require_shape(upstream, {M}, "dense upstream gradient");
  LayerGrad grad{Tensor::zeros_like(input), {Tensor::zeros_like(weights), upstream}};
  double* dx = grad.input_grad.data().data();
  double* dw = grad.param_grads[0].data().data();
  const double* x = input.data().data();
  for (std::size_t m = 0; m < M; ++m) {
    const double u = upstream[m];
    const double* row = weights.data().data() + m * N;
    double* drow = dw + m * N;
    for (std::size_t n = 0; n < N; ++n) {
      drow[n] = u * x[n];
      dx[n] += row[n] * u;
    }
  }
  return grad;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1 || logits.size() < 2) {
    throw DimensionError("softmax: expected a vector of at least 2 logits, got " + shape_string(logits.shape()));
  }
  if (!logits.all_finite()) throw NumericError("softmax: non-finite logit");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  Tensor out = logits;
  double total = 0.0;
  for (double& v : out.data()) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out.data()) v /= total;
  return out;
}

CrossEntropy cross_entropy_loss(const Tensor& probs, std::size_t label) {
  if (probs.rank() != 1) throw DimensionError("cross_entropy: probs must be a vector");
  if (label >= probs.size()) {
    throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
  }
  CrossEntropy ce;
  ce.loss = -std::log(probs[label] + kCrossEntropyEpsilon);
  ce.logit_grad = probs;
  ce.logit_grad[label] -= 1.0;
  return ce;
}

void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("sgd_step: learning rate must be finite and >= 0");
  if (params.size() != grads.size()) {
    throw DimensionError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) require_shape(grads[i], params[i].shape(), "sgd_step gradient");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

}  // namespace pecas
