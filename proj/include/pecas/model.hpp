#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pecas/gradcheck.hpp"
#include "pecas/tensor.hpp"

namespace pecas {

// Numeric values are the layer-kind bytes of the weights file.
enum class LayerKind : std::uint8_t { conv = 1, relu = 2, maxpool2 = 3, flatten = 4, dense = 5, softmax = 6 };

const char* layer_kind_name(LayerKind kind) noexcept;

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;  // conv filters or dense outputs
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  Shape input_shape;  // [C,H,W]
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline constexpr std::string_view kPedestrianModel = "pedestrian";
inline constexpr std::string_view kEyeModel = "eye";

// Class indices shared by both nets and by the fusion stage.
inline constexpr std::size_t kNegativeClass = 0;
inline constexpr std::size_t kPositiveClass = 1;

/// 1x128x64 -> conv8 3x3 s1 p1 -> relu -> pool -> conv16 3x3 s1 p1 -> relu -> pool -> flatten -> dense2 -> softmax
ModelSpec build_pedestrian_net();
/// 1x24x24 -> conv8 3x3 s1 p1 -> relu -> pool -> flatten -> dense2 -> softmax
ModelSpec build_eye_net();
std::optional<ModelSpec> spec_by_name(std::string_view name);

/// Output shape of every layer, in order. Throws DimensionError when the
/// layers do not chain from input_shape to a 2-logit output.
std::vector<Shape> layer_output_shapes(const ModelSpec& spec);

struct ParamSlot {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::conv;
  Shape shape;
};

/// Parameter tensors implied by the spec: weights then bias for every conv
/// and dense layer, in layer order.
std::vector<ParamSlot> parameter_layout(const ModelSpec& spec);

struct ModelWeights {
  ModelSpec spec;
  std::vector<Tensor> params;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

/// Throws DimensionError on parameter shapes that disagree with the spec and
/// NumericError on non-finite values.
void validate_weights(const ModelWeights& weights);

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed);

/// Every parameter zero; predicts [0.5, 0.5] for any input.
ModelWeights zero_weights(const ModelSpec& spec);

/// Throws SpecMismatchError unless the weights belong to the named model.
void require_model(const ModelWeights& weights, std::string_view name);

/// Softmax scores [negative, positive] for one image of the spec's input shape.
Tensor predict(const ModelWeights& weights, const Tensor& image);

/// Activations recorded by a forward pass. inputs[i] is what layer i saw;
/// logits is the output of the last layer before softmax.
struct ForwardTape {
  std::vector<Tensor> inputs;
  Tensor logits;
};

ForwardTape forward(const ModelWeights& weights, const Tensor& image);

struct BackwardResult {
  std::vector<Tensor> param_grads;
  Tensor input_grad;  // zeros unless requested
};

BackwardResult backward(const ModelWeights& weights, const ForwardTape& tape, const Tensor& logit_grad,
                        bool want_input_grad = false);

/// ReLU sign masks and pooling winners of a tape; equal regions mean the
/// network is the same affine map around both points.
std::vector<std::size_t> activation_region(const ModelWeights& weights, const ForwardTape& tape);

struct SampleGradient {
  double loss = 0.0;
  Tensor probs;
  std::vector<Tensor> param_grads;
};

/// Forward, cross-entropy against `label`, backward.
SampleGradient sample_gradient(const ModelWeights& weights, const Tensor& image, std::size_t label);

/// Whole network plus cross-entropy as a gradcheck fragment over all
/// parameters and the input image.
Fragment network_fragment(const ModelWeights& weights, std::size_t label);

}  // namespace pecas
