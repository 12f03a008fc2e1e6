#include "pecas/model.hpp"

#include <cmath>

#include "pecas/errors.hpp"
#include "pecas/layers.hpp"
#include "pecas/rng.hpp"

namespace pecas {

const char* layer_kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

namespace {

LayerSpec conv(std::size_t filters) { return {LayerKind::conv, filters, 3, 1, 1}; }
LayerSpec simple(LayerKind kind) { return {kind, 0, 0, 1, 0}; }
LayerSpec dense(std::size_t outputs) { return {LayerKind::dense, outputs, 0, 1, 0}; }

ConvGeometry geometry(const LayerSpec& layer) { return {layer.stride, layer.padding}; }

}  // namespace

ModelSpec build_pedestrian_net() {
  return {std::string(kPedestrianModel),
          {1, 128, 64},
          {conv(8), simple(LayerKind::relu), simple(LayerKind::maxpool2), conv(16), simple(LayerKind::relu),
           simple(LayerKind::maxpool2), simple(LayerKind::flatten), dense(2), simple(LayerKind::softmax)}};
}

ModelSpec build_eye_net() {
  return {std::string(kEyeModel),
          {1, 24, 24},
          {conv(8), simple(LayerKind::relu), simple(LayerKind::maxpool2), simple(LayerKind::flatten), dense(2),
           simple(LayerKind::softmax)}};
}

std::optional<ModelSpec> spec_by_name(std::string_view name) {
  if (name == kPedestrianModel) return build_pedestrian_net();
  if (name == kEyeModel) return build_eye_net();
  return std::nullopt;
}

std::vector<Shape> layer_output_shapes(const ModelSpec& spec) {
  if (spec.input_shape.size() != 3 || shape_size(spec.input_shape) == 0) {
    throw DimensionError("model '" + spec.name + "': input shape must be [C,H,W], got " +
                         shape_string(spec.input_shape));
  }
  std::vector<Shape> shapes;
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const std::string where = "model '" + spec.name + "' layer " + std::to_string(i) + " (" +
                              layer_kind_name(layer.kind) + ")";
    switch (layer.kind) {
      case LayerKind::conv: {
        if (current.size() != 3 || layer.units == 0 || layer.kernel == 0 || layer.stride == 0 ||
            layer.kernel > current[1] + 2 * layer.padding || layer.kernel > current[2] + 2 * layer.padding) {
          throw DimensionError(where + ": cannot convolve " + shape_string(current));
        }
        current = {layer.units, conv_output_extent(current[1], layer.kernel, geometry(layer)),
                   conv_output_extent(current[2], layer.kernel, geometry(layer))};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2:
        if (current.size() != 3 || current[1] % 2 || current[2] % 2) {
          throw DimensionError(where + ": needs even [C,H,W], got " + shape_string(current));
        }
        current = {current[0], current[1] / 2, current[2] / 2};
        break;
      case LayerKind::flatten:
        current = {shape_size(current)};
        break;
      case LayerKind::dense:
        if (current.size() != 1 || layer.units == 0) throw DimensionError(where + ": needs a flat input");
        current = {layer.units};
        break;
      case LayerKind::softmax:
        if (i + 1 != spec.layers.size()) throw DimensionError(where + ": softmax must be the last layer");
        break;
    }
    shapes.push_back(current);
  }
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::softmax || current != Shape{2}) {
    throw DimensionError("model '" + spec.name + "' must end in a 2-way softmax, ends in " + shape_string(current));
  }
  return shapes;
}

std::vector<ParamSlot> parameter_layout(const ModelSpec& spec) {
  const auto shapes = layer_output_shapes(spec);
  std::vector<ParamSlot> slots;
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::conv) {
      slots.push_back({i, layer.kind, {layer.units, in[0], layer.kernel, layer.kernel}});
      slots.push_back({i, layer.kind, {layer.units}});
    } else if (layer.kind == LayerKind::dense) {
      slots.push_back({i, layer.kind, {layer.units, in[0]}});
      slots.push_back({i, layer.kind, {layer.units}});
    }
    in = shapes[i];
  }
  return slots;
}

void validate_weights(const ModelWeights& weights) {
  const auto layout = parameter_layout(weights.spec);
  if (layout.size() != weights.params.size()) {
    throw DimensionError("model '" + weights.spec.name + "' expects " + std::to_string(layout.size()) +
                         " parameter tensors, got " + std::to_string(weights.params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    require_shape(weights.params[i], layout[i].shape, "model parameter");
    if (!weights.params[i].all_finite()) {
      throw NumericError("model '" + weights.spec.name + "' parameter " + std::to_string(i) + " is not finite");
    }
  }
}

ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  ModelWeights w{spec, {}};
  for (const ParamSlot& slot : parameter_layout(spec)) {
    Tensor t(slot.shape);
    if (slot.shape.size() > 1) {
      const std::size_t fan_in = t.size() / slot.shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double& v : t.data()) v = rng.uniform(-bound, bound);
    }
    w.params.push_back(std::move(t));
  }
  return w;
}

ModelWeights zero_weights(const ModelSpec& spec) {
  ModelWeights w{spec, {}};
  for (const ParamSlot& slot : parameter_layout(spec)) w.params.emplace_back(slot.shape);
  return w;
}

void require_model(const ModelWeights& weights, std::string_view name) {
  if (weights.spec.name != name) {
    throw SpecMismatchError("expected a '" + std::string(name) + "' model, got '" + weights.spec.name + "'");
  }
}

ForwardTape forward(const ModelWeights& weights, const Tensor& image) {
  require_shape(image, weights.spec.input_shape, ("model '" + weights.spec.name + "' input").c_str());
  ForwardTape tape;
  Tensor current = image;
  std::size_t p = 0;
  for (const LayerSpec& layer : weights.spec.layers) {
    if (layer.kind == LayerKind::softmax) break;
    tape.inputs.push_back(current);
    switch (layer.kind) {
      case LayerKind::conv:
        current = conv2d_forward(current, weights.params[p], weights.params[p + 1], geometry(layer));
        p += 2;
        break;
      case LayerKind::relu:
        current = relu_forward(current);
        break;
      case LayerKind::maxpool2:
        current = maxpool2_forward(current);
        break;
      case LayerKind::flatten:
        current = std::move(current).reshaped({current.size()});
        break;
      case LayerKind::dense:
        current = dense_forward(current, weights.params[p], weights.params[p + 1]);
        p += 2;
        break;
      case LayerKind::softmax:
        break;
    }
  }
  tape.logits = std::move(current);
  return tape;
}

BackwardResult backward(const ModelWeights& weights, const ForwardTape& tape, const Tensor& logit_grad,
                        bool want_input_grad) {
  require_shape(logit_grad, tape.logits.shape(), "logit gradient");
  BackwardResult result;
  result.param_grads.resize(weights.params.size());
  Tensor upstream = logit_grad;
  std::size_t p = weights.params.size();
  for (std::size_t i = tape.inputs.size(); i-- > 0;) {
    const LayerSpec& layer = weights.spec.layers[i];
    const Tensor& in = tape.inputs[i];
    const bool need_input = want_input_grad || i > 0;
    switch (layer.kind) {
      case LayerKind::conv: {
        p -= 2;
        LayerGrad g = conv2d_backward(in, weights.params[p], geometry(layer), upstream, need_input);
        result.param_grads[p] = std::move(g.param_grads[0]);
        result.param_grads[p + 1] = std::move(g.param_grads[1]);
        upstream = std::move(g.input_grad);
        break;
      }
      case LayerKind::relu:
        upstream = relu_backward(in, upstream).input_grad;
        break;
      case LayerKind::maxpool2:
        upstream = maxpool2_backward(in, upstream).input_grad;
        break;
      case LayerKind::flatten:
        upstream = std::move(upstream).reshaped(in.shape());
        break;
      case LayerKind::dense: {
        p -= 2;
        LayerGrad g = dense_backward(in, weights.params[p], upstream);
        result.param_grads[p] = std::move(g.param_grads[0]);
        result.param_grads[p + 1] = std::move(g.param_grads[1]);
        upstream = std::move(g.input_grad);
        break;
      }
      case LayerKind::softmax:
        break;
    }
  }
  result.input_grad = want_input_grad ? std::move(upstream) : Tensor(weights.spec.input_shape);
  return result;
}

std::vector<std::size_t> activation_region(const ModelWeights& weights, const ForwardTape& tape) {
  std::vector<std::size_t> region;
  for (std::size_t i = 0; i < tape.inputs.size(); ++i) {
    const Tensor& in = tape.inputs[i];
    if (weights.spec.layers[i].kind == LayerKind::relu) {
      for (double v : in.data()) region.push_back(v > 0.0 ? 1 : 0);
    } else if (weights.spec.layers[i].kind == LayerKind::maxpool2) {
      const auto winners = maxpool2_argmax(in);
      region.insert(region.end(), winners.begin(), winners.end());
    }
  }
  return region;
}

Tensor predict(const ModelWeights& weights, const Tensor& image) { return softmax(forward(weights, image).logits); }

SampleGradient sample_gradient(const ModelWeights& weights, const Tensor& image, std::size_t label) {
  const ForwardTape tape = forward(weights, image);
  SampleGradient out;
  out.probs = softmax(tape.logits);
  CrossEntropy ce = cross_entropy_loss(out.probs, label);
  out.loss = ce.loss;
  out.param_grads = backward(weights, tape, ce.logit_grad).param_grads;
  return out;
}

Fragment network_fragment(const ModelWeights& weights, std::size_t label) {
  Fragment f;
  f.params = weights.params;
  const ModelSpec spec = weights.spec;
  f.evaluate = [spec, label](const Tensor& input, std::span<const Tensor> params) {
    const ModelWeights w{spec, {params.begin(), params.end()}};
    const ForwardTape tape = forward(w, input);
    return Probe{cross_entropy_loss(softmax(tape.logits), label).loss, activation_region(w, tape)};
  };
  f.gradient = [spec, label](const Tensor& input, std::span<const Tensor> params) {
    const ModelWeights w{spec, {params.begin(), params.end()}};
    const ForwardTape tape = forward(w, input);
    const CrossEntropy ce = cross_entropy_loss(softmax(tape.logits), label);
    BackwardResult b = backward(w, tape, ce.logit_grad, true);
    return FragmentGradient{std::move(b.input_grad), std::move(b.param_grads)};
  };
  return f;
}

}  // namespace pecas
