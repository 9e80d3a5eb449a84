#include "glyphner/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glyphner/errors.hpp"

namespace glyphner::enc {
namespace {

using nd::Activation;
using nd::ParamKind;
using nd::Tensor;
using nd::Var;

constexpr std::size_t kChannels = 32;
constexpr std::size_t kEvalChunk = 64;

void register_layers(std::vector<AeLayer>& layers, const char* prefix, nd::ParameterSet& params) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (!l.weight || !l.bias) throw ConfigError("autoencoder layer without weight or bias");
    const auto name = std::string(prefix) + std::to_string(i + 1);
    // Register the layer's own nodes so the stack and its ParameterSet alias.
    params.add(name + ".weight", ParamKind::kWeight, l.weight.value());
    params.add(name + ".bias", ParamKind::kBias, l.bias.value());
    l.weight = params.at(name + ".weight");
    l.bias = params.at(name + ".bias");
  }
}

Var apply_layer(const Var& input, const AeLayer& layer) {
  const std::size_t n = input.dim(0);
  nd::Shape shape{n};
  shape.insert(shape.end(), layer.in_shape.begin(), layer.in_shape.end());
  if (nd::shape_size(shape) != input.value().size()) {
    throw ShapeError("autoencoder layer expects per-sample " + nd::shape_string(layer.in_shape) + ", got " +
                     nd::shape_string(input.shape()));
  }
  Var h = shape == input.shape() ? input : nd::reshape(input, shape);
  if (layer.kind == AeLayer::Kind::kDense) {
    return nd::activation(nd::dense(h, layer.weight, layer.bias), layer.act);
  }
  if (layer.upsample > 1) h = nd::upsample2d(h, layer.upsample);
  h = nd::activation(nd::conv2d(h, layer.weight, layer.bias, {layer.stride, layer.stride}, nd::Padding::kSame),
                     layer.act);
  if (layer.pool > 1) h = nd::maxpool2d(h, layer.pool);
  return h;
}

AeLayer conv_layer(std::size_t cin, std::size_t cout, Activation act, nd::Shape in_shape, std::mt19937_64& rng) {
  AeLayer l;
  l.kind = AeLayer::Kind::kConv;
  l.weight = Var::leaf(nd::he_normal({3, 3, cin, cout}, 9 * cin, rng));
  l.bias = Var::leaf(Tensor({cout}, 0.0));
  l.act = act;
  l.in_shape = std::move(in_shape);
  return l;
}

AeLayer dense_layer(std::size_t din, std::size_t dout, Activation act, std::mt19937_64& rng) {
  AeLayer l;
  l.weight = Var::leaf(nd::truncated_normal({din, dout}, std::sqrt(1.0 / static_cast<double>(din)), rng));
  l.bias = Var::leaf(Tensor({dout}, 0.0));
  l.act = act;
  l.in_shape = {din};
  return l;
}

Tensor batch_matrix(const std::vector<const GlyphBitmap*>& glyphs, std::span<const std::size_t> order,
                     std::size_t start, std::size_t count) {
  std::vector<const GlyphBitmap*> chunk;
  chunk.reserve(count);
  for (std::size_t i = start; i < start + count; ++i) chunk.push_back(glyphs[order[i]]);
  return glyph_matrix(chunk);
}

std::vector<const GlyphBitmap*> dictionary_glyphs(const GlyphDictionary& dict) {
  std::vector<const GlyphBitmap*> out;
  out.reserve(dict.size());
  for (const auto& [cp, bitmap] : dict.entries()) out.push_back(&bitmap);
  return out;
}

}  // namespace

AutoencoderStack::AutoencoderStack(std::vector<AeLayer> encoder, std::vector<AeLayer> decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  if (encoder_.empty() || encoder_.size() != decoder_.size()) {
    throw ConfigError("autoencoder needs N >= 1 encoder layers and as many decoder layers");
  }
  register_layers(encoder_, "enc", params_);
  register_layers(decoder_, "dec", params_);
}

AutoencoderStack AutoencoderStack::glynn_mirror(std::mt19937_64& rng) {
  const std::size_t c = kChannels;
  std::vector<AeLayer> enc;
  enc.push_back(conv_layer(1, c, Activation::kSigmoid, {kGlyphSide, kGlyphSide, 1}, rng));
  enc[0].stride = 2;
  enc[0].pool = 2;
  enc.push_back(conv_layer(c, c, Activation::kRelu, {16, 16, c}, rng));
  enc[1].pool = 2;
  enc.push_back(dense_layer(8 * 8 * c, kGlynnDim, Activation::kIdentity, rng));

  // dec[i] undoes enc[i]; the reconstruction comes out of dec[0].
  std::vector<AeLayer> dec;
  dec.push_back(conv_layer(c, 1, Activation::kSigmoid, {16, 16, c}, rng));
  dec[0].upsample = 4;
  dec.push_back(conv_layer(c, c, Activation::kRelu, {8, 8, c}, rng));
  dec[1].upsample = 2;
  dec.push_back(dense_layer(kGlynnDim, 8 * 8 * c, Activation::kRelu, rng));
  return AutoencoderStack(std::move(enc), std::move(dec));
}

AeOutput ae_forward(const Var& x, const AutoencoderStack& stack) {
  if (x.shape().size() != 2) throw ShapeError("autoencoder input must be [N,d], got " + nd::shape_string(x.shape()));
  Var h = x;
  for (const auto& layer : stack.encoder()) h = apply_layer(h, layer);
  const std::size_t n = h.dim(0);
  Var code = h.shape().size() == 2 ? h : nd::reshape(h, {n, h.value().size() / n});
  Var r = code;
  for (std::size_t i = stack.depth(); i-- > 0;) r = apply_layer(r, stack.decoder()[i]);
  if (r.value().size() != x.value().size()) {
    throw ShapeError("reconstruction " + nd::shape_string(r.shape()) + " does not match input " +
                     nd::shape_string(x.shape()));
  }
  if (r.shape() != x.shape()) r = nd::reshape(r, x.shape());
  return {code, r};
}

Var reconstruction_loss(const Var& x, const Var& reconstruction) {
  const auto n = static_cast<double>(x.dim(0));
  return nd::scale(nd::sum(nd::square(nd::sub(x, reconstruction))), 1.0 / n);
}

Var ae_loss(const Var& x, const AutoencoderStack& stack) { return reconstruction_loss(x, ae_forward(x, stack).reconstruction); }

double dataset_loss(const GlyphDictionary& dict, const AutoencoderStack& stack) {
  const auto glyphs = dictionary_glyphs(dict);
  std::vector<std::size_t> order(glyphs.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (std::size_t start = 0; start < glyphs.size(); start += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, glyphs.size() - start);
    const Var x = Var::constant(batch_matrix(glyphs, order, start, count));
    total += ae_loss(x, stack).value()[0] * static_cast<double>(count);
  }
  return total / static_cast<double>(glyphs.size());
}

PretrainResult pretrain_autoencoder(const GlyphDictionary& dict, AutoencoderStack& stack, const PretrainConfig& config,
                                    const std::function<void(std::size_t, double)>& on_epoch) {
  if (dict.empty()) throw ConfigError("pretraining needs a non-empty glyph dictionary");
  if (config.batch_size == 0) throw ConfigError("pretraining batch size must be positive");
  const auto glyphs = dictionary_glyphs(dict);
  std::vector<std::size_t> order(glyphs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  optim::Optimizer opt(config.optimizer);

  PretrainResult result;
  result.initial_loss = dataset_loss(dict, stack);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const Var x = Var::constant(batch_matrix(glyphs, order, start, count));
      stack.params().zero_grad();
      const Var loss = ae_loss(x, stack);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw NumericError("autoencoder loss diverged at epoch " + std::to_string(epoch));
      nd::backward(loss);
      opt.step(stack.params());
      total += value * static_cast<double>(count);
    }
    const double mean = total / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  result.final_loss = config.epochs == 0 ? result.initial_loss : dataset_loss(dict, stack);
  if (!std::isfinite(result.final_loss)) {
    throw NumericError("autoencoder loss diverged at epoch " + std::to_string(config.epochs));
  }
  return result;
}

GlynnEncoder extract_encoder(const AutoencoderStack& stack, std::mt19937_64& rng, GlynnConfig config) {
  GlynnEncoder glynn(rng, config);
  static constexpr const char* kTargets[] = {"conv1", "conv2", "dense"};
  if (stack.depth() != 3) throw ShapeError("extract_encoder needs a depth-3 GLYNN mirror stack");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& layer = stack.encoder()[i];
    const std::string t = kTargets[i];
    auto& w = glynn.params().at(t + (i < 2 ? ".kernel" : ".weight"));
    auto& b = glynn.params().at(t + ".bias");
    if (layer.weight.shape() != w.shape() || layer.bias.shape() != b.shape()) {
      throw ShapeError("encoder layer " + std::to_string(i + 1) + " shape " + nd::shape_string(layer.weight.shape()) +
                       " does not match GLYNN " + t + " " + nd::shape_string(w.shape()));
    }
    w.mutable_value() = layer.weight.value();
    b.mutable_value() = layer.bias.value();
  }
  return glynn;
}

}  // namespace glyphner::enc
