#include "glyphner/encoders.hpp"

#include <cmath>

#include "glyphner/errors.hpp"

namespace glyphner::enc {
namespace {

using nd::ParamKind;
using nd::Tensor;
using nd::Var;

constexpr std::size_t kStridedChannels = 64;
constexpr std::size_t kStridedLayers = 4;
constexpr std::size_t kGlynnChannels = 32;

void record(ShapeTrace* trace, const std::string& stage, const Var& v) {
  if (!trace) return;
  const auto& s = v.shape();
  trace->emplace_back(stage, nd::Shape(s.begin() + 1, s.end()));
}

Tensor lecun_normal(const nd::Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  return nd::truncated_normal(shape, std::sqrt(1.0 / static_cast<double>(fan_in)), rng);
}

void check_images(const Var& images) {
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != kGlyphSide || s[2] != kGlyphSide || s[3] != 1) {
    throw ShapeError("glyph encoder expects [N,64,64,1], got " + nd::shape_string(s));
  }
}

}  // namespace

Tensor glyph_batch(std::span<const GlyphBitmap* const> glyphs) {
  if (glyphs.empty()) throw ShapeError("glyph batch must not be empty");
  std::vector<double> values;
  values.reserve(glyphs.size() * kGlyphPixels);
  for (const auto* g : glyphs) g->append_values(values);
  return Tensor({glyphs.size(), kGlyphSide, kGlyphSide, 1}, std::move(values));
}

Tensor glyph_batch(std::span<const GlyphBitmap> glyphs) {
  std::vector<const GlyphBitmap*> ptrs;
  for (const auto& g : glyphs) ptrs.push_back(&g);
  return glyph_batch(ptrs);
}

Tensor glyph_matrix(std::span<const GlyphBitmap* const> glyphs) {
  return glyph_batch(glyphs).reshaped({glyphs.size(), kGlyphPixels});
}

StridedEncoder::StridedEncoder(std::mt19937_64& rng) {
  std::size_t in_c = 1;
  for (std::size_t i = 1; i <= kStridedLayers; ++i) {
    const auto name = "conv" + std::to_string(i);
    params_.add(name + ".kernel", ParamKind::kWeight,
                nd::he_normal({3, 3, in_c, kStridedChannels}, 9 * in_c, rng));
    params_.add(name + ".bias", ParamKind::kBias, Tensor({kStridedChannels}, 0.0));
    in_c = kStridedChannels;
  }
  const std::size_t flat = 4 * 4 * kStridedChannels;
  params_.add("dense.weight", ParamKind::kWeight, lecun_normal({flat, kStridedDim}, flat, rng));
  params_.add("dense.bias", ParamKind::kBias, Tensor({kStridedDim}, 0.0));
  params_.add("norm.gain", ParamKind::kNorm, Tensor({kStridedDim}, 1.0));
  params_.add("norm.shift", ParamKind::kNorm, Tensor({kStridedDim}, 0.0));
}

Var StridedEncoder::forward(const Var& images, ShapeTrace* trace) const {
  check_images(images);
  const auto& ps = params_;
  record(trace, "input", images);
  Var h = images;
  for (std::size_t i = 1; i <= kStridedLayers; ++i) {
    const auto name = "conv" + std::to_string(i);
    h = nd::leaky_relu(nd::conv2d(h, ps.at(name + ".kernel"), ps.at(name + ".bias"), {2, 2}, nd::Padding::kSame));
    record(trace, name, h);
  }
  const std::size_t n = h.dim(0);
  h = nd::reshape(h, {n, h.value().size() / n});
  record(trace, "flatten", h);
  h = nd::dense(h, ps.at("dense.weight"), ps.at("dense.bias"));
  record(trace, "dense", h);
  return nd::layer_norm(h, ps.at("norm.gain"), ps.at("norm.shift"));
}

GlynnEncoder::GlynnEncoder(std::mt19937_64& rng, GlynnConfig config)
    : config_(config), bn1_(nd::BatchNormStats::identity(kGlynnChannels)),
      bn2_(nd::BatchNormStats::identity(kGlynnChannels)) {
  for (double r : {config_.dropout1, config_.dropout2}) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("GLYNN dropout rate must lie in [0,1), got " + std::to_string(r));
  }
  const std::size_t c = kGlynnChannels;
  params_.add("conv1.kernel", ParamKind::kWeight, nd::he_normal({3, 3, 1, c}, 9, rng));
  params_.add("conv1.bias", ParamKind::kBias, Tensor({c}, 0.0));
  params_.add("bn1.gamma", ParamKind::kNorm, Tensor({c}, 1.0));
  params_.add("bn1.beta", ParamKind::kNorm, Tensor({c}, 0.0));
  params_.add("conv2.kernel", ParamKind::kWeight, nd::he_normal({3, 3, c, c}, 9 * c, rng));
  params_.add("conv2.bias", ParamKind::kBias, Tensor({c}, 0.0));
  params_.add("bn2.gamma", ParamKind::kNorm, Tensor({c}, 1.0));
  params_.add("bn2.beta", ParamKind::kNorm, Tensor({c}, 0.0));
  const std::size_t flat = 8 * 8 * c;
  params_.add("dense.weight", ParamKind::kWeight, lecun_normal({flat, kGlynnDim}, flat, rng));
  params_.add("dense.bias", ParamKind::kBias, Tensor({kGlynnDim}, 0.0));
}

BufferList GlynnEncoder::buffers() {
  return {{"bn1.running_mean", &bn1_.mean},
          {"bn1.running_var", &bn1_.variance},
          {"bn2.running_mean", &bn2_.mean},
          {"bn2.running_var", &bn2_.variance}};
}

Var GlynnEncoder::forward(const Var& images, nd::Mode mode, std::mt19937_64& rng, ShapeTrace* trace) {
  check_images(images);
  auto& ps = params_;
  record(trace, "input", images);
  Var h = nd::sigmoid(nd::conv2d(images, ps.at("conv1.kernel"), ps.at("conv1.bias"), {2, 2}, nd::Padding::kSame));
  record(trace, "conv1", h);
  h = nd::batch_norm(h, ps.at("bn1.gamma"), ps.at("bn1.beta"), bn1_, mode);
  h = nd::maxpool2d(h, 2);
  record(trace, "pool1", h);
  h = nd::dropout(h, config_.dropout1, mode, rng);
  h = nd::relu(nd::conv2d(h, ps.at("conv2.kernel"), ps.at("conv2.bias"), {1, 1}, nd::Padding::kSame));
  record(trace, "conv2", h);
  h = nd::batch_norm(h, ps.at("bn2.gamma"), ps.at("bn2.beta"), bn2_, mode);
  h = nd::maxpool2d(h, 2);
  record(trace, "pool2", h);
  h = nd::dropout(h, config_.dropout2, mode, rng);
  const std::size_t n = h.dim(0);
  h = nd::reshape(h, {n, h.value().size() / n});
  record(trace, "flatten", h);
  h = nd::dense(h, ps.at("dense.weight"), ps.at("dense.bias"));
  record(trace, "dense", h);
  return h;
}

}  // namespace glyphner::enc
