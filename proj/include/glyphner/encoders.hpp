#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyphner/glyph_dict.hpp"
#include "glyphner/ops.hpp"
#include "glyphner/params.hpp"

namespace glyphner::enc {

inline constexpr std::size_t kStridedDim = 64;
inline constexpr std::size_t kGlynnDim = 256;

// Stacks bitmaps into an NHWC [N,64,64,1] tensor of normalized ink values.
nd::Tensor glyph_batch(std::span<const GlyphBitmap* const> glyphs);
nd::Tensor glyph_batch(std::span<const GlyphBitmap> glyphs);
// Same values flattened to [N,4096].
nd::Tensor glyph_matrix(std::span<const GlyphBitmap* const> glyphs);

// Per-sample shapes after each stage, filled when a trace is requested.
using ShapeTrace = std::vector<std::pair<std::string, nd::Shape>>;

// Non-trainable tensors that still belong in a checkpoint (batch-norm
// running statistics).
using BufferList = std::vector<std::pair<std::string, nd::Tensor*>>;

// Four 3x3 stride-2 convolutions of 64 channels with leaky ReLU, then a
// dense projection to 64 and layer normalization.
class StridedEncoder {
 public:
  explicit StridedEncoder(std::mt19937_64& rng);

  // images: [N,64,64,1] -> [N,64].
  nd::Var forward(const nd::Var& images, ShapeTrace* trace = nullptr) const;

  nd::ParameterSet& params() noexcept { return params_; }
  const nd::ParameterSet& params() const noexcept { return params_; }

 private:
  nd::ParameterSet params_;
};

struct GlynnConfig {
  double dropout1 = 0.3;
  double dropout2 = 0.5;
};

// conv(32, s2, sigmoid) -> BN -> pool 2 -> dropout -> conv(32, s1, ReLU)
// -> BN -> pool 2 -> dropout -> flatten 2048 -> dense 256.
class GlynnEncoder {
 public:
  // Throws ConfigError when a dropout rate lies outside [0,1).
  GlynnEncoder(std::mt19937_64& rng, GlynnConfig config = {});

  // images: [N,64,64,1] -> [N,256]. Train mode needs N >= 2 and updates the
  // batch-norm running statistics; infer mode is deterministic.
  nd::Var forward(const nd::Var& images, nd::Mode mode, std::mt19937_64& rng, ShapeTrace* trace = nullptr);

  nd::ParameterSet& params() noexcept { return params_; }
  const nd::ParameterSet& params() const noexcept { return params_; }
  BufferList buffers();
  const GlynnConfig& config() const noexcept { return config_; }
  nd::BatchNormStats& bn1() noexcept { return bn1_; }
  nd::BatchNormStats& bn2() noexcept { return bn2_; }

 private:
  GlynnConfig config_;
  nd::ParameterSet params_;
  nd::BatchNormStats bn1_;
  nd::BatchNormStats bn2_;
};

}  // namespace glyphner::enc
