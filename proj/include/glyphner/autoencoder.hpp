#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "glyphner/encoders.hpp"
#include "glyphner/glyph_dict.hpp"
#include "glyphner/ops.hpp"
#include "glyphner/optim.hpp"
#include "glyphner/params.hpp"

namespace glyphner::enc {

// One affine stage h = s(W h' + b). Conv stages may max-pool their output
// (encoder side) or upsample their input (decoder side).
struct AeLayer {
  enum class Kind { kDense, kConv };
  Kind kind = Kind::kDense;
  nd::Var weight;  // dense [Din,Dout]; conv [3,3,Cin,Cout]
  nd::Var bias;
  nd::Activation act = nd::Activation::kIdentity;
  std::size_t stride = 1;
  std::size_t pool = 1;
  std::size_t upsample = 1;
  nd::Shape in_shape;  // per-sample input shape; the input is reshaped to it
};

class AutoencoderStack {
 public:
  // Parameters are registered as "enc<i>.weight", "dec<i>.bias", etc.
  // Decoder layer i maps the shape of h^i back to the shape of h^(i-1).
  AutoencoderStack(std::vector<AeLayer> encoder, std::vector<AeLayer> decoder);

  // The depth-3 stack whose encoder matches GLYNN's trainable layers:
  // conv(1->32, s2, sigmoid, pool 2), conv(32->32, s1, ReLU, pool 2),
  // dense(2048->256); decoder in reverse ending in a sigmoid 64x64 map.
  static AutoencoderStack glynn_mirror(std::mt19937_64& rng);

  const std::vector<AeLayer>& encoder() const noexcept { return encoder_; }
  const std::vector<AeLayer>& decoder() const noexcept { return decoder_; }
  std::size_t depth() const noexcept { return encoder_.size(); }
  nd::ParameterSet& params() noexcept { return params_; }
  const nd::ParameterSet& params() const noexcept { return params_; }

 private:
  std::vector<AeLayer> encoder_;
  std::vector<AeLayer> decoder_;
  nd::ParameterSet params_;
};

struct AeOutput {
  nd::Var code;            // [N, code dim]
  nd::Var reconstruction;  // [N, d]
};

// x: [N,d] -> code h^N and reconstruction h_r^1. Throws ShapeError when a
// layer's input does not match its declared shape.
AeOutput ae_forward(const nd::Var& x, const AutoencoderStack& stack);

// (1/N) * sum_n ||x_n - h_r^1(x_n)||^2.
nd::Var reconstruction_loss(const nd::Var& x, const nd::Var& reconstruction);
nd::Var ae_loss(const nd::Var& x, const AutoencoderStack& stack);

struct PretrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  optim::OptimizerConfig optimizer{.kind = optim::OptimizerKind::kRmsprop, .lr = 1e-3, .weight_decay = 0.0};
};

struct PretrainResult {
  double initial_loss = 0.0;        // dataset loss before the first update
  double final_loss = 0.0;          // dataset loss after the last epoch
  std::vector<double> epoch_loss;   // mean minibatch loss per epoch
};

// Dataset loss over every glyph of `dict`, evaluated in chunks.
double dataset_loss(const GlyphDictionary& dict, const AutoencoderStack& stack);

// Throws ConfigError for an empty dictionary and NumericError naming the
// epoch when the loss becomes non-finite. `on_epoch(epoch, loss)` is called
// after each epoch when set.
PretrainResult pretrain_autoencoder(const GlyphDictionary& dict, AutoencoderStack& stack, const PretrainConfig& config,
                                    const std::function<void(std::size_t, double)>& on_epoch = {});

// A GLYNN encoder whose conv and dense weights are copies of the stack's
// encoder layers; batch-norm starts at identity. Throws ShapeError when the
// stack does not mirror GLYNN.
GlynnEncoder extract_encoder(const AutoencoderStack& stack, std::mt19937_64& rng, GlynnConfig config = {});

}  // namespace glyphner::enc
