#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "glyphner/autograd.hpp"
#include "glyphner/kernels.hpp"

namespace glyphner::nd {

using kernels::Padding;

enum class Mode { kTrain, kInfer };

enum class Activation { kIdentity, kSigmoid, kRelu, kLeakyRelu, kTanh };

inline constexpr double kLeakyReluSlope = 0.01;
inline constexpr double kNormEpsilon = 1e-5;

struct Stride {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var square(const Var& a);

// Full reductions to a [1] tensor.
Var sum(const Var& a);
Var mean(const Var& a);

Var matmul(const Var& a, const Var& b);                       // [M,K] x [K,N]
Var dense(const Var& x, const Var& weight, const Var& bias);  // [N,Din] x [Din,Dout] + [Dout]

// NHWC input, [k,k,Cin,Cout] kernel, [Cout] bias.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, Stride stride, Padding padding);
// Non-overlapping max pooling (window = stride = pool). Ties go to the first
// position in row-major window order.
Var maxpool2d(const Var& input, std::size_t pool);
// Nearest-neighbour upsampling of NHWC spatial axes.
Var upsample2d(const Var& input, std::size_t factor);

Var activation(const Var& x, Activation kind, double alpha = kLeakyReluSlope);
inline Var sigmoid(const Var& x) { return activation(x, Activation::kSigmoid); }
inline Var relu(const Var& x) { return activation(x, Activation::kRelu); }
inline Var tanh(const Var& x) { return activation(x, Activation::kTanh); }
inline Var leaky_relu(const Var& x, double alpha = kLeakyReluSlope) {
  return activation(x, Activation::kLeakyRelu, alpha);
}

// Per-row normalization of a rank-2 input over its last axis (D >= 2).
Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps = kNormEpsilon);

// Running statistics for batch_norm, one entry per channel.
struct BatchNormStats {
  Tensor mean;
  Tensor variance;
  static BatchNormStats identity(std::size_t channels) {
    return {Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
  }
};

// Channel axis is the last one; statistics pool every other axis. Train mode
// normalizes by batch statistics and folds them into `running` as
// running = (1 - momentum) * running + momentum * batch (unbiased variance).
// Throws ShapeError in train mode when the leading (batch) extent is < 2.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& running, Mode mode,
               double momentum = 0.1, double eps = kNormEpsilon);

// Inverted dropout: survivors scaled by 1/(1 - rate). Identity in infer mode.
Var dropout(const Var& x, double rate, Mode mode, std::mt19937_64& rng);

Var reshape(const Var& x, Shape shape);
Var concat_cols(const Var& a, const Var& b);                               // [T,A] ++ [T,B] -> [T,A+B]
Var gather_rows(const Var& x, std::span<const std::size_t> rows);          // [N,D] -> [rows,D]
Var slice_rows(const Var& x, std::size_t start, std::size_t count);        // rank-2
Var slice_cols(const Var& x, std::size_t start, std::size_t count);        // rank-2
Var stack_rows(const std::vector<Var>& rows);                              // each [1,D] -> [T,D]
Var reverse_rows(const Var& x);                                            // rank-2, flips axis 0

}  // namespace glyphner::nd
