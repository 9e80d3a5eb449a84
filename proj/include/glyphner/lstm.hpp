#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "glyphner/ops.hpp"
#include "glyphner/params.hpp"

namespace glyphner::lstm {

// Gate blocks are laid out input, forget, cell, output along the 4H axis.
struct Weights {
  nd::Var wx;  // [D, 4H]
  nd::Var wh;  // [H, 4H]
  nd::Var b;   // [4H]
};

struct State {
  nd::Var h;  // [B, H]
  nd::Var c;  // [B, H]
};

// One step from x [B, D]. An empty `prev` is the zero state.
State cell(const nd::Var& x, const State& prev, const Weights& w);

// Runs a single direction over x [T, D] and returns the hidden states [T, H].
nd::Var run(const nd::Var& x, const Weights& w);

// One bidirectional layer; output row t is forward(t) ++ backward(t).
class BiLstm {
 public:
  // Registers "<prefix>fw.{wx,wh,b}" and "<prefix>bw.*" in `params`.
  BiLstm(std::size_t input_dim, std::size_t hidden, nd::ParameterSet& params, std::mt19937_64& rng,
         const std::string& prefix = "lstm.");

  // x: [T, D] with T >= 1 -> [T, 2H]. No dropout here; the tagger applies it.
  nd::Var forward(const nd::Var& x) const;

  std::size_t hidden() const noexcept { return hidden_; }
  const Weights& fw() const noexcept { return fw_; }
  const Weights& bw() const noexcept { return bw_; }

 private:
  std::size_t hidden_;
  Weights fw_;
  Weights bw_;
};

}  // namespace glyphner::lstm
