#include "glyphner/lstm.hpp"

#include <cmath>
#include <vector>

#include "glyphner/errors.hpp"

namespace glyphner::lstm {
namespace {

using nd::Var;

State gates_to_state(const Var& gates, const State& prev, std::size_t H) {
  const Var i = nd::sigmoid(nd::slice_cols(gates, 0, H));
  const Var g = nd::tanh(nd::slice_cols(gates, 2 * H, H));
  const Var o = nd::sigmoid(nd::slice_cols(gates, 3 * H, H));
  Var c = nd::mul(i, g);
  if (prev.c) c = nd::add(nd::mul(nd::sigmoid(nd::slice_cols(gates, H, H)), prev.c), c);
  return {nd::mul(o, nd::tanh(c)), c};
}

Weights make_weights(std::size_t D, std::size_t H, nd::ParameterSet& ps, std::mt19937_64& rng, const std::string& p) {
  Weights w;
  w.wx = ps.add(p + "wx", nd::ParamKind::kWeight,
                nd::truncated_normal({D, 4 * H}, std::sqrt(2.0 / static_cast<double>(D + 4 * H)), rng));
  nd::Tensor wh({H, 4 * H});
  for (std::size_t gate = 0; gate < 4; ++gate) {
    const auto q = nd::orthogonal(H, H, rng);
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < H; ++c) wh[r * 4 * H + gate * H + c] = q[r * H + c];
  }
  w.wh = ps.add(p + "wh", nd::ParamKind::kWeight, std::move(wh));
  nd::Tensor b({4 * H}, 0.0);
  for (std::size_t c = H; c < 2 * H; ++c) b[c] = 1.0;  // forget gate starts open
  w.b = ps.add(p + "b", nd::ParamKind::kBias, std::move(b));
  return w;
}

}  // namespace

State cell(const Var& x, const State& prev, const Weights& w) {
  const std::size_t H = w.wh.dim(0);
  Var gates = nd::dense(x, w.wx, w.b);
  if (prev.h) gates = nd::add(gates, nd::matmul(prev.h, w.wh));
  return gates_to_state(gates, prev, H);
}

Var run(const Var& x, const Weights& w) {
  if (x.value().rank() != 2 || x.dim(0) == 0) throw ShapeError("LSTM input must be [T,D] with T >= 1");
  const std::size_t T = x.dim(0), H = w.wh.dim(0);
  const Var xproj = nd::dense(x, w.wx, w.b);  // every timestep's input term in one product
  State s;
  std::vector<Var> hs;
  hs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Var gates = nd::slice_rows(xproj, t, 1);
    if (s.h) gates = nd::add(gates, nd::matmul(s.h, w.wh));
    s = gates_to_state(gates, s, H);
    hs.push_back(s.h);
  }
  return nd::stack_rows(hs);
}

BiLstm::BiLstm(std::size_t input_dim, std::size_t hidden, nd::ParameterSet& params, std::mt19937_64& rng,
               const std::string& prefix)
    : hidden_(hidden) {
  if (input_dim == 0 || hidden == 0) throw ConfigError("BiLSTM dimensions must be positive");
  fw_ = make_weights(input_dim, hidden, params, rng, prefix + "fw.");
  bw_ = make_weights(input_dim, hidden, params, rng, prefix + "bw.");
}

Var BiLstm::forward(const Var& x) const {
  const Var f = run(x, fw_);
  const Var b = nd::reverse_rows(run(nd::reverse_rows(x), bw_));
  return nd::concat_cols(f, b);
}

}  // namespace glyphner::lstm
