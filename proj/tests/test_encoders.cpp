#include <cmath>

#include "doctest.h"
#include "glyphner/autoencoder.hpp"
#include "glyphner/encoders.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/grad_check.hpp"
#include "test_util.hpp"

using namespace glyphner;
using namespace glyphner::enc;
using nd::Shape;
using nd::Tensor;
using nd::Var;

namespace {

Tensor random_images(std::size_t n, std::uint64_t seed) {
  std::vector<GlyphBitmap> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(testing::synthetic_glyph(seed + i));
  return glyph_batch(g);
}

// Fixed random readout so every output coordinate reaches the loss.
Var readout(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Var w = Var::constant(testing::random_tensor(y.shape(), rng));
  return nd::sum(nd::mul(y, w));
}

std::vector<Var> leaves(const nd::ParameterSet& ps) {
  std::vector<Var> out;
  for (const auto& p : ps.items()) out.push_back(p.var);
  return out;
}

AeLayer dense(Tensor w, nd::Activation act) {
  AeLayer l;
  const auto dout = w.dim(1);
  l.in_shape = {w.dim(0)};
  l.weight = Var::leaf(std::move(w));
  l.bias = Var::leaf(Tensor({dout}, 0.0));
  l.act = act;
  return l;
}

Tensor identity(std::size_t d) {
  Tensor t({d, d}, 0.0);
  for (std::size_t i = 0; i < d; ++i) t.at({i, i}) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("strided encoder shape trace and output") {
  std::mt19937_64 rng(1);
  StridedEncoder e(rng);
  for (std::size_t n : {1, 3}) {
    ShapeTrace trace;
    const Var y = e.forward(Var::constant(random_images(n, 10)), &trace);
    CHECK(y.shape() == Shape{n, kStridedDim});
    const std::vector<std::pair<std::string, Shape>> expected{
        {"input", {64, 64, 1}}, {"conv1", {32, 32, 64}}, {"conv2", {16, 16, 64}}, {"conv3", {8, 8, 64}},
        {"conv4", {4, 4, 64}},  {"flatten", {1024}},     {"dense", {64}}};
    CHECK(trace == expected);
    for (std::size_t r = 0; r < n; ++r) {
      double mean = 0;
      for (std::size_t c = 0; c < kStridedDim; ++c) mean += y.value().at({r, c});
      CHECK(std::abs(mean / kStridedDim) <= 1e-6);
    }
  }
}

TEST_CASE("GLYNN shape trace and output") {
  std::mt19937_64 rng(2);
  GlynnEncoder e(rng);
  ShapeTrace trace;
  const Var y = e.forward(Var::constant(random_images(4, 20)), nd::Mode::kTrain, rng, &trace);
  CHECK(y.shape() == Shape{4, kGlynnDim});
  const std::vector<std::pair<std::string, Shape>> expected{
      {"input", {64, 64, 1}}, {"conv1", {32, 32, 32}}, {"pool1", {16, 16, 32}}, {"conv2", {16, 16, 32}},
      {"pool2", {8, 8, 32}},  {"flatten", {2048}},     {"dense", {256}}};
  CHECK(trace == expected);
  CHECK(e.forward(Var::constant(random_images(1, 5)), nd::Mode::kInfer, rng).shape() == Shape{1, kGlynnDim});
}

TEST_CASE("GLYNN rejects a train batch of one and bad dropout") {
  std::mt19937_64 rng(3);
  GlynnEncoder e(rng);
  CHECK_THROWS_AS(e.forward(Var::constant(random_images(1, 1)), nd::Mode::kTrain, rng), ShapeError);
  CHECK_THROWS_AS(GlynnEncoder(rng, {.dropout1 = 1.0}), ConfigError);
  CHECK_THROWS_AS(GlynnEncoder(rng, {.dropout2 = -0.1}), ConfigError);
  StridedEncoder s(rng);
  CHECK_THROWS_AS(s.forward(Var::constant(Tensor({1, 32, 32, 1}, 0.0))), ShapeError);
}

TEST_CASE("encoders are deterministic in infer mode") {
  std::mt19937_64 rng(4);
  GlynnEncoder g(rng);
  StridedEncoder s(rng);
  const Var x = Var::constant(random_images(3, 30));
  std::mt19937_64 r1(1), r2(99);
  CHECK(g.forward(x, nd::Mode::kInfer, r1).value() == g.forward(x, nd::Mode::kInfer, r2).value());
  CHECK(s.forward(x).value() == s.forward(x).value());
}

TEST_CASE("gradient flows end to end through the strided encoder") {
  std::mt19937_64 rng(5);
  StridedEncoder e(rng);
  // Zero biases put blank pixels exactly on the leaky-ReLU kink; move off it.
  for (auto& p : e.params().items())
    if (p.kind == nd::ParamKind::kBias) p.var.mutable_value() = testing::random_tensor(p.var.shape(), rng, 0.05, 0.2);
  const Var x = Var::constant(random_images(2, 40));
  const double err = nd::grad_check_leaves([&] { return readout(e.forward(x), 77); }, leaves(e.params()), 1e-5, 6);
  CHECK(err <= 1e-4);
}

TEST_CASE("gradient flows end to end through GLYNN") {
  std::mt19937_64 rng(6);
  GlynnEncoder e(rng);
  const Var x = Var::constant(random_images(3, 50));
  for (auto mode : {nd::Mode::kTrain, nd::Mode::kInfer}) {
    CAPTURE(static_cast<int>(mode));
    auto loss = [&] {
      std::mt19937_64 drop(123);  // same dropout mask on every evaluation
      return readout(e.forward(x, mode, drop), 88);
    };
    CHECK(nd::grad_check_leaves(loss, leaves(e.params()), 1e-5, 6) <= 1e-4);
  }
}

TEST_CASE("single identity layer reconstructs its input") {
  const std::size_t d = 16;
  std::vector<AeLayer> enc, dec;
  enc.push_back(dense(identity(d), nd::Activation::kIdentity));
  dec.push_back(dense(identity(d), nd::Activation::kIdentity));
  AutoencoderStack stack(std::move(enc), std::move(dec));
  std::mt19937_64 rng(7);
  const Var x = Var::constant(testing::random_tensor({3, d}, rng, 0, 1));
  const auto out = ae_forward(x, stack);
  CHECK(out.reconstruction.value() == x.value());
  CHECK(ae_loss(x, stack).value()[0] == 0.0);
}

TEST_CASE("zero input with zero biases and ReLU reconstructs zero") {
  std::mt19937_64 rng(8);
  std::vector<AeLayer> enc, dec;
  enc.push_back(dense(testing::random_tensor({kGlyphPixels, 32}, rng), nd::Activation::kRelu));
  dec.push_back(dense(testing::random_tensor({32, kGlyphPixels}, rng), nd::Activation::kRelu));
  AutoencoderStack stack(std::move(enc), std::move(dec));
  const auto out = ae_forward(Var::constant(Tensor({2, kGlyphPixels}, 0.0)), stack);
  for (double v : out.reconstruction.value().data()) CHECK(v == 0.0);
}

TEST_CASE("GLYNN mirror stack: code dimension and reconstruction shape") {
  std::mt19937_64 rng(9);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  CHECK(stack.depth() == 3);
  CHECK(stack.params().size() == 12);
  const Var x = Var::constant(random_images(2, 60).reshaped({2, kGlyphPixels}));
  const auto out = ae_forward(x, stack);
  CHECK(out.code.shape() == Shape{2, kGlynnDim});
  CHECK(out.reconstruction.shape() == Shape{2, kGlyphPixels});
  CHECK_THROWS_AS(ae_forward(Var::constant(Tensor({2, 100}, 0.0)), stack), ShapeError);
}

TEST_CASE("reconstruction loss examples") {
  const Var ones = Var::constant(Tensor({2, kGlyphPixels}, 1.0));
  const Var zeros = Var::constant(Tensor({2, kGlyphPixels}, 0.0));
  CHECK(reconstruction_loss(ones, zeros).value()[0] == 4096.0);
  CHECK(reconstruction_loss(ones, ones).value()[0] == 0.0);
  std::mt19937_64 rng(10);
  for (int seed = 0; seed < 20; ++seed) {
    const Tensor a = testing::random_tensor({3, kGlyphPixels}, rng, 0, 1);
    const Tensor b = testing::random_tensor({3, kGlyphPixels}, rng, 0, 1);
    double direct = 0;
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t i = 0; i < kGlyphPixels; ++i) {
        const double diff = a.at({n, i}) - b.at({n, i});
        direct += diff * diff;
      }
    direct /= 3;
    CHECK(std::abs(reconstruction_loss(Var::constant(a), Var::constant(b)).value()[0] - direct) <= 1e-10);
  }
}

TEST_CASE("gradient flows through the autoencoder loss") {
  std::mt19937_64 rng(11);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  const Var x = Var::constant(random_images(2, 70).reshaped({2, kGlyphPixels}));
  CHECK(nd::grad_check_leaves([&] { return ae_loss(x, stack); }, leaves(stack.params()), 1e-5, 4) <= 1e-4);
}

TEST_CASE("pretraining: zero epochs leaves the stack unchanged") {
  std::mt19937_64 rng(12);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  std::vector<Tensor> before;
  for (const auto& p : stack.params().items()) before.push_back(p.var.value());
  const auto dict = testing::synthetic_dictionary(4);
  const auto res = pretrain_autoencoder(dict, stack, {.epochs = 0});
  CHECK(res.epoch_loss.empty());
  CHECK(res.final_loss == res.initial_loss);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(stack.params().items()[i].var.value() == before[i]);
}

TEST_CASE("pretraining: short run has a finite decreasing loss") {
  std::mt19937_64 rng(13);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  const auto dict = testing::synthetic_dictionary(12);
  std::size_t calls = 0;
  const auto res = pretrain_autoencoder(dict, stack, {.epochs = 6, .batch_size = 4},
                                        [&](std::size_t epoch, double) { CHECK(epoch == ++calls); });
  CHECK(calls == 6);
  REQUIRE(res.epoch_loss.size() == 6);
  for (double l : res.epoch_loss) CHECK(std::isfinite(l));
  CHECK(res.final_loss < res.initial_loss);
}

TEST_CASE("pretraining errors") {
  std::mt19937_64 rng(14);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  CHECK_THROWS_AS(pretrain_autoencoder(GlyphDictionary{}, stack, {}), ConfigError);
  stack.params().at("dec1.bias").mutable_value()[0] = std::nan("");
  try {
    pretrain_autoencoder(testing::synthetic_dictionary(3), stack, {.epochs = 2});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("extract_encoder copies weights and stays trainable") {
  std::mt19937_64 rng(15);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  auto glynn = extract_encoder(stack, rng);
  CHECK(glynn.params().at("conv1.kernel").value() == stack.params().at("enc1.weight").value());
  CHECK(glynn.params().at("conv1.bias").value() == stack.params().at("enc1.bias").value());
  CHECK(glynn.params().at("conv2.kernel").value() == stack.params().at("enc2.weight").value());
  CHECK(glynn.params().at("dense.weight").value() == stack.params().at("enc3.weight").value());

  const Var x = Var::constant(random_images(2, 80));
  const Var loss = readout(glynn.forward(x, nd::Mode::kTrain, rng), 5);
  nd::backward(loss);
  for (const auto& p : glynn.params().items()) CHECK(p.var.has_grad());
  optim::Optimizer opt({.kind = optim::OptimizerKind::kAdam, .lr = 1e-2});
  opt.step(glynn.params());
  CHECK_FALSE(glynn.params().at("conv1.kernel").value() == stack.params().at("enc1.weight").value());

  std::vector<AeLayer> enc, dec;
  enc.push_back(dense(identity(4), nd::Activation::kIdentity));
  dec.push_back(dense(identity(4), nd::Activation::kIdentity));
  CHECK_THROWS_AS(extract_encoder(AutoencoderStack(std::move(enc), std::move(dec)), rng), ShapeError);
}

TEST_CASE("pretrained encoder separates BLACK from WHITE") {
  std::mt19937_64 rng(16);
  auto stack = AutoencoderStack::glynn_mirror(rng);
  pretrain_autoencoder(testing::synthetic_dictionary(6), stack, {.epochs = 2, .batch_size = 3});
  auto glynn = extract_encoder(stack, rng);
  const std::vector<GlyphBitmap> bw{GlyphBitmap::black(), GlyphBitmap::white()};
  const Tensor y = glynn.forward(Var::constant(glyph_batch(bw)), nd::Mode::kInfer, rng).value();
  double dist = 0;
  for (std::size_t i = 0; i < kGlynnDim; ++i) dist += std::pow(y.at({0, i}) - y.at({1, i}), 2);
  CHECK(std::sqrt(dist) > 0.0);
}
