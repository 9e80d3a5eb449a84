#include <cmath>
#include <numeric>

#include "doctest.h"
#include "glyphner/errors.hpp"
#include "glyphner/grad_check.hpp"
#include "glyphner/ops.hpp"
#include "glyphner/params.hpp"
#include "test_util.hpp"

using namespace glyphner;
using namespace glyphner::nd;
using glyphner::testing::random_tensor;

namespace {

constexpr int kSeeds = 20;
constexpr double kGradTol = 1e-4;

// Weighted readout so every output coordinate gets a distinct gradient.
Var readout(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xABCDEF);
  return sum(mul(y, Var::constant(random_tensor(y.shape(), rng))));
}

}  // namespace

TEST_CASE("tensor shape contract") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.at({1, 2}) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("conv2d sum of ones") {
  auto x = Var::constant(Tensor({1, 4, 4, 1}, 1.0));
  auto k = Var::constant(Tensor({3, 3, 1, 1}, 1.0));
  auto b = Var::constant(Tensor({1}, 0.0));
  auto y = conv2d(x, k, b, {1, 1}, Padding::kValid);
  CHECK(y.shape() == Shape{1, 2, 2, 1});
  for (double v : y.value().data()) CHECK(v == 9.0);
}

TEST_CASE("conv2d stride-2 same padding halves 64x64") {
  auto x = Var::constant(Tensor({1, 64, 64, 1}, 0.5));
  auto k = Var::constant(Tensor({3, 3, 1, 2}, 0.1));
  auto b = Var::constant(Tensor({2}, 0.0));
  CHECK(conv2d(x, k, b, {2, 2}, Padding::kSame).shape() == Shape{1, 32, 32, 2});
}

TEST_CASE("conv2d shape mismatch") {
  auto x = Var::constant(Tensor({1, 4, 4, 2}, 1.0));
  auto k = Var::constant(Tensor({3, 3, 1, 1}, 1.0));
  auto b = Var::constant(Tensor({1}, 0.0));
  CHECK_THROWS_AS(conv2d(x, k, b, {1, 1}, Padding::kSame), ShapeError);
}

TEST_CASE("maxpool2d examples") {
  auto x = Var::constant(Tensor({1, 2, 2, 1}, {1, 2, 3, 4}));
  auto y = maxpool2d(x, 2);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.value()[0] == 4.0);
  auto c = maxpool2d(Var::constant(Tensor({2, 6, 5, 3}, 0.7)), 2);
  CHECK(c.shape() == Shape{2, 3, 2, 3});
  for (double v : c.value().data()) CHECK(v == 0.7);
}

TEST_CASE("maxpool2d gradient routes to argmax only") {
  auto x = Var::leaf(Tensor({1, 2, 2, 1}, {1, 5, 3, 4}));
  backward(sum(maxpool2d(x, 2)));
  CHECK(x.grad().data()[0] == 0.0);
  CHECK(x.grad().data()[1] == 1.0);
  CHECK(x.grad().data()[2] == 0.0);
  CHECK(x.grad().data()[3] == 0.0);
}

TEST_CASE("dense examples") {
  auto x = Var::constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Tensor eye({3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye.at({i, i}) = 1.0;
  auto y = dense(x, Var::constant(eye), Var::constant(Tensor({3}, 0.0)));
  CHECK(y.value() == x.value());
  auto z = dense(x, Var::constant(Tensor({3, 2}, 0.0)), Var::constant(Tensor({2}, {7, -1})));
  CHECK(z.value() == Tensor({2, 2}, {7, -1, 7, -1}));
  CHECK_THROWS_AS(dense(x, Var::constant(Tensor({2, 2}, 0.0)), Var::constant(Tensor({2}, 0.0))), ShapeError);
}

TEST_CASE("dense matches a naive matrix multiply") {
  std::mt19937_64 rng(21);
  const auto x = random_tensor({5, 7}, rng), w = random_tensor({7, 4}, rng), b = random_tensor({4}, rng);
  auto y = dense(Var::constant(x), Var::constant(w), Var::constant(b));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = b[j];
      for (std::size_t p = 0; p < 7; ++p) acc += x.at({i, p}) * w.at({p, j});
      CHECK(std::abs(y.value().at({i, j}) - acc) <= 1e-10);
    }
}

TEST_CASE("activation values") {
  auto x = Var::constant(Tensor({2}, {0.0, -1.0}));
  CHECK(sigmoid(x).value()[0] == 0.5);
  CHECK(leaky_relu(x, 0.01).value()[1] == doctest::Approx(-0.01));
  CHECK(relu(x).value()[1] == 0.0);
  CHECK(activation(x, Activation::kIdentity).value() == x.value());
  CHECK(sigmoid(Var::constant(Tensor({1}, -800.0))).value()[0] == 0.0);
  auto z = Var::leaf(Tensor({1}, 0.0));
  backward(sum(nd::tanh(z)));
  CHECK(z.grad()[0] == 1.0);
}

TEST_CASE("layer_norm examples") {
  auto gain = Var::constant(Tensor({4}, 1.0));
  auto shift = Var::constant(Tensor({4}, 0.25));
  auto flat = layer_norm(Var::constant(Tensor({1, 4}, 1.0)), gain, shift);
  for (double v : flat.value().data()) CHECK(v == 0.25);

  auto two = layer_norm(Var::constant(Tensor({1, 2}, {0, 2})), Var::constant(Tensor({2}, 1.0)),
                        Var::constant(Tensor({2}, 0.0)));
  CHECK(two.value()[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(two.value()[1] == doctest::Approx(1.0).epsilon(1e-5));

  std::mt19937_64 rng(4);
  auto y = layer_norm(Var::constant(random_tensor({3, 64}, rng, -3, 5)), Var::constant(Tensor({64}, 1.0)),
                      Var::constant(Tensor({64}, 0.0)));
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 64; ++j) mu += y.value().at({r, j});
    mu /= 64;
    for (std::size_t j = 0; j < 64; ++j) var += std::pow(y.value().at({r, j}) - mu, 2);
    var /= 64;
    CHECK(std::abs(mu) <= 1e-6);
    CHECK(std::abs(var - 1.0) <= 1e-4);
  }
}

TEST_CASE("batch_norm examples") {
  auto gamma = Var::constant(Tensor({2}, 1.0));
  auto beta = Var::constant(Tensor({2}, 0.0));
  auto stats = BatchNormStats::identity(2);
  auto same = batch_norm(Var::constant(Tensor({2, 2}, {3, -1, 3, -1})), gamma, beta, stats, Mode::kTrain);
  for (double v : same.value().data()) CHECK(v == 0.0);

  auto fresh = BatchNormStats::identity(2);
  const Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
  auto inf = batch_norm(Var::constant(x), gamma, beta, fresh, Mode::kInfer);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(inf.value()[i] == doctest::Approx(x[i] / std::sqrt(1 + 1e-5)));

  std::mt19937_64 rng(8);
  auto st = BatchNormStats::identity(3);
  auto y = batch_norm(Var::constant(random_tensor({4, 5, 5, 3}, rng, -2, 4)), Var::constant(Tensor({3}, 1.0)),
                      Var::constant(Tensor({3}, 0.0)), st, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double mu = 0, var = 0;
    const std::size_t m = y.value().size() / 3;
    for (std::size_t i = 0; i < m; ++i) mu += y.value()[i * 3 + c];
    mu /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) var += std::pow(y.value()[i * 3 + c] - mu, 2);
    var /= static_cast<double>(m);
    CHECK(std::abs(mu) <= 1e-9);
    CHECK(std::abs(var - 1.0) <= 1e-3);
  }
  // Running statistics moved away from the identity.
  CHECK(st.mean[0] != 0.0);

  auto one = BatchNormStats::identity(2);
  CHECK_THROWS_AS(batch_norm(Var::constant(Tensor({1, 2}, 1.0)), gamma, beta, one, Mode::kTrain), ShapeError);
}

TEST_CASE("dropout contracts") {
  std::mt19937_64 rng(1);
  auto x = Var::constant(Tensor({1000}, 2.0));
  CHECK(dropout(x, 0.0, Mode::kTrain, rng).value() == x.value());
  CHECK(dropout(x, 0.7, Mode::kInfer, rng).value() == x.value());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::kTrain, rng), ConfigError);

  auto big = Var::constant(Tensor({100000}, 1.0));
  auto y = dropout(big, 0.5, Mode::kTrain, rng);
  std::size_t survivors = 0;
  double total = 0.0;
  for (double v : y.value().data()) {
    survivors += v != 0.0;
    total += v;
  }
  CHECK(std::abs(survivors / 1e5 - 0.5) <= 0.01);
  CHECK(std::abs(total / 1e5 - 1.0) <= 0.02);
}

TEST_CASE("backward examples") {
  auto w = Var::leaf(Tensor({3}, {0.5, -1, 2}));
  auto unused = Var::leaf(Tensor({2}, 1.0));
  const Tensor xv({3}, {4, 5, 6});
  backward(sum(mul(w, Var::constant(xv))));
  CHECK(w.grad() == xv);
  CHECK_FALSE(unused.has_grad());

  auto m = Var::leaf(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(backward(mul(m, m)), ShapeError);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  auto w = Var::leaf(Tensor({1}, 3.0));
  backward(square(w));
  backward(square(w));
  CHECK(w.grad()[0] == 12.0);
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("shared subexpression visited once in reverse order") {
  auto w = Var::leaf(Tensor({1}, 2.0));
  auto a = square(w);          // w^2
  auto b = add(a, a);          // 2 w^2
  auto c = mul(b, a);          // 2 w^4
  backward(sum(c));
  CHECK(w.grad()[0] == doctest::Approx(8.0 * 8.0));  // d/dw 2w^4 = 8 w^3
}

TEST_CASE("grad_check on an exact quadratic") {
  std::mt19937_64 rng(2);
  CHECK(grad_check([](const Var& x) { return sum(square(x)); }, random_tensor({6}, rng)) <= 1e-6);
}

TEST_CASE("gradient suite: every differentiable op over 20 seeds") {
  double worst_conv = 0, worst_pool = 0, worst_dense = 0, worst_act = 0, worst_ln = 0, worst_bn = 0,
         worst_misc = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    {
      auto x = Var::leaf(random_tensor({2, 6, 5, 2}, rng));
      auto k = Var::leaf(random_tensor({3, 3, 2, 3}, rng));
      auto b = Var::leaf(random_tensor({3}, rng));
      const auto pad = seed % 2 ? Padding::kSame : Padding::kValid;
      const Stride st{1 + seed % 2, 1 + (seed / 2) % 2};
      worst_conv = std::max(worst_conv, grad_check_leaves([&] { return readout(conv2d(x, k, b, st, pad), seed); },
                                                          {x, k, b}));
    }
    {
      auto x = Var::leaf(random_tensor({2, 4, 6, 3}, rng));
      worst_pool = std::max(worst_pool, grad_check_leaves([&] { return readout(maxpool2d(x, 2), seed); }, {x}));
      worst_misc = std::max(worst_misc, grad_check_leaves([&] { return readout(upsample2d(x, 2), seed); }, {x}));
    }
    {
      auto x = Var::leaf(random_tensor({3, 5}, rng));
      auto w = Var::leaf(random_tensor({5, 4}, rng));
      auto b = Var::leaf(random_tensor({4}, rng));
      worst_dense = std::max(worst_dense, grad_check_leaves([&] { return readout(dense(x, w, b), seed); }, {x, w, b}));
    }
    for (auto kind : {Activation::kSigmoid, Activation::kRelu, Activation::kLeakyRelu, Activation::kTanh}) {
      auto x = Var::leaf(random_tensor({12}, rng, -2, 2));
      worst_act = std::max(worst_act, grad_check_leaves([&] { return readout(activation(x, kind), seed); }, {x}));
    }
    {
      auto x = Var::leaf(random_tensor({3, 6}, rng, -2, 2));
      auto g = Var::leaf(random_tensor({6}, rng));
      auto s = Var::leaf(random_tensor({6}, rng));
      worst_ln = std::max(worst_ln, grad_check_leaves([&] { return readout(layer_norm(x, g, s), seed); }, {x, g, s}));
    }
    {
      auto x = Var::leaf(random_tensor({3, 2, 2, 4}, rng, -2, 2));
      auto g = Var::leaf(random_tensor({4}, rng));
      auto b = Var::leaf(random_tensor({4}, rng));
      auto stats = BatchNormStats::identity(4);
      worst_bn = std::max(worst_bn, grad_check_leaves([&] {
                            return readout(batch_norm(x, g, b, stats, Mode::kTrain), seed);
                          },
                                                      {x, g, b}));
      worst_bn = std::max(worst_bn, grad_check_leaves([&] {
                            return readout(batch_norm(x, g, b, stats, Mode::kInfer), seed);
                          },
                                                      {x, g, b}));
    }
    {
      auto a = Var::leaf(random_tensor({4, 3}, rng));
      auto c = Var::leaf(random_tensor({4, 2}, rng));
      auto m = Var::leaf(random_tensor({3, 5}, rng));
      const std::vector<std::size_t> rows{3, 0, 3, 1};
      worst_misc = std::max(worst_misc, grad_check_leaves([&] {
                              auto cat = concat_cols(a, c);
                              auto g = gather_rows(cat, rows);
                              auto r = reverse_rows(slice_cols(g, 1, 3));
                              auto mm = matmul(r, m);
                              auto st = stack_rows({slice_rows(mm, 0, 1), slice_rows(mm, 2, 1)});
                              return add(readout(st, seed), mean(square(sub(a, a))));
                            },
                                                        {a, c, m}));
      std::mt19937_64 drop_rng(seed);
      worst_misc = std::max(worst_misc, grad_check_leaves([&] {
                              drop_rng.seed(seed);
                              return readout(scale(dropout(reshape(a, {12}), 0.4, Mode::kTrain, drop_rng), 1.5),
                                             seed);
                            },
                                                        {a}));
    }
  }
  CHECK(worst_conv <= kGradTol);
  CHECK(worst_pool <= kGradTol);
  CHECK(worst_dense <= 1e-6);
  CHECK(worst_act <= kGradTol);
  CHECK(worst_ln <= kGradTol);
  CHECK(worst_bn <= kGradTol);
  CHECK(worst_misc <= kGradTol);
}

TEST_CASE("composite conv -> pool -> dense -> loss matches finite differences") {
  std::mt19937_64 rng(31);
  auto x = Var::constant(random_tensor({2, 8, 8, 1}, rng));
  auto k = Var::leaf(random_tensor({3, 3, 1, 4}, rng));
  auto kb = Var::leaf(random_tensor({4}, rng));
  auto w = Var::leaf(random_tensor({64, 3}, rng));
  auto wb = Var::leaf(random_tensor({3}, rng));
  auto loss = [&] {
    auto h = relu(conv2d(x, k, kb, {1, 1}, Padding::kSame));
    auto p = reshape(maxpool2d(h, 2), {2, 64});
    return mean(square(dense(p, w, wb)));
  };
  CHECK(grad_check_leaves(loss, {k, kb, w, wb}) <= kGradTol);
}

TEST_CASE("forward determinism") {
  std::mt19937_64 a(5), b(5);
  const auto t = random_tensor({2, 8, 8, 3}, a);
  const auto u = random_tensor({2, 8, 8, 3}, b);
  std::mt19937_64 ka(6), kb(6);
  auto run = [](const Tensor& x, std::mt19937_64& rng) {
    auto k = Var::constant(random_tensor({3, 3, 3, 4}, rng));
    auto bias = Var::constant(Tensor({4}, 0.1));
    return dropout(conv2d(Var::constant(x), k, bias, {2, 2}, Padding::kSame), 0.3, Mode::kTrain, rng).value();
  };
  CHECK(run(t, ka) == run(u, kb));
}

TEST_CASE("initializers") {
  std::mt19937_64 rng(10);
  const auto w = he_normal({100, 50}, 100, rng);
  const double bound = 2.0 * std::sqrt(2.0 / 100.0);
  for (double v : w.data()) CHECK(std::abs(v) <= bound);

  const auto q = orthogonal(8, 32, rng);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < 32; ++c) dot += q.at({i, c}) * q.at({j, c});
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
  const auto square_q = orthogonal(16, 16, rng);
  for (std::size_t i = 0; i < 16; ++i) {
    double dot = 0.0;
    for (std::size_t r = 0; r < 16; ++r) dot += square_q.at({r, i}) * square_q.at({r, (i + 1) % 16});
    CHECK(std::abs(dot) <= 1e-10);
  }
}

TEST_CASE("parameter set naming") {
  ParameterSet ps;
  ps.add("w", ParamKind::kWeight, Tensor({2}, 1.0));
  CHECK_THROWS_AS(ps.add("w", ParamKind::kBias, Tensor({2}, 1.0)), ConfigError);
  CHECK(ps.find("w")->kind == ParamKind::kWeight);
  CHECK_THROWS_AS(ps.at("nope"), ConfigError);
}
