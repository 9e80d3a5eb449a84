#include "glyphner/ops.hpp"

#include <algorithm>
#include <cmath>

#include "glyphner/errors.hpp"

namespace glyphner::nd {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

void axpy(Tensor& dst, const Tensor& src, double factor = 1.0) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  axpy(out, b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (auto* g = self.input_grad(i)) axpy(*g, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  axpy(out, b.value(), -1.0);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (auto* g = self.input_grad(0)) axpy(*g, self.grad);
    if (auto* g = self.input_grad(1)) axpy(*g, self.grad, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (auto* g = self.input_grad(1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return make_result(std::move(out), {a}, [factor](Node& self) {
    if (auto* g = self.input_grad(0)) axpy(*g, self.grad, factor);
  });
}

Var square(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= v;
  return make_result(std::move(out), {a}, [](Node& self) {
    const auto& x = self.inputs[0]->value;
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += 2.0 * x[i] * self.grad[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_result(Tensor::scalar(s), {a}, [](Node& self) {
    if (auto* g = self.input_grad(0))
      for (auto& v : g->data()) v += self.grad[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out({m, n});
  kernels::matmul(m, k, n, a.value().data(), b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    if (auto* g = self.input_grad(0))
      kernels::matmul_a_bt(m, k, n, self.grad.data(), self.inputs[1]->value.data(), g->data());
    if (auto* g = self.input_grad(1))
      kernels::matmul_at_b(m, k, n, self.inputs[0]->value.data(), self.grad.data(), g->data());
  });
}

Var dense(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "dense");
  require_rank(weight, 2, "dense");
  const auto m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  if (weight.dim(0) != k || bias.value().size() != n) {
    throw ShapeError("dense: input " + shape_string(x.shape()) + ", weight " + shape_string(weight.shape()) +
                     ", bias " + shape_string(bias.shape()));
  }
  Tensor out({m, n});
  kernels::matmul(m, k, n, x.value().data(), weight.value().data(), out.data());
  const auto& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return make_result(std::move(out), {x, weight, bias}, [m, k, n](Node& self) {
    if (auto* g = self.input_grad(0))
      kernels::matmul_a_bt(m, k, n, self.grad.data(), self.inputs[1]->value.data(), g->data());
    if (auto* g = self.input_grad(1))
      kernels::matmul_at_b(m, k, n, self.inputs[0]->value.data(), self.grad.data(), g->data());
    if (auto* g = self.input_grad(2))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
  });
}

Var conv2d(const Var& input, const Var& kernel, const Var& bias, Stride stride, Padding padding) {
  require_rank(input, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  const auto& ks = kernel.shape();
  if (ks[0] != ks[1] || ks[2] != input.dim(3) || bias.value().size() != ks[3]) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + ", kernel " + shape_string(ks) + ", bias " +
                     shape_string(bias.shape()));
  }
  const auto geom = kernels::conv2d_geometry(input.dim(0), input.dim(1), input.dim(2), input.dim(3), ks[0], ks[3],
                                             stride.h, stride.w, padding);
  Tensor out({geom.batch, geom.out_h, geom.out_w, geom.out_c});
  kernels::conv2d_forward(geom, input.value().data(), kernel.value().data(), bias.value().data(), out.data());
  return make_result(std::move(out), {input, kernel, bias}, [geom](Node& self) {
    if (auto* g = self.input_grad(0))
      kernels::conv2d_backward_input(geom, self.grad.data(), self.inputs[1]->value.data(), g->data());
    auto* gk = self.input_grad(1);
    auto* gb = self.input_grad(2);
    if (gk || gb) {
      Tensor scratch_k, scratch_b;
      if (!gk) {
        scratch_k = Tensor(self.inputs[1]->value.shape());
        gk = &scratch_k;
      }
      if (!gb) {
        scratch_b = Tensor(self.inputs[2]->value.shape());
        gb = &scratch_b;
      }
      kernels::conv2d_backward_kernel(geom, self.inputs[0]->value.data(), self.grad.data(), gk->data(), gb->data());
    }
  });
}

Var maxpool2d(const Var& input, std::size_t pool) {
  require_rank(input, 4, "maxpool2d");
  const auto n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  if (pool == 0 || h < pool || w < pool) {
    throw ShapeError("maxpool2d: pool " + std::to_string(pool) + " on " + shape_string(input.shape()));
  }
  const auto oh = h / pool, ow = w / pool;
  Tensor out({n, oh, ow, c});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto& x = input.value();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = ((b * h + oy * pool) * w + ox * pool) * c + ch;
          for (std::size_t py = 0; py < pool; ++py)
            for (std::size_t px = 0; px < pool; ++px) {
              const auto idx = ((b * h + oy * pool + py) * w + ox * pool + px) * c + ch;
              if (x[idx] > x[best]) best = idx;
            }
          const auto o = ((b * oh + oy) * ow + ox) * c + ch;
          out[o] = x[best];
          (*argmax)[o] = best;
        }
  return make_result(std::move(out), {input}, [argmax](Node& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t o = 0; o < argmax->size(); ++o) (*g)[(*argmax)[o]] += self.grad[o];
  });
}

Var upsample2d(const Var& input, std::size_t factor) {
  require_rank(input, 4, "upsample2d");
  if (factor == 0) throw ShapeError("upsample2d: factor must be positive");
  const auto n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const auto oh = h * factor, ow = w * factor;
  Tensor out({n, oh, ow, c});
  const auto& x = input.value();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const double* src = x.ptr() + ((b * h + y / factor) * w + xx / factor) * c;
        std::copy(src, src + c, out.ptr() + ((b * oh + y) * ow + xx) * c);
      }
  return make_result(std::move(out), {input}, [n, h, w, c, factor](Node& self) {
    auto* g = self.input_grad(0);
    if (!g) return;
    const auto oh = h * factor, ow = w * factor;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const double* src = self.grad.ptr() + ((b * oh + y) * ow + xx) * c;
          double* dst = g->ptr() + ((b * h + y / factor) * w + xx / factor) * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
  });
}

Var activation(const Var& x, Activation kind, double alpha) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    switch (kind) {
      case Activation::kIdentity:
        break;
      case Activation::kSigmoid:
        v = stable_sigmoid(v);
        break;
      case Activation::kRelu:
        v = v > 0.0 ? v : 0.0;
        break;
      case Activation::kLeakyRelu:
        v = v >= 0.0 ? v : alpha * v;
        break;
      case Activation::kTanh:
        v = std::tanh(v);
        break;
    }
  }
  return make_result(std::move(out), {x}, [kind, alpha](Node& self) {
    auto* g = self.input_grad(0);
    if (!g) return;
    const auto& in = self.inputs[0]->value;
    const auto& y = self.value;
    for (std::size_t i = 0; i < g->size(); ++i) {
      double d = 1.0;
      switch (kind) {
        case Activation::kIdentity:
          break;
        case Activation::kSigmoid:
          d = y[i] * (1.0 - y[i]);
          break;
        case Activation::kRelu:
          d = in[i] > 0.0 ? 1.0 : 0.0;
          break;
        case Activation::kLeakyRelu:
          d = in[i] >= 0.0 ? 1.0 : alpha;
          break;
        case Activation::kTanh:
          d = 1.0 - y[i] * y[i];
          break;
      }
      (*g)[i] += d * self.grad[i];
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps) {
  require_rank(x, 2, "layer_norm");
  const auto rows = x.dim(0), d = x.dim(1);
  if (d < 2) throw ShapeError("layer_norm: needs at least 2 features");
  if (gain.value().size() != d || shift.value().size() != d) throw ShapeError("layer_norm: gain/shift extent");
  Tensor out({rows, d});
  auto xhat = std::make_shared<Tensor>(Shape{rows, d});
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.ptr() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gain.value()[j] + shift.value()[j];
    }
  }
  return make_result(std::move(out), {x, gain, shift}, [rows, d, xhat, inv_std](Node& self) {
    const auto& gamma = self.inputs[1]->value;
    auto* gx = self.input_grad(0);
    auto* gg = self.input_grad(1);
    auto* gs = self.input_grad(2);
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = self.grad.ptr() + r * d;
      const double* h = xhat->ptr() + r * d;
      double sum_d = 0.0, sum_dh = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (gg) (*gg)[j] += dy[j] * h[j];
        if (gs) (*gs)[j] += dy[j];
        dxhat[j] = dy[j] * gamma[j];
        sum_d += dxhat[j];
        sum_dh += dxhat[j] * h[j];
      }
      if (!gx) continue;
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) {
        (*gx)[r * d + j] += (*inv_std)[r] * (dxhat[j] - inv_d * sum_d - h[j] * inv_d * sum_dh);
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& running, Mode mode,
               double momentum, double eps) {
  const auto& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("batch_norm: needs a batch axis and a channel axis");
  const auto c = xv.shape().back();
  const auto m = xv.size() / c;  // elements pooled per channel
  if (gamma.value().size() != c || beta.value().size() != c || running.mean.size() != c ||
      running.variance.size() != c) {
    throw ShapeError("batch_norm: parameter extent does not match " + std::to_string(c) + " channels");
  }
  Tensor out(xv.shape());
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(c);
  const bool train = mode == Mode::kTrain;
  if (train) {
    if (xv.dim(0) < 2) throw ShapeError("batch_norm: train mode needs a batch of at least 2");
    std::vector<double> mu(c, 0.0), var(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) mu[ch] += xv[i * c + ch];
    for (auto& v : mu) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double dlt = xv[i * c + ch] - mu[ch];
        var[ch] += dlt * dlt;
      }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double biased = var[ch] / static_cast<double>(m);
      const double unbiased = var[ch] / static_cast<double>(m - 1);
      (*inv_std)[ch] = 1.0 / std::sqrt(biased + eps);
      running.mean[ch] = (1.0 - momentum) * running.mean[ch] + momentum * mu[ch];
      running.variance[ch] = (1.0 - momentum) * running.variance[ch] + momentum * unbiased;
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) (*xhat)[i * c + ch] = (xv[i * c + ch] - mu[ch]) * (*inv_std)[ch];
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) (*inv_std)[ch] = 1.0 / std::sqrt(running.variance[ch] + eps);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        (*xhat)[i * c + ch] = (xv[i * c + ch] - running.mean[ch]) * (*inv_std)[ch];
  }
  const auto& g = gamma.value();
  const auto& b = beta.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) out[i * c + ch] = (*xhat)[i * c + ch] * g[ch] + b[ch];

  return make_result(std::move(out), {x, gamma, beta}, [m, c, train, xhat, inv_std](Node& self) {
    const auto& g = self.inputs[1]->value;
    const auto& dy = self.grad;
    std::vector<double> sum_dy(c, 0.0), sum_dy_h(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        sum_dy[ch] += dy[i * c + ch];
        sum_dy_h[ch] += dy[i * c + ch] * (*xhat)[i * c + ch];
      }
    if (auto* gg = self.input_grad(1))
      for (std::size_t ch = 0; ch < c; ++ch) (*gg)[ch] += sum_dy_h[ch];
    if (auto* gb = self.input_grad(2))
      for (std::size_t ch = 0; ch < c; ++ch) (*gb)[ch] += sum_dy[ch];
    auto* gx = self.input_grad(0);
    if (!gx) return;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double scale_c = g[ch] * (*inv_std)[ch];
        double v = dy[i * c + ch];
        if (train) v -= inv_m * (sum_dy[ch] + (*xhat)[i * c + ch] * sum_dy_h[ch]);
        (*gx)[i * c + ch] += scale_c * v;
      }
  });
}

Var dropout(const Var& x, double rate, Mode mode, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  if (mode == Mode::kInfer || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? keep_scale : 0.0;
    out[i] *= (*mask)[i];
  }
  return make_result(std::move(out), {x}, [mask](Node& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += (*mask)[i] * self.grad[i];
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    if (auto* g = self.input_grad(0)) {
      auto gd = g->data();
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += self.grad[i];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const auto t = a.dim(0), da = a.dim(1), db = b.dim(1);
  if (b.dim(0) != t) throw ShapeError("concat_cols: row counts differ");
  Tensor out({t, da + db});
  for (std::size_t r = 0; r < t; ++r) {
    std::copy_n(a.value().ptr() + r * da, da, out.ptr() + r * (da + db));
    std::copy_n(b.value().ptr() + r * db, db, out.ptr() + r * (da + db) + da);
  }
  return make_result(std::move(out), {a, b}, [t, da, db](Node& self) {
    auto* ga = self.input_grad(0);
    auto* gb = self.input_grad(1);
    for (std::size_t r = 0; r < t; ++r) {
      const double* src = self.grad.ptr() + r * (da + db);
      if (ga)
        for (std::size_t j = 0; j < da; ++j) (*ga)[r * da + j] += src[j];
      if (gb)
        for (std::size_t j = 0; j < db; ++j) (*gb)[r * db + j] += src[da + j];
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const auto n = x.dim(0), d = x.dim(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  if (idx->empty()) throw ShapeError("gather_rows: no rows requested");
  Tensor out({idx->size(), d});
  for (std::size_t r = 0; r < idx->size(); ++r) {
    if ((*idx)[r] >= n) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(x.value().ptr() + (*idx)[r] * d, d, out.ptr() + r * d);
  }
  return make_result(std::move(out), {x}, [idx, d](Node& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t r = 0; r < idx->size(); ++r)
        for (std::size_t j = 0; j < d; ++j) (*g)[(*idx)[r] * d + j] += self.grad[r * d + j];
  });
}

Var slice_rows(const Var& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_rows");
  const auto d = x.dim(1);
  if (count == 0 || start + count > x.dim(0)) throw ShapeError("slice_rows: range out of bounds");
  Tensor out({count, d});
  std::copy_n(x.value().ptr() + start * d, count * d, out.ptr());
  return make_result(std::move(out), {x}, [start, d](Node& self) {
    if (auto* g = self.input_grad(0)) {
      double* dst = g->ptr() + start * d;
      for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  require_rank(x, 2, "slice_cols");
  const auto rows = x.dim(0), d = x.dim(1);
  if (count == 0 || start + count > d) throw ShapeError("slice_cols: range out of bounds");
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().ptr() + r * d + start, count, out.ptr() + r * count);
  return make_result(std::move(out), {x}, [rows, d, start, count](Node& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < count; ++j) (*g)[r * d + start + j] += self.grad[r * count + j];
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: nothing to stack");
  const auto d = rows.front().value().size();
  Tensor out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].value().size() != d) throw ShapeError("stack_rows: rows differ in width");
    std::copy_n(rows[r].value().ptr(), d, out.ptr() + r * d);
  }
  return make_result(std::move(out), rows, [d](Node& self) {
    for (std::size_t r = 0; r < self.inputs.size(); ++r)
      if (auto* g = self.input_grad(r))
        for (std::size_t j = 0; j < d; ++j) (*g)[j] += self.grad[r * d + j];
  });
}

Var reverse_rows(const Var& x) {
  require_rank(x, 2, "reverse_rows");
  const auto t = x.dim(0), d = x.dim(1);
  Tensor out({t, d});
  for (std::size_t r = 0; r < t; ++r) std::copy_n(x.value().ptr() + r * d, d, out.ptr() + (t - 1 - r) * d);
  return make_result(std::move(out), {x}, [t, d](Node& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t j = 0; j < d; ++j) (*g)[r * d + j] += self.grad[(t - 1 - r) * d + j];
  });
}

}  // namespace glyphner::nd
