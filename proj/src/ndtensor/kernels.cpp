#include "glyphner/kernels.hpp"

#include <algorithm>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "glyphner/errors.hpp"

namespace glyphner::kernels {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 1 << 15;

using Index = std::ptrdiff_t;

// Layers with few output channels cannot vectorize over them. They run in a
// channel-planar layout instead, so the inner loops walk contiguous pixels.
constexpr std::size_t kPlanarMaxOut = 8;

// NHWC [n,h,w,c] -> [n,c,h,w].
std::vector<double> to_planar(std::span<const double> src, std::size_t n, std::size_t h, std::size_t w,
                              std::size_t c) {
  std::vector<double> dst(src.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          dst[((b * c + ch) * h + y) * w + x] = src[((b * h + y) * w + x) * c + ch];
  return dst;
}

// Output columns ox whose input column ox*stride + kx - pad lies inside [0, in_w).
std::pair<std::size_t, std::size_t> valid_columns(const Conv2dGeometry& g, std::size_t kx) {
  const Index pad = static_cast<Index>(g.pad_left);
  const Index s = static_cast<Index>(g.stride_w);
  const Index k = static_cast<Index>(kx);
  Index lo = pad - k > 0 ? (pad - k + s - 1) / s : 0;
  Index hi = (static_cast<Index>(g.in_w) - 1 + pad - k);
  hi = hi < 0 ? -1 : hi / s;
  hi = std::min<Index>(hi, static_cast<Index>(g.out_w) - 1);
  if (hi < lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
}

void planar_forward(const Conv2dGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output) {
  const auto in_p = to_planar(input, g.batch, g.in_h, g.in_w, g.in_c);
  const std::size_t co_n = g.out_c;
  const Index rows = static_cast<Index>(g.batch * g.out_h);
  const bool par = g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index row = 0; row < rows; ++row) {
    const std::size_t n = static_cast<std::size_t>(row) / g.out_h;
    const std::size_t oy = static_cast<std::size_t>(row) % g.out_h;
    std::vector<double> acc(co_n * g.out_w);
    for (std::size_t co = 0; co < co_n; ++co) {
      double* a = acc.data() + co * g.out_w;
      std::fill(a, a + g.out_w, bias[co]);
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const auto [lo, hi] = valid_columns(g, kx);
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double w = kernel[((ky * g.kernel + kx) * g.in_c + ci) * co_n + co];
            const std::size_t s = g.stride_w;
            const double* src = in_p.data() + ((n * g.in_c + ci) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                (lo * s + kx - g.pad_left);
#pragma omp simd
            for (std::size_t ox = lo; ox < hi; ++ox) a[ox] += w * src[(ox - lo) * s];
          }
        }
      }
    }
    double* out = output.data() + (n * g.out_h + oy) * g.out_w * co_n;
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
      for (std::size_t co = 0; co < co_n; ++co) out[ox * co_n + co] = acc[co * g.out_w + ox];
  }
}

void planar_backward_input(const Conv2dGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input) {
  const auto go_p = to_planar(grad_output, g.batch, g.out_h, g.out_w, g.out_c);
  const std::size_t co_n = g.out_c;
  // Each (image, input channel) plane is owned by one thread.
  const Index planes = static_cast<Index>(g.batch * g.in_c);
  const bool par = g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index pl = 0; pl < planes; ++pl) {
    const std::size_t n = static_cast<std::size_t>(pl) / g.in_c;
    const std::size_t ci = static_cast<std::size_t>(pl) % g.in_c;
    std::vector<double> plane(g.in_h * g.in_w, 0.0);
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const auto [lo, hi] = valid_columns(g, kx);
          const std::size_t s = g.stride_w;
          double* dst = plane.data() + static_cast<std::size_t>(iy) * g.in_w + (lo * s + kx - g.pad_left);
          for (std::size_t co = 0; co < co_n; ++co) {
            const double w = kernel[((ky * g.kernel + kx) * g.in_c + ci) * co_n + co];
            const double* src = go_p.data() + ((n * co_n + co) * g.out_h + oy) * g.out_w;
            for (std::size_t ox = lo; ox < hi; ++ox) dst[(ox - lo) * s] += w * src[ox];
          }
        }
      }
    double* gin = grad_input.data() + n * g.in_h * g.in_w * g.in_c + ci;
    for (std::size_t p = 0; p < g.in_h * g.in_w; ++p) gin[p * g.in_c] += plane[p];
  }
}

void planar_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel,
                            std::span<double> grad_bias) {
  const auto in_p = to_planar(input, g.batch, g.in_h, g.in_w, g.in_c);
  const auto go_p = to_planar(grad_output, g.batch, g.out_h, g.out_w, g.out_c);
  const std::size_t co_n = g.out_c;
  const Index entries = static_cast<Index>(g.kernel * g.kernel * g.in_c * co_n);
  const bool par = g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index e = 0; e < entries; ++e) {
    const auto idx = static_cast<std::size_t>(e);
    const std::size_t co = idx % co_n;
    const std::size_t ci = (idx / co_n) % g.in_c;
    const std::size_t kx = (idx / (co_n * g.in_c)) % g.kernel;
    const std::size_t ky = idx / (co_n * g.in_c * g.kernel);
    const auto [lo, hi] = valid_columns(g, kx);
    const std::size_t s = g.stride_w;
    double acc = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
        const double* src = in_p.data() + ((n * g.in_c + ci) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                            (lo * s + kx - g.pad_left);
        const double* go = go_p.data() + ((n * co_n + co) * g.out_h + oy) * g.out_w;
#pragma omp simd reduction(+ : acc)
        for (std::size_t ox = lo; ox < hi; ++ox) acc += src[(ox - lo) * s] * go[ox];
      }
    grad_kernel[idx] += acc;
  }
  for (std::size_t co = 0; co < co_n; ++co) {
    double acc = 0.0;
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* go = go_p.data() + (n * co_n + co) * plane;
      for (std::size_t p = 0; p < plane; ++p) acc += go[p];
    }
    grad_bias[co] += acc;
  }
}

}  // namespace

int thread_count() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Conv2dGeometry conv2d_geometry(std::size_t batch, std::size_t in_h, std::size_t in_w, std::size_t in_c,
                               std::size_t kernel, std::size_t out_c, std::size_t stride_h, std::size_t stride_w,
                               Padding padding) {
  if (batch == 0 || in_h == 0 || in_w == 0 || in_c == 0 || kernel == 0 || out_c == 0 || stride_h == 0 ||
      stride_w == 0) {
    throw ShapeError("conv2d: extents and strides must be positive");
  }
  Conv2dGeometry g{.batch = batch,
                   .in_h = in_h,
                   .in_w = in_w,
                   .in_c = in_c,
                   .kernel = kernel,
                   .out_c = out_c,
                   .stride_h = stride_h,
                   .stride_w = stride_w};
  if (padding == Padding::kSame) {
    g.out_h = (in_h + stride_h - 1) / stride_h;
    g.out_w = (in_w + stride_w - 1) / stride_w;
    const auto need_h = (g.out_h - 1) * stride_h + kernel;
    const auto need_w = (g.out_w - 1) * stride_w + kernel;
    g.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
    g.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  } else {
    if (kernel > in_h || kernel > in_w) throw ShapeError("conv2d: kernel larger than valid input");
    g.out_h = (in_h - kernel) / stride_h + 1;
    g.out_w = (in_w - kernel) / stride_w + 1;
  }
  return g;
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output) {
  if (g.out_c < kPlanarMaxOut) return planar_forward(g, input, kernel, bias, output);
  const Index rows = static_cast<Index>(g.batch * g.out_h);
  const bool par = g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
  const std::size_t co_n = g.out_c;
#pragma omp parallel for schedule(static) if (par)
  for (Index row = 0; row < rows; ++row) {
    const std::size_t n = static_cast<std::size_t>(row) / g.out_h;
    const std::size_t oy = static_cast<std::size_t>(row) % g.out_h;
    const double* in_n = input.data() + n * g.in_h * g.in_w * g.in_c;
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* out = output.data() + ((n * g.out_h + oy) * g.out_w + ox) * co_n;
      std::copy(bias.begin(), bias.end(), out);
      for (std::size_t ky = 0; ky < g.kernel; ++ky) {
        const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.kernel; ++kx) {
          const Index ix = static_cast<Index>(ox * g.stride_w + kx) - static_cast<Index>(g.pad_left);
          if (ix < 0 || ix >= static_cast<Index>(g.in_w)) continue;
          const double* px = in_n + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
          const double* w = kernel.data() + (ky * g.kernel + kx) * g.in_c * co_n;
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double a = px[ci];
            const double* wrow = w + ci * co_n;
#pragma omp simd
            for (std::size_t co = 0; co < co_n; ++co) out[co] += a * wrow[co];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input) {
  if (g.out_c < kPlanarMaxOut) return planar_backward_input(g, grad_output, kernel, grad_input);
  // Each image's input gradient is owned by one thread.
  const Index images = static_cast<Index>(g.batch);
  const bool par = g.batch > 1 && g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
  const std::size_t co_n = g.out_c;
#pragma omp parallel for schedule(static) if (par)
  for (Index ni = 0; ni < images; ++ni) {
    const auto n = static_cast<std::size_t>(ni);
    double* gin_n = grad_input.data() + n * g.in_h * g.in_w * g.in_c;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const double* go = grad_output.data() + ((n * g.out_h + oy) * g.out_w + ox) * co_n;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
          const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
          if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.kernel; ++kx) {
            const Index ix = static_cast<Index>(ox * g.stride_w + kx) - static_cast<Index>(g.pad_left);
            if (ix < 0 || ix >= static_cast<Index>(g.in_w)) continue;
            double* gpx =
                gin_n + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
            const double* w = kernel.data() + (ky * g.kernel + kx) * g.in_c * co_n;
            for (std::size_t ci = 0; ci < g.in_c; ++ci) {
              const double* wrow = w + ci * co_n;
              double acc = 0.0;
#pragma omp simd reduction(+ : acc)
              for (std::size_t co = 0; co < co_n; ++co) acc += go[co] * wrow[co];
              gpx[ci] += acc;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel,
                            std::span<double> grad_bias) {
  if (g.out_c < kPlanarMaxOut) return planar_backward_kernel(g, input, grad_output, grad_kernel, grad_bias);
  const std::size_t co_n = g.out_c;
  // Output partition: one (ky, kx, ci) row of the kernel gradient per iteration.
  const Index kernel_rows = static_cast<Index>(g.kernel * g.kernel * g.in_c);
  const bool par = g.output_size() * g.kernel * g.kernel * g.in_c > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index r = 0; r < kernel_rows; ++r) {
    const auto row = static_cast<std::size_t>(r);
    const std::size_t ci = row % g.in_c;
    const std::size_t kx = (row / g.in_c) % g.kernel;
    const std::size_t ky = row / (g.in_c * g.kernel);
    double* gw = grad_kernel.data() + row * co_n;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const double* in_n = input.data() + n * g.in_h * g.in_w * g.in_c;
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(g.in_h)) continue;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const Index ix = static_cast<Index>(ox * g.stride_w + kx) - static_cast<Index>(g.pad_left);
          if (ix < 0 || ix >= static_cast<Index>(g.in_w)) continue;
          const double a =
              in_n[(static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c + ci];
          if (a == 0.0) continue;
          const double* go = grad_output.data() + ((n * g.out_h + oy) * g.out_w + ox) * co_n;
#pragma omp simd
          for (std::size_t co = 0; co < co_n; ++co) gw[co] += a * go[co];
        }
      }
    }
  }
  const std::size_t pixels = g.batch * g.out_h * g.out_w;
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* go = grad_output.data() + p * co_n;
    for (std::size_t co = 0; co < co_n; ++co) grad_bias[co] += go[co];
  }
}

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> out) {
  const bool par = m > 1 && m * k * n > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* c = out.data() + i * n;
    std::fill(c, c + n, 0.0);
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
}

void matmul_at_b(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                 std::span<const double> g, std::span<double> out) {
  const bool par = k > 1 && m * k * n > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (Index pp = 0; pp < static_cast<Index>(k); ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    double* c = out.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* grow = g.data() + i * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) c[j] += av * grow[j];
    }
  }
}

void matmul_a_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> g,
                 std::span<const double> b, std::span<double> out) {
  const bool par = m * k * n > kParallelThreshold;
  // Parallel over output rows; for a single row split the columns instead.
  if (m == 1) {
#pragma omp parallel for schedule(static) if (par)
    for (Index pp = 0; pp < static_cast<Index>(k); ++pp) {
      const auto p = static_cast<std::size_t>(pp);
      const double* brow = b.data() + p * n;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < n; ++j) acc += g[j] * brow[j];
      out[p] += acc;
    }
    return;
  }
#pragma omp parallel for schedule(static) if (par)
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* grow = g.data() + i * n;
    double* c = out.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[p] += acc;
    }
  }
}

namespace reference {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t co = 0; co < g.out_c; ++co) {
          double acc = bias[co];
          for (std::size_t ky = 0; ky < g.kernel; ++ky)
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
              const Index ix = static_cast<Index>(ox * g.stride_w + kx) - static_cast<Index>(g.pad_left);
              if (iy < 0 || ix < 0 || iy >= static_cast<Index>(g.in_h) || ix >= static_cast<Index>(g.in_w)) continue;
              for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                const double x =
                    input[((n * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)) *
                              g.in_c +
                          ci];
                acc += x * kernel[((ky * g.kernel + kx) * g.in_c + ci) * g.out_c + co];
              }
            }
          output[((n * g.out_h + oy) * g.out_w + ox) * g.out_c + co] = acc;
        }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input) {
  // Gather form: each input pixel sums over the outputs whose window covers it.
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t iy = 0; iy < g.in_h; ++iy)
      for (std::size_t ix = 0; ix < g.in_w; ++ix)
        for (std::size_t ci = 0; ci < g.in_c; ++ci) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < g.kernel; ++ky)
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
              const Index ty = static_cast<Index>(iy + g.pad_top) - static_cast<Index>(ky);
              const Index tx = static_cast<Index>(ix + g.pad_left) - static_cast<Index>(kx);
              if (ty < 0 || tx < 0) continue;
              if (ty % static_cast<Index>(g.stride_h) != 0 || tx % static_cast<Index>(g.stride_w) != 0) continue;
              const auto oy = static_cast<std::size_t>(ty) / g.stride_h;
              const auto ox = static_cast<std::size_t>(tx) / g.stride_w;
              if (oy >= g.out_h || ox >= g.out_w) continue;
              for (std::size_t co = 0; co < g.out_c; ++co) {
                acc += grad_output[((n * g.out_h + oy) * g.out_w + ox) * g.out_c + co] *
                       kernel[((ky * g.kernel + kx) * g.in_c + ci) * g.out_c + co];
              }
            }
          grad_input[((n * g.in_h + iy) * g.in_w + ix) * g.in_c + ci] += acc;
        }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel,
                            std::span<double> grad_bias) {
  for (std::size_t ky = 0; ky < g.kernel; ++ky)
    for (std::size_t kx = 0; kx < g.kernel; ++kx)
      for (std::size_t ci = 0; ci < g.in_c; ++ci)
        for (std::size_t co = 0; co < g.out_c; ++co) {
          double acc = 0.0;
          for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t oy = 0; oy < g.out_h; ++oy)
              for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                const Index iy = static_cast<Index>(oy * g.stride_h + ky) - static_cast<Index>(g.pad_top);
                const Index ix = static_cast<Index>(ox * g.stride_w + kx) - static_cast<Index>(g.pad_left);
                if (iy < 0 || ix < 0 || iy >= static_cast<Index>(g.in_h) || ix >= static_cast<Index>(g.in_w)) continue;
                acc += input[((n * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)) *
                                 g.in_c +
                             ci] *
                       grad_output[((n * g.out_h + oy) * g.out_w + ox) * g.out_c + co];
              }
          grad_kernel[((ky * g.kernel + kx) * g.in_c + ci) * g.out_c + co] += acc;
        }
  for (std::size_t co = 0; co < g.out_c; ++co) {
    double acc = 0.0;
    for (std::size_t p = 0; p < g.batch * g.out_h * g.out_w; ++p) acc += grad_output[p * g.out_c + co];
    grad_bias[co] += acc;
  }
}

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> out) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
}

void matmul_at_b(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                 std::span<const double> g, std::span<double> out) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * g[i * n + j];
      out[p * n + j] += acc;
    }
}

void matmul_a_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> g,
                 std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
      out[i * k + p] += acc;
    }
}

}  // namespace reference
}  // namespace glyphner::kernels
