#pragma once

// Dense compute kernels behind conv2d and dense. Two implementations share
// one signature set:
//   glyphner::kernels             OpenMP-parallel, cache-friendly loop order
//   glyphner::kernels::reference  serial textbook loops, kept as the oracle
// Every parallel kernel partitions the *output* so that each element is
// written by exactly one thread in a fixed order: results are bitwise
// reproducible for any thread count.
//
// Layouts: activations NHWC, conv kernels [k][k][Cin][Cout], matrices row-major.
// Backward kernels accumulate (+=) into their outputs.

#include <cstddef>
#include <span>

namespace glyphner::kernels {

enum class Padding { kSame, kValid };

struct Conv2dGeometry {
  std::size_t batch = 0;
  std::size_t in_h = 0, in_w = 0, in_c = 0;
  std::size_t kernel = 0, out_c = 0;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t out_h = 0, out_w = 0;
  std::size_t pad_top = 0, pad_left = 0;

  std::size_t input_size() const noexcept { return batch * in_h * in_w * in_c; }
  std::size_t output_size() const noexcept { return batch * out_h * out_w * out_c; }
  std::size_t kernel_size() const noexcept { return kernel * kernel * in_c * out_c; }
};

// `same`: out = ceil(in/stride), padding split with the extra row/column at the
// bottom/right. `valid`: out = floor((in - k)/stride) + 1. Throws ShapeError
// when the kernel does not fit.
Conv2dGeometry conv2d_geometry(std::size_t batch, std::size_t in_h, std::size_t in_w, std::size_t in_c,
                               std::size_t kernel, std::size_t out_c, std::size_t stride_h, std::size_t stride_w,
                               Padding padding);

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel,
                            std::span<double> grad_bias);

// out[M,N] = a[M,K] * b[K,N]   (overwrites)
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> out);
// out[K,N] += a[M,K]^T * g[M,N]
void matmul_at_b(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                 std::span<const double> g, std::span<double> out);
// out[M,K] += g[M,N] * b[K,N]^T
void matmul_a_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> g,
                 std::span<const double> b, std::span<double> out);

// Number of worker threads the parallel kernels will use.
int thread_count() noexcept;

namespace reference {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> input, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_output,
                           std::span<const double> kernel, std::span<double> grad_input);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel,
                            std::span<double> grad_bias);
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> out);
void matmul_at_b(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                 std::span<const double> g, std::span<double> out);
void matmul_a_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> g,
                 std::span<const double> b, std::span<double> out);

}  // namespace reference
}  // namespace glyphner::kernels
