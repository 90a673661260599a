#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the autodiff ops. Each kernel has a serial reference
// and an OpenMP version with the same signature. The OpenMP versions split
// work over output elements only and keep the serial summation order, so both
// produce bitwise-identical results.
namespace dtrack::kernels {

// C[m x n] = A[m x k] * B[k x n]
struct GemmDims {
  std::size_t m, k, n;
  std::size_t work() const { return m * k * n; }
};

// Conv along the middle axis of a (outer, length, inner) view. Output length
// is out_length; input index for output t and tap j is t + j - pad_left.
struct ConvDims {
  std::size_t outer, length, inner, taps, out_length, pad_left;
};

namespace serial {
void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// dA[m x k] += dC[m x n] * B[k x n]^T
void gemm_nt_acc(GemmDims d, std::span<const double> dc, std::span<const double> b,
                 std::span<double> da);
// dB[k x n] += A[m x k]^T * dC[m x n]
void gemm_tn_acc(GemmDims d, std::span<const double> a, std::span<const double> dc,
                 std::span<double> db);
void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y);
void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel);
}  // namespace serial

namespace omp {
void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// dA[m x k] += dC[m x n] * B[k x n]^T
void gemm_nt_acc(GemmDims d, std::span<const double> dc, std::span<const double> b,
                 std::span<double> da);
// dB[k x n] += A[m x k]^T * dC[m x n]
void gemm_tn_acc(GemmDims d, std::span<const double> a, std::span<const double> dc,
                 std::span<double> db);
void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y);
void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel);
}  // namespace omp

// Below this many multiply-adds the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1 << 16;

// Dispatchers used by the autodiff ops: OpenMP for large problems outside an
// enclosing parallel region, the serial reference otherwise.
void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_nt_acc(GemmDims d, std::span<const double> dc, std::span<const double> b,
                 std::span<double> da);
void gemm_tn_acc(GemmDims d, std::span<const double> a, std::span<const double> dc,
                 std::span<double> db);
void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y);
void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel);

}  // namespace dtrack::kernels
