#include "dtrack/kernels.hpp"

#include <omp.h>

namespace dtrack::kernels {

namespace omp {

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
  if (d.n == 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < m; ++si) {
      const double* arow = a.data() + static_cast<std::size_t>(si) * d.k;
      double s = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) s += arow[p] * b[p];
      c[static_cast<std::size_t>(si)] = s;
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < m; ++si) {
    const auto i = static_cast<std::size_t>(si);
    double* crow = c.data() + i * d.n;
    for (std::size_t j = 0; j < d.n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = a[i * d.k + p];
      const double* brow = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt_acc(GemmDims d, std::span<const double> dc, std::span<const double> b,
                 std::span<double> da) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
  if (d.n == 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t si = 0; si < m; ++si) {
      const auto i = static_cast<std::size_t>(si);
      const double g = dc[i];
      double* row = da.data() + i * d.k;
      for (std::size_t p = 0; p < d.k; ++p) row[p] += g * b[p];
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < m; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double* dcrow = dc.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double* brow = b.data() + p * d.n;
      double s = 0.0;
      for (std::size_t j = 0; j < d.n; ++j) s += dcrow[j] * brow[j];
      da[i * d.k + p] += s;
    }
  }
}

void gemm_tn_acc(GemmDims d, std::span<const double> a, std::span<const double> dc,
                 std::span<double> db) {
  // Parallel over rows of dB; each element still sums over i in ascending order.
  const auto k = static_cast<std::ptrdiff_t>(d.k);
  if (d.n == 1) {
    // Each thread owns a contiguous block of dB and streams over the rows of A.
#pragma omp parallel
    {
      const auto threads = static_cast<std::size_t>(omp_get_num_threads());
      const auto id = static_cast<std::size_t>(omp_get_thread_num());
      const std::size_t lo = d.k * id / threads, hi = d.k * (id + 1) / threads;
      for (std::size_t i = 0; i < d.m; ++i) {
        const double g = dc[i];
        const double* arow = a.data() + i * d.k;
        for (std::size_t p = lo; p < hi; ++p) db[p] += arow[p] * g;
      }
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t sp = 0; sp < k; ++sp) {
    const auto p = static_cast<std::size_t>(sp);
    double* dbrow = db.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double av = a[i * d.k + p];
      const double* dcrow = dc.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y) {
  const auto rows = static_cast<std::ptrdiff_t>(d.outer * d.out_length);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t o = static_cast<std::size_t>(r) / d.out_length;
    const std::size_t t = static_cast<std::size_t>(r) % d.out_length;
    double* yrow = y.data() + static_cast<std::size_t>(r) * d.inner;
    for (std::size_t i = 0; i < d.inner; ++i) yrow[i] = 0.0;
    for (std::size_t j = 0; j < d.taps; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                 static_cast<std::ptrdiff_t>(d.pad_left);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(d.length)) continue;
      const double* xrow = x.data() + (o * d.length + static_cast<std::size_t>(src)) * d.inner;
      const double kv = kernel[j];
      for (std::size_t i = 0; i < d.inner; ++i) yrow[i] += kv * xrow[i];
    }
  }
}

void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  const auto rows = static_cast<std::ptrdiff_t>(d.outer * d.length);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t o = static_cast<std::size_t>(r) / d.length;
    const std::size_t s = static_cast<std::size_t>(r) % d.length;
    double* dxrow = dx.data() + static_cast<std::size_t>(r) * d.inner;
    for (std::size_t j = 0; j < d.taps; ++j) {
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(s + d.pad_left) -
                               static_cast<std::ptrdiff_t>(j);
      if (t < 0 || t >= static_cast<std::ptrdiff_t>(d.out_length)) continue;
      const double* dyrow = dy.data() + (o * d.out_length + static_cast<std::size_t>(t)) * d.inner;
      const double kv = kernel[j];
      for (std::size_t i = 0; i < d.inner; ++i) dxrow[i] += kv * dyrow[i];
    }
  }
}

void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel) {
  const auto taps = static_cast<std::ptrdiff_t>(d.taps);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t sj = 0; sj < taps; ++sj) {
    const auto j = static_cast<std::size_t>(sj);
    double s = 0.0;
    for (std::size_t o = 0; o < d.outer; ++o) {
      for (std::size_t t = 0; t < d.out_length; ++t) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) -
                                   static_cast<std::ptrdiff_t>(d.pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(d.length)) continue;
        const double* dyrow = dy.data() + (o * d.out_length + t) * d.inner;
        const double* xrow = x.data() + (o * d.length + static_cast<std::size_t>(src)) * d.inner;
        for (std::size_t i = 0; i < d.inner; ++i) s += dyrow[i] * xrow[i];
      }
    }
    dkernel[j] += s;
  }
}

}  // namespace omp

namespace {

bool go_parallel(std::size_t work) {
  return work >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

std::size_t conv_work(const ConvDims& d) { return d.outer * d.out_length * d.inner * d.taps; }

}  // namespace

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  go_parallel(d.work()) ? omp::gemm(d, a, b, c) : serial::gemm(d, a, b, c);
}

void gemm_nt_acc(GemmDims d, std::span<const double> dc, std::span<const double> b,
                 std::span<double> da) {
  go_parallel(d.work()) ? omp::gemm_nt_acc(d, dc, b, da) : serial::gemm_nt_acc(d, dc, b, da);
}

void gemm_tn_acc(GemmDims d, std::span<const double> a, std::span<const double> dc,
                 std::span<double> db) {
  go_parallel(d.work()) ? omp::gemm_tn_acc(d, a, dc, db) : serial::gemm_tn_acc(d, a, dc, db);
}

void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y) {
  go_parallel(conv_work(d)) ? omp::conv1d(d, x, kernel, y) : serial::conv1d(d, x, kernel, y);
}

void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  go_parallel(conv_work(d)) ? omp::conv1d_backward_input(d, dy, kernel, dx)
                            : serial::conv1d_backward_input(d, dy, kernel, dx);
}

void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel) {
  go_parallel(conv_work(d)) ? omp::conv1d_backward_kernel(d, dy, x, dkernel)
                            : serial::conv1d_backward_kernel(d, dy, x, dkernel);
}

}  // namespace dtrack::kernels
