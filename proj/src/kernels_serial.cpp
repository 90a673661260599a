#include "dtrack/kernels.hpp"

namespace dtrack::kernels::serial {

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  if (d.n == 1) {
    for (std::size_t i = 0; i < d.m; ++i) {
      const double* arow = a.data() + i * d.k;
      double s = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) s += arow[p] * b[p];
      c[i] = s;
    }
    return;
  }
  for (std::size_t i = 0; i < d.m; ++i) {
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
  if (d.n == 1) {
    for (std::size_t i = 0; i < d.m; ++i) {
      const double g = dc[i];
      double* row = da.data() + i * d.k;
      for (std::size_t p = 0; p < d.k; ++p) row[p] += g * b[p];
    }
    return;
  }
  for (std::size_t i = 0; i < d.m; ++i) {
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
  if (d.n == 1) {
    for (std::size_t i = 0; i < d.m; ++i) {
      const double g = dc[i];
      const double* arow = a.data() + i * d.k;
      for (std::size_t p = 0; p < d.k; ++p) db[p] += arow[p] * g;
    }
    return;
  }
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* dcrow = dc.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = a[i * d.k + p];
      double* dbrow = db.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

void conv1d(ConvDims d, std::span<const double> x, std::span<const double> kernel,
            std::span<double> y) {
  for (std::size_t o = 0; o < d.outer; ++o) {
    for (std::size_t t = 0; t < d.out_length; ++t) {
      double* yrow = y.data() + (o * d.out_length + t) * d.inner;
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
}

void conv1d_backward_input(ConvDims d, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  for (std::size_t o = 0; o < d.outer; ++o) {
    for (std::size_t s = 0; s < d.length; ++s) {
      double* dxrow = dx.data() + (o * d.length + s) * d.inner;
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
}

void conv1d_backward_kernel(ConvDims d, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dkernel) {
  for (std::size_t j = 0; j < d.taps; ++j) {
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

}  // namespace dtrack::kernels::serial
