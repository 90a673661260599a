#include <gtest/gtest.h>

#include <omp.h>

#include <random>
#include <vector>

#include "dtrack/kernels.hpp"

using namespace dtrack::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

class KernelsTest : public ::testing::TestWithParam<GemmDims> {
 protected:
  void SetUp() override { omp_set_num_threads(4); }
};

}  // namespace

TEST_P(KernelsTest, GemmFamilyIsBitwiseEqual) {
  const GemmDims d = GetParam();
  std::mt19937_64 gen(d.work());
  const auto a = random_vec(d.m * d.k, gen), b = random_vec(d.k * d.n, gen), dc = random_vec(d.m * d.n, gen);

  std::vector<double> c1(d.m * d.n), c2(d.m * d.n);
  serial::gemm(d, a, b, c1);
  omp::gemm(d, a, b, c2);
  EXPECT_EQ(c1, c2);

  // Reference product computed directly.
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      double ref = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) ref += a[i * d.k + p] * b[p * d.n + j];
      EXPECT_NEAR(c1[i * d.n + j], ref, 1e-12);
    }

  auto da1 = random_vec(d.m * d.k, gen), da2 = da1;
  serial::gemm_nt_acc(d, dc, b, da1);
  omp::gemm_nt_acc(d, dc, b, da2);
  EXPECT_EQ(da1, da2);

  auto db1 = random_vec(d.k * d.n, gen), db2 = db1;
  serial::gemm_tn_acc(d, a, dc, db1);
  omp::gemm_tn_acc(d, a, dc, db2);
  EXPECT_EQ(db1, db2);

  std::vector<double> c3(d.m * d.n);
  gemm(d, a, b, c3);
  EXPECT_EQ(c1, c3);
}

INSTANTIATE_TEST_SUITE_P(Shapes, KernelsTest,
                         ::testing::Values(GemmDims{1, 1, 1}, GemmDims{7, 5, 1}, GemmDims{1024, 640, 1},
                                           GemmDims{3, 4, 5}, GemmDims{64, 128, 33},
                                           GemmDims{288, 128, 128}));

TEST(Kernels, ConvFamilyIsBitwiseEqual) {
  omp_set_num_threads(4);
  std::mt19937_64 gen(41);
  const ConvDims cases[] = {
      {1, 10, 1, 10, 1, 0},       // valid, single output
      {1, 288, 128, 10, 288, 4},  // time axis, same padding
      {288, 128, 1, 11, 128, 5},  // pitch axis, same padding
      {3, 50, 7, 4, 47, 0},
  };
  for (const ConvDims& d : cases) {
    const auto x = random_vec(d.outer * d.length * d.inner, gen);
    const auto k = random_vec(d.taps, gen);
    const auto dy = random_vec(d.outer * d.out_length * d.inner, gen);
    std::vector<double> y1(dy.size()), y2(dy.size());
    serial::conv1d(d, x, k, y1);
    omp::conv1d(d, x, k, y2);
    EXPECT_EQ(y1, y2);

    auto dx1 = random_vec(x.size(), gen), dx2 = dx1;
    serial::conv1d_backward_input(d, dy, k, dx1);
    omp::conv1d_backward_input(d, dy, k, dx2);
    EXPECT_EQ(dx1, dx2);

    auto dk1 = random_vec(d.taps, gen), dk2 = dk1;
    serial::conv1d_backward_kernel(d, dy, x, dk1);
    omp::conv1d_backward_kernel(d, dy, x, dk2);
    EXPECT_EQ(dk1, dk2);

    std::vector<double> y3(dy.size());
    conv1d(d, x, k, y3);
    EXPECT_EQ(y1, y3);
  }
}

TEST(Kernels, ConvMatchesDirectSum) {
  std::mt19937_64 gen(43);
  const ConvDims d{2, 9, 3, 4, 9, 1};
  const auto x = random_vec(2 * 9 * 3, gen), k = random_vec(4, gen);
  std::vector<double> y(2 * 9 * 3);
  serial::conv1d(d, x, k, y);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t t = 0; t < 9; ++t)
      for (std::size_t i = 0; i < 3; ++i) {
        double ref = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
          const long src = static_cast<long>(t + j) - 1;
          if (src >= 0 && src < 9) ref += x[(o * 9 + src) * 3 + i] * k[j];
        }
        EXPECT_NEAR(y[(o * 9 + t) * 3 + i], ref, 1e-14);
      }
}
