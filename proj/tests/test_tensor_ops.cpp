#include <gtest/gtest.h>

#include "cuenet/exec.hpp"
#include "cuenet/io.hpp"
#include "cuenet/ops.hpp"
#include "oracles.hpp"

namespace cuenet {
namespace {

using testing::Rng;

TEST(Tensor, RejectsZeroExtentAndWrongPayload) {
  EXPECT_THROW(Tensor<double>({2, 0}), DimensionError);
  EXPECT_THROW(Tensor<double>(Shape{}), DimensionError);
  EXPECT_THROW(Tensor<double>({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Tensor, IndexingIsRowMajorAndBoundsChecked) {
  Tensor<double> t({2, 3, 4});
  t(1, 2, 3) = 7;
  EXPECT_EQ(t[23], 7);
  EXPECT_EQ(unflatten_index(t.shape(), 23), (Shape{1, 2, 3}));
  EXPECT_THROW(t(2, 0, 0), BoundsError);
  EXPECT_THROW(t(0, 0), BoundsError);
}

TEST(Matmul, IdentityAndHandComputed) {
  const auto id = Tensor<double>::matrix({{1, 0}, {0, 1}});
  const auto b = Tensor<double>::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(matmul(id, b), b);
  EXPECT_EQ(matmul(Tensor<double>::matrix({{1, 2}}), Tensor<double>::matrix({{3}, {4}})),
            Tensor<double>::matrix({{11}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(1);
  const auto a = rng.tensor({7, 5}), b = rng.tensor({5, 3});
  const auto want = testing::from_mat(testing::naive_matmul(testing::to_mat(a), testing::to_mat(b)));
  EXPECT_LE(testing::rel_error(matmul(a, b), want), 1e-12);
}

TEST(Matmul, LargeTiledShapeMatchesTripleLoop) {
  // k exceeds the depth tile so the tiled accumulation path is exercised.
  Rng rng(2);
  const auto a = rng.tensor({9, 600}), b = rng.tensor({600, 11});
  const auto want = testing::from_mat(testing::naive_matmul(testing::to_mat(a), testing::to_mat(b)));
  EXPECT_LE(testing::rel_error(matmul(a, b), want), 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor<double>({2, 3}), Tensor<double>({4, 5}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Matmul, ResultIndependentOfThreadCount) {
  Rng rng(3);
  const auto a = rng.tensor({64, 40}), b = rng.tensor({40, 33});
  Tensor<double> one = matmul(a, b);
  exec::ScopedContext ctx({4, nullptr, nullptr});
  EXPECT_EQ(matmul(a, b), one);
}

TEST(Gemm, AbtMatchesExplicitTranspose) {
  Rng rng(4);
  const auto a = rng.tensor({5, 7}), b = rng.tensor({300, 7});
  Tensor<double> c({5, 300});
  kernels::gemm_abt<double>(as_matrix(a), as_matrix(b), as_matrix(c));
  Tensor<double> bt({7, 300});
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j = 0; j < 7; ++j) bt(j, i) = b(i, j);
  EXPECT_LE(testing::rel_error(c, matmul(a, bt)), 1e-12);
}

TEST(LayerNorm, Examples) {
  const auto g = Tensor<double>::full({3}, 1), b = Tensor<double>({3});
  EXPECT_EQ(layer_norm(Tensor<double>::matrix({{1, 1, 1}}), g, b), Tensor<double>({1, 3}));
  const auto y = layer_norm(Tensor<double>::matrix({{0, 2}}), Tensor<double>::full({2}, 1), Tensor<double>({2}), 1e-15);
  EXPECT_NEAR(y[0], -1, 1e-12);
  EXPECT_NEAR(y[1], 1, 1e-12);
  EXPECT_THROW(layer_norm(Tensor<double>({1, 4}), g, b), DimensionError);
}

TEST(LayerNorm, RowsHaveZeroMeanUnitVariance) {
  Rng rng(5);
  const auto x = rng.tensor({6, 16}, -3, 5);
  const auto y = layer_norm(x, Tensor<double>::full({16}, 1), Tensor<double>({16}), 1e-12);
  for (std::size_t i = 0; i < 6; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 16; ++j) m += y(i, j);
    m /= 16;
    for (std::size_t j = 0; j < 16; ++j) v += (y(i, j) - m) * (y(i, j) - m);
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v / 16, 1, 1e-9);
  }
}

TEST(Gelu, Examples) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(10.0), 10.0, 1e-6);
  EXPECT_NEAR(gelu(1.0), testing::normal_cdf_quadrature(1.0), 1e-8);
}

TEST(Gelu, MatchesQuadratureAcrossRange) {
  for (double x : {-3.0, -1.5, -0.2, 0.4, 2.5}) EXPECT_NEAR(gelu(x), x * testing::normal_cdf_quadrature(x), 1e-8) << x;
}

TEST(Softmax, ExamplesAndStability) {
  EXPECT_EQ(softmax_rows(Tensor<double>::matrix({{0, 0}})), Tensor<double>::matrix({{0.5, 0.5}}));
  EXPECT_EQ(softmax_rows(Tensor<double>::matrix({{1000, 1000}})), Tensor<double>::matrix({{0.5, 0.5}}));
}

TEST(Softmax, MatchesNaiveOracle) {
  Rng rng(6);
  const auto x = rng.tensor({3, 5}, -2, 2);
  const auto y = softmax_rows(x);
  for (std::size_t i = 0; i < 3; ++i) {
    double z = 0, sum = 0;
    for (std::size_t j = 0; j < 5; ++j) z += std::exp(x(i, j));
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(y(i, j), std::exp(x(i, j)) / z, 1e-15);
      sum += y(i, j);
    }
    EXPECT_NEAR(sum, 1, 1e-12);
  }
}

TEST(Conv3d, DeltaKernelIsIdentity) {
  Rng rng(7);
  const auto x = rng.tensor({3, 4, 5, 1});
  EXPECT_EQ(conv3d(x, Tensor<double>::full({1, 1, 1, 1, 1}, 1)), x);
}

TEST(Conv3d, AllOnesSums) {
  const auto y = conv3d(Tensor<double>::full({2, 2, 2, 1}, 1), Tensor<double>::full({2, 2, 2, 1, 1}, 1));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 8);
}

TEST(Conv3d, MatchesNaiveLoop) {
  Rng rng(8);
  const auto x = rng.tensor({4, 6, 6, 2}), k = rng.tensor({3, 3, 3, 2, 1});
  EXPECT_LE(testing::max_abs_diff(conv3d(x, k), testing::naive_conv3d(x, k, {1, 1, 1}, {0, 0, 0})), 1e-10);
}

TEST(Conv3d, StridedPaddedMatchesNaiveLoop) {
  Rng rng(9);
  const auto x = rng.tensor({4, 8, 8, 3}), k = rng.tensor({3, 4, 4, 3, 5});
  const auto y = conv3d(x, k, {{1, 4, 4}, {1, 0, 0}});
  EXPECT_LE(testing::max_abs_diff(y, testing::naive_conv3d(x, k, {1, 4, 4}, {1, 0, 0})), 1e-10);
}

TEST(Conv3d, RejectsNonPositiveStride) {
  EXPECT_THROW(conv3d(Tensor<double>({2, 2, 2, 1}), Tensor<double>({1, 1, 1, 1, 1}), {{0, 1, 1}, {0, 0, 0}}),
               ParameterError);
}

TEST(DwConv3d, DeltaKernelIsIdentity) {
  Rng rng(10);
  const auto x = rng.tensor({3, 4, 4, 2});
  Tensor<double> k({3, 3, 3, 2});
  k(1, 1, 1, 0) = k(1, 1, 1, 1) = 1;
  EXPECT_EQ(dwconv3d(x, k), x);
}

TEST(DwConv3d, ChannelsAreSeparate) {
  Rng rng(11);
  auto x = rng.tensor({3, 4, 4, 2});
  for (std::size_t i = 0; i < x.size(); i += 2) x[i] = 0;
  const auto y = dwconv3d(x, rng.tensor({3, 3, 3, 2}));
  for (std::size_t i = 0; i < y.size(); i += 2) EXPECT_EQ(y[i], 0);
}

TEST(DwConv3d, MatchesNaiveLoopAndRejectsEvenKernel) {
  Rng rng(12);
  const auto x = rng.tensor({3, 4, 4, 2}), k = rng.tensor({3, 3, 3, 2});
  EXPECT_LE(testing::max_abs_diff(dwconv3d(x, k), testing::naive_dwconv3d(x, k)), 1e-10);
  EXPECT_THROW(dwconv3d(x, Tensor<double>({2, 3, 3, 2})), ParameterError);
}

TEST(MacCounting, ConvCountsOnlyValidTaps) {
  exec::MacCounter macs;
  exec::ScopedContext ctx({1, &macs, nullptr});
  (void)dwconv3d(Tensor<double>({3, 1, 1, 4}), Tensor<double>({3, 1, 1, 4}));
  // Frame 0 and 2 see two taps, frame 1 sees three.
  EXPECT_EQ(macs.total(), 7u * 4);
  EXPECT_EQ(valid_taps_1d(3, 3, 1, 1, 3), 7u);
}

TEST(Ctf, RoundTripBothPrecisions) {
  Rng rng(13);
  const auto d = rng.tensor({2, 3, 4});
  const auto f = rng.tensor<float>({5});
  const auto bd = io::encode_ctf(d);
  const auto bf = io::encode_ctf(f);
  EXPECT_EQ(std::get<Tensor<double>>(io::decode_ctf(bd, "d")), d);
  EXPECT_EQ(std::get<Tensor<float>>(io::decode_ctf(bf, "f")), f);
  EXPECT_THROW(io::decode_ctf(bd.substr(0, bd.size() - 1), "trunc"), FormatError);
  EXPECT_THROW(io::decode_ctf(bd + "x", "trailing"), FormatError);
  EXPECT_THROW(io::decode_ctf("XXXX" + bd.substr(4), "magic"), FormatError);
}

}  // namespace
}  // namespace cuenet
