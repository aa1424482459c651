#include <gtest/gtest.h>

#include "cuenet/fusion.hpp"
#include "properties.hpp"

namespace cuenet {
namespace {

using testing::Rng;

TEST(ClassToken, SingleFrameIsThatToken) {
  Rng rng(1);
  const TokenField<double> v(GridDims{1, 2, 2, 5}, rng.tensor({1, 5, 5}));
  const auto c = extract_class_token(v);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(c[j], v.token(0, 0)[j]);
}

TEST(ClassToken, ConstantAcrossFrames) {
  Rng rng(2);
  const auto cls = rng.tensor({1, 4});
  TokenField<double> v(GridDims{3, 1, 1, 4}, rng.tensor({3, 2, 4}));
  for (std::size_t t = 0; t < 3; ++t) std::copy(cls.data().begin(), cls.data().end(), v.token(t, 0));
  // Three equal summands divided by three may differ from the value by one rounding.
  EXPECT_LE(testing::max_abs_diff(extract_class_token(v), cls), 1e-15);
}

TEST(ClassToken, MatchesExplicitAverage) {
  Rng rng(3);
  const TokenField<double> v(GridDims{4, 2, 1, 6}, rng.tensor({4, 3, 6}));
  const auto c = extract_class_token(v);
  for (std::size_t j = 0; j < 6; ++j) {
    const double want = (v.token(0, 0)[j] + v.token(1, 0)[j] + v.token(2, 0)[j] + v.token(3, 0)[j]) / 4;
    EXPECT_NEAR(c[j], want, 1e-14);
  }
}

TEST(Fuse, ZeroGateAverages) {
  const auto a = Tensor<double>::matrix({{1, -3}}), b = Tensor<double>::matrix({{5, 1}});
  EXPECT_EQ(fuse(a, b, Tensor<double>({1, 2})), Tensor<double>::matrix({{3, -1}}));
}

TEST(Fuse, SaturatedGateSelectsClassToken) {
  Rng rng(4);
  const auto a = rng.tensor({1, 8}), b = rng.tensor({1, 8});
  EXPECT_LE(testing::max_abs_diff(fuse(a, b, Tensor<double>::full({1, 8}, 1e3)), b), 1e-10);
}

TEST(Fuse, ConvexCombinationProperty) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::string why = testing::check_convexity_case(rng);
    ASSERT_TRUE(why.empty()) << "case " << i << ": " << why;
  }
}

TEST(Fuse, GateStaysStrictlyInsideUnitInterval) {
  for (double b : {-30.0, -5.0, 0.0, 5.0, 30.0}) {
    const double s = sigmoid(b);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Fuse, SwappingInputsNegatesGate) {
  Rng rng(6);
  const auto a = rng.tensor({1, 16}), b = rng.tensor({1, 16}), beta = rng.tensor({1, 16}, -4, 4);
  Tensor<double> neg = beta;
  for (auto& v : neg.data()) v = -v;
  EXPECT_LE(testing::max_abs_diff(fuse(a, b, beta), fuse(b, a, neg)), 1e-12);
}

TEST(Fuse, WidthMismatchThrows) {
  EXPECT_THROW(fuse(Tensor<double>({1, 3}), Tensor<double>({1, 4}), Tensor<double>({1, 3})), DimensionError);
}

TEST(Classify, ZeroWeightsGiveBias) {
  FusionParams<double> p(3, 2);
  p.bias = Tensor<double>::vector({0.25, -1});
  EXPECT_EQ(classify(Tensor<double>::matrix({{1, 2, 3}}), p), p.bias);
}

TEST(Classify, IdentityProjection) {
  FusionParams<double> p(2, 2);
  p.proj = testing::identity(2);
  const auto logits = classify(Tensor<double>::matrix({{3, 1}}), p);
  EXPECT_EQ(logits, Tensor<double>::vector({3, 1}));
  EXPECT_EQ(argmax(logits), 0u);
}

TEST(Classify, MatchesMatmulOracle) {
  Rng rng(7);
  FusionParams<double> p(6, 3);
  p.proj = rng.tensor({6, 3});
  p.bias = rng.tensor({3});
  const auto z = rng.tensor({1, 6});
  auto want = testing::naive_matmul(testing::to_mat(z), testing::to_mat(p.proj))[0];
  for (std::size_t c = 0; c < 3; ++c) want[c] += p.bias[c];
  EXPECT_LE(testing::rel_error(classify(z, p).data(), want), 1e-12);
}

TEST(FuseGrad, MatchesCentralDifferences) {
  Rng rng(8);
  const auto a = rng.tensor({1, 5}), b = rng.tensor({1, 5}), u = rng.tensor({1, 5});
  auto beta = rng.tensor({1, 5}, -2, 2);
  const auto g = fuse_grad_beta(a, b, beta, u);
  for (std::size_t j = 0; j < 5; ++j) {
    const double keep = beta[j], eps = 1e-5;
    beta[j] = keep + eps;
    const double up = fuse(a, b, beta)[j] * u[j];
    beta[j] = keep - eps;
    const double down = fuse(a, b, beta)[j] * u[j];
    beta[j] = keep;
    EXPECT_NEAR(g[j], (up - down) / (2 * eps), 1e-6);
  }
}

TEST(ClassifyGrad, BiasGradientIsUpstream) {
  Rng rng(9);
  FusionParams<double> p(4, 3);
  p.proj = rng.tensor({4, 3});
  const auto u = rng.tensor({3});
  const auto g = classify_grad(rng.tensor({1, 4}), p, u);
  EXPECT_EQ(g.bias, u);
}

}  // namespace
}  // namespace cuenet
