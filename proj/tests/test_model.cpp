#include <gtest/gtest.h>

#include "cuenet/model.hpp"
#include "oracles.hpp"

namespace cuenet {
namespace {

using testing::Rng;

TEST(Config, DeskPresetValues) {
  const auto c = desk_preset();
  EXPECT_EQ(c.frames, 8u);
  EXPECT_EQ(c.height, 32u);
  EXPECT_EQ(c.width, 32u);
  EXPECT_EQ(c.hidden, 64u);
  EXPECT_EQ(c.heads, 4u);
  EXPECT_EQ(c.local_depth, 2u);
  EXPECT_EQ(c.grid(), (GridDims{4, 2, 2, 64}));
}

TEST(Config, SerializeParseRoundTripIsByteIdentical) {
  for (auto c : {desk_preset(), large_preset(), testing::tiny_config()}) {
    c.ffn_ratio = 2.5;
    c.global_attention = AttentionKind::eaa_original;
    c.precision = Precision::f32;
    c.seed = 123456789012345ull;
    const std::string text = serialize_config(c);
    EXPECT_EQ(serialize_config(parse_config(text)), text);
    EXPECT_EQ(parse_config(text), c);
  }
}

TEST(Config, RejectsUnknownKeysAndInvalidShapes) {
  EXPECT_THROW(parse_config("# cuenet model config v1\nframez=8\n"), ConfigError);
  EXPECT_THROW(parse_config("# cuenet model config v1\nframes=eight\n"), ConfigError);
  auto c = desk_preset();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = desk_preset();
  c.height = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  c = desk_preset();
  c.frames = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = desk_preset();
  c.lt_kernel = 2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitWeights, DeterministicPerSeed) {
  const auto c = testing::tiny_config();
  EXPECT_EQ(init_weights<double>(c), init_weights<double>(c));
  auto other = c;
  other.seed = 1;
  EXPECT_FALSE(init_weights<double>(c) == init_weights<double>(other));
}

TEST(InitWeights, LayerNormGainsAreOneAndBiasesZero) {
  const auto w = init_weights<double>(desk_preset());
  std::size_t gammas = 0;
  for (const auto& [name, t] : w.entries()) {
    if (name.ends_with(".gamma")) {
      ++gammas;
      for (double v : t.data()) ASSERT_EQ(v, 1.0) << name;
    }
    if (name.ends_with(".beta") || name.ends_with("bias") || name.ends_with(".b1") || name.ends_with(".b2") ||
        name == "fusion.beta") {
      for (double v : t.data()) ASSERT_EQ(v, 0.0) << name;
    }
  }
  EXPECT_GT(gammas, 0u);
}

TEST(InitWeights, FanInScaledVariance) {
  const auto w = init_weights<double>(desk_preset());
  const auto& t = w.get("global.attn.wk");
  ASSERT_EQ(t.shape(), (Shape{64, 64}));
  double mean = 0, var = 0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(t.size());
  for (double v : t.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size() - 1);
  EXPECT_NEAR(var, 1.0 / 64, 0.2 / 64);
}

TEST(Weights, ManifestMatchesInitialization) {
  const auto c = testing::tiny_config();
  const auto w = init_weights<float>(c);
  const auto manifest = weight_manifest(c);
  EXPECT_EQ(w.entries().size(), manifest.size());
  for (const auto& spec : manifest) EXPECT_EQ(w.get(spec.name).shape(), spec.shape) << spec.name;
  EXPECT_NO_THROW(validate_weights(w, c));
}

TEST(Weights, SaveLoadSaveIsByteIdentical) {
  const auto w = init_weights<double>(testing::tiny_config());
  const std::string bytes = encode_weights(w);
  const auto back = decode_weights<double>(bytes);
  EXPECT_EQ(back, w);
  EXPECT_EQ(encode_weights(back), bytes);
}

TEST(Weights, TruncatedFileIsFormatError) {
  const std::string bytes = encode_weights(init_weights<float>(testing::tiny_config()));
  for (std::size_t cut : {std::size_t{3}, std::size_t{11}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_weights<float>(bytes.substr(0, cut)), FormatError) << cut;
  }
}

TEST(Weights, SinglePrecisionWidensOnlyOnRequest) {
  const auto c = testing::tiny_config();
  const auto single = init_weights<float>(c);
  const std::string bytes = encode_weights(single);
  EXPECT_THROW(decode_weights<double>(bytes), FormatError);
  const auto wide = decode_weights<double>(bytes, true);
  EXPECT_TRUE(wide.widened);
  for (const auto& [name, t] : single.entries()) {
    const auto& d = wide.get(name);
    for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(static_cast<float>(d[i]), t[i]) << name;
  }
  EXPECT_THROW(decode_weights<float>(encode_weights(init_weights<double>(c)), true), FormatError);
}

TEST(Weights, MissingOrMisshapenEntryNamesIt) {
  const auto c = testing::tiny_config();
  auto w = init_weights<double>(c);
  w.set("fusion.proj", Tensor<double>({3, 3}));
  try {
    validate_weights(w, c);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("fusion.proj"), std::string::npos);
  }
  WeightContainer<double> empty;
  EXPECT_THROW(validate_weights(empty, c), FormatError);
}

TEST(Resize, IdentityAndHalfPixelUpsampling) {
  Rng rng(1);
  const auto v = rng.tensor({2, 4, 4, 1});
  EXPECT_EQ(resize_bilinear(v, 4, 4), v);
  Tensor<double> row({1, 1, 2, 1}, {1.0, 5.0});
  const auto up = resize_bilinear(row, 1, 4);
  EXPECT_EQ(up, (Tensor<double>({1, 1, 4, 1}, {1.0, 2.0, 4.0, 5.0})));
  const auto flat = resize_bilinear(Tensor<double>::full({1, 3, 5, 2}, 0.75), 16, 16);
  for (double x : flat.data()) EXPECT_EQ(x, 0.75);
}

TEST(Backbone, MinimalClipGivesOneFrameOneToken) {
  ModelConfig c = testing::tiny_config();
  c.frames = 2;
  c.height = c.width = 16;
  c.local_depth = 0;
  Rng rng(2);
  const auto p = bind_params(init_weights<double>(c), c);
  const auto v0 = backbone_forward(rng.tensor({2, 16, 16, c.channels}), p, c);
  EXPECT_EQ(v0.tensor().shape(), (Shape{1, 2, c.hidden}));
}

TEST(Backbone, ZeroConvGivesBias) {
  const auto c = testing::tiny_config();
  auto p = bind_params(init_weights<double>(c), c);
  Rng rng(3);
  p.conv_weight = Tensor<double>(p.conv_weight.shape());
  p.conv_bias = rng.tensor({c.hidden});
  const auto v0 = backbone_forward(rng.tensor({c.frames, c.height, c.width, c.channels}), p, c);
  for (std::size_t t = 0; t < v0.dims().frames; ++t)
    for (std::size_t i = 1; i < v0.dims().tokens_per_frame(); ++i)
      for (std::size_t j = 0; j < c.hidden; ++j) EXPECT_EQ(v0.token(t, i)[j], p.conv_bias[j]);
}

TEST(Backbone, MatchesConvOracleComposition) {
  const auto c = testing::tiny_config();
  const auto p = bind_params(init_weights<double>(c), c);
  Rng rng(4);
  const auto x = rng.tensor({c.frames, c.height, c.width, c.channels});
  const auto conv = testing::naive_conv3d(x, p.conv_weight, {1, 16, 16}, {1, 0, 0});
  const auto v0 = backbone_forward(x, p, c);
  const GridDims g = c.grid();
  for (std::size_t t = 0; t < g.frames; ++t) {
    for (std::size_t j = 0; j < c.hidden; ++j) EXPECT_EQ(v0.token(t, 0)[j], p.cls[j]);
    for (std::size_t h = 0; h < g.height; ++h)
      for (std::size_t w = 0; w < g.width; ++w)
        for (std::size_t j = 0; j < c.hidden; ++j)
          EXPECT_NEAR(v0.token(t, 1 + h * g.width + w)[j], conv(2 * t, h, w, j) + p.conv_bias[j], 1e-10);
  }
}

DetectionSequence two_people(const ModelConfig& c) {
  DetectionSequence det = empty_detections(c.frames, {c.height, c.width});
  det.frames[1] = {{2, 3, 10, 12}, {14, 5, 25, 30}};
  return det;
}

TEST(Forward, LogitsShapeAndDeterminism) {
  const auto c = desk_preset();
  const auto w = init_weights<double>(c);
  Rng rng(5);
  const auto video = rng.tensor({c.frames, c.height, c.width, c.channels});
  const auto a = forward(video, two_people(c), w, c);
  EXPECT_EQ(a.shape(), (Shape{2}));
  EXPECT_EQ(forward(video, two_people(c), w, c), a);
}

TEST(Forward, EqualsStagedPipelineBitwise) {
  const auto c = desk_preset();
  const auto p = bind_params(init_weights<double>(c), c);
  Rng rng(6);
  const auto video = rng.tensor({c.frames, c.height, c.width, c.channels});
  const auto det = two_people(c);

  const auto crop = compute_crop_box(det);
  ASSERT_TRUE(crop.applied);
  auto v = backbone_forward(resize_bilinear(apply_crop(video, crop), c.height, c.width), p, c);
  for (const auto& block : p.local) v = local_uniblock_forward(v, block);
  const auto v6 = global_uniblock_forward(v, p.global);
  const auto logits = classify(fuse(v6, extract_class_token(v), p.fusion.beta), p.fusion);

  EXPECT_EQ(forward(video, det, p, c), logits);
}

TEST(Forward, SkippedCropMatchesPipelineWithoutCropStage) {
  auto c = testing::tiny_config();
  const auto p = bind_params(init_weights<double>(c), c);
  Rng rng(7);
  const auto video = rng.tensor({c.frames, c.height, c.width, c.channels});
  auto det = empty_detections(c.frames, {c.height, c.width});
  det.frames[0] = {{1, 1, 4, 4}};
  auto v = backbone_forward(video, p, c);
  for (const auto& block : p.local) v = local_uniblock_forward(v, block);
  const auto logits = classify(fuse(global_uniblock_forward(v, p.global), extract_class_token(v), p.fusion.beta), p.fusion);
  EXPECT_EQ(forward(video, det, p, c), logits);
}

TEST(Forward, IntermediateShapesFollowTheGrid) {
  auto c = testing::tiny_config(8, 2);
  c.local_depth = 2;
  ForwardTrace trace;
  Rng rng(8);
  const auto video = rng.tensor({c.frames, 40, 24, c.channels});
  auto det = empty_detections(c.frames, {40, 24});
  det.frames[0] = {{0, 0, 10, 10}, {5, 5, 20, 30}};
  (void)forward(video, det, init_weights<double>(c), c, &trace);
  const Shape field{2, 3, 8};
  EXPECT_EQ(trace.cropped, (Shape{4, 30, 20, 2}));
  EXPECT_EQ(trace.resized, (Shape{4, 32, 16, 2}));
  EXPECT_EQ(trace.v0, field);
  EXPECT_EQ(trace.local, (std::vector<Shape>{field, field}));
  EXPECT_EQ(trace.v4, field);
  EXPECT_EQ(trace.v5, (Shape{1, 8}));
  EXPECT_EQ(trace.v6, (Shape{1, 8}));
  EXPECT_EQ(trace.z, (Shape{1, 8}));
  EXPECT_EQ(trace.logits, (Shape{2}));
}

TEST(Forward, RejectsMismatchedInputs) {
  const auto c = testing::tiny_config();
  const auto w = init_weights<double>(c);
  EXPECT_THROW(forward(Tensor<double>({2, 32, 16, 2}), empty_detections(2, {32, 16}), w, c), ConfigError);
  EXPECT_THROW(forward(Tensor<double>({4, 32, 16, 2}), empty_detections(4, {16, 16}), w, c), ConfigError);
  EXPECT_THROW(forward(Tensor<double>({4, 32, 16, 3}), empty_detections(4, {32, 16}), w, c), ConfigError);
}

TEST(Forward, SinglePrecisionTracksDouble) {
  const auto c = testing::tiny_config();
  Rng rng(9);
  const auto video = rng.tensor({c.frames, c.height, c.width, c.channels});
  const auto det = empty_detections(c.frames, {c.height, c.width});
  const auto d = forward(video, det, init_weights<double>(c), c);
  const auto f = forward(video.cast<float>(), det, init_weights<float>(c), c);
  EXPECT_LE(testing::rel_error(f.cast<double>(), d), 1e-4);
}

}  // namespace
}  // namespace cuenet
