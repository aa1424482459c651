#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cuenet/detect_crop.hpp"
#include "cuenet/exec.hpp"
#include "cuenet/fusion.hpp"
#include "cuenet/global_block.hpp"
#include "cuenet/io.hpp"
#include "cuenet/uniblocks.hpp"

namespace cuenet {

inline constexpr std::size_t kPatch = 16;
inline constexpr std::size_t kPatchFrames = 3;

struct ModelConfig {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t local_depth = 2;
  std::size_t lt_kernel = 3;
  double ffn_ratio = 4.0;
  AttentionKind local_attention = AttentionKind::self_attention;
  AttentionKind global_attention = AttentionKind::meaa;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  /// Token grid after the backbone: (T/2, H/16, W/16, d).
  GridDims grid() const { return {frames / 2, height / kPatch, width / kPatch, hidden}; }
  std::size_t ffn_width() const { return ffn_hidden(hidden, ffn_ratio); }

  bool operator==(const ModelConfig&) const = default;
};

/// Small configuration used for oracle tests and the command-line defaults.
ModelConfig desk_preset();

/// Input resolution and a ViT-L-like width/depth. Only used for analytic FLOPs accounting.
ModelConfig large_preset();

/// Flat `key=value` text, one key per line in a fixed order.
std::string serialize_config(const ModelConfig& cfg);

/// Parses `key=value` lines; blank lines and `#` comments are ignored. Unknown keys are errors.
ModelConfig parse_config(std::string_view text);

ModelConfig load_config(const std::string& path);

enum class InitRule { zeros, ones, small, fan_in };

struct WeightSpec {
  std::string name;
  Shape shape;
  InitRule rule;
  std::size_t fan_in = 1;
};

/// Every weight entry the configuration demands, in initialization order.
std::vector<WeightSpec> weight_manifest(const ModelConfig& cfg);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

/// Named tensors of one precision, ordered by name.
template <Real Scalar>
class WeightContainer {
 public:
  void set(const std::string& name, Tensor<Scalar> t) { entries_.insert_or_assign(name, std::move(t)); }

  const Tensor<Scalar>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("weight entry '" + name + "' is missing");
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, Tensor<Scalar>>& entries() const { return entries_; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
  }

  /// Set when the payload was stored at lower precision and widened on load.
  bool widened = false;

  bool operator==(const WeightContainer& other) const { return entries_ == other.entries_; }

 private:
  std::map<std::string, Tensor<Scalar>> entries_;
};

/// Checks that every entry the config demands exists with its exact shape.
template <Real Scalar>
void validate_weights(const WeightContainer<Scalar>& w, const ModelConfig& cfg) {
  for (const auto& spec : weight_manifest(cfg)) {
    if (!w.contains(spec.name)) throw FormatError("weight entry '" + spec.name + "' is missing for this config");
    const Tensor<Scalar>& t = w.get(spec.name);
    if (t.shape() != spec.shape) {
      throw FormatError("weight entry '" + spec.name + "' has shape " + shape_string(t.shape()) + ", expected " +
                        shape_string(spec.shape));
    }
  }
}

/// Deterministic seeded initialization: fan-in scaled uniform maps (variance 1/fan_in),
/// unit layer-norm gains, zero biases and gate logits, small random queries and class tokens.
template <Real Scalar>
WeightContainer<Scalar> init_weights(const ModelConfig& cfg);

template <Real Scalar>
std::string encode_weights(const WeightContainer<Scalar>& w);

/// Decodes a CWC1 file. A payload stored at lower precision is widened only when
/// `allow_widening` is set (and the container's `widened` flag is raised); narrowing is refused.
template <Real Scalar>
WeightContainer<Scalar> decode_weights(std::string_view bytes, bool allow_widening = false,
                                       const std::string& context = "CWC1");

template <Real Scalar>
void save_weights(const WeightContainer<Scalar>& w, const std::string& path) {
  io::write_file_atomic(path, encode_weights(w));
}

template <Real Scalar>
WeightContainer<Scalar> load_weights(const std::string& path, bool allow_widening = false) {
  return decode_weights<Scalar>(io::read_file(path), allow_widening, path);
}

/// Parameters bound from a weight container for one forward pass.
template <Real Scalar>
struct ModelParams {
  Tensor<Scalar> conv_weight;  // [3, 16, 16, c, d]
  Tensor<Scalar> conv_bias;    // [d]
  Tensor<Scalar> cls;          // [1, d]
  std::vector<LocalBlockParams<Scalar>> local;
  GlobalBlockParams<Scalar> global;
  FusionParams<Scalar> fusion;

  explicit ModelParams(const ModelConfig& cfg)
      : conv_weight({kPatchFrames, kPatch, kPatch, cfg.channels, cfg.hidden}),
        conv_bias({cfg.hidden}),
        cls({1, cfg.hidden}),
        global(cfg.hidden, cfg.heads, cfg.ffn_width()),
        fusion(cfg.hidden, cfg.num_classes) {}
};

template <Real Scalar>
ModelParams<Scalar> bind_params(const WeightContainer<Scalar>& w, const ModelConfig& cfg) {
  cfg.validate();
  validate_weights(w, cfg);
  ModelParams<Scalar> p(cfg);
  p.conv_weight = w.get("backbone.conv.weight");
  p.conv_bias = w.get("backbone.conv.bias");
  p.cls = w.get("backbone.cls");

  const auto bind_ln = [&](LayerNormParams<Scalar>& ln, const std::string& prefix) {
    ln.gamma = w.get(prefix + ".gamma");
    ln.beta = w.get(prefix + ".beta");
  };
  const auto bind_ffn = [&](FfnParams<Scalar>& f, const std::string& prefix) {
    f.w_in = w.get(prefix + ".w_in");
    f.b_in = w.get(prefix + ".b_in");
    f.w_out = w.get(prefix + ".w_out");
    f.b_out = w.get(prefix + ".b_out");
  };
  const auto bind_attention = [&](AttentionKind kind, SelfAttentionParams<Scalar>& self, MeaaParams<Scalar>& add,
                                  const std::string& prefix) {
    if (kind == AttentionKind::self_attention) {
      self.wq = w.get(prefix + ".wq");
      self.wk = w.get(prefix + ".wk");
      self.wv = w.get(prefix + ".wv");
      self.fuse = w.get(prefix + ".fuse");
      self.heads = cfg.heads;
      return;
    }
    if (kind == AttentionKind::meaa) add.query = w.get(prefix + ".query");
    add.wq = w.get(prefix + ".wq");
    add.wk = w.get(prefix + ".wk");
    add.w_a = w.get(prefix + ".w_a");
    add.w1 = w.get(prefix + ".w1");
    add.b1 = w.get(prefix + ".b1");
    add.w2 = w.get(prefix + ".w2");
    add.b2 = w.get(prefix + ".b2");
  };

  for (std::size_t l = 0; l < cfg.local_depth; ++l) {
    const std::string prefix = "local." + std::to_string(l);
    LocalBlockParams<Scalar> b(cfg.hidden, cfg.heads, cfg.lt_kernel, cfg.ffn_width());
    bind_ln(b.ln1, prefix + ".ln1");
    bind_ln(b.ln2, prefix + ".ln2");
    bind_ln(b.ln3, prefix + ".ln3");
    b.lt.value = w.get(prefix + ".lt.value");
    b.lt.kernel = w.get(prefix + ".lt.kernel");
    b.lt.fuse = w.get(prefix + ".lt.fuse");
    b.lt.heads = cfg.heads;
    b.kind = cfg.local_attention;
    bind_attention(b.kind, b.gs, b.additive, prefix + ".attn");
    bind_ffn(b.ffn, prefix + ".ffn");
    p.local.push_back(std::move(b));
  }

  p.global.dpe_kernel = w.get("global.dpe.kernel");
  bind_ln(p.global.ln_query, "global.ln_query");
  bind_ln(p.global.ln_tokens, "global.ln_tokens");
  bind_ln(p.global.ln_ffn, "global.ln_ffn");
  p.global.kind = cfg.global_attention;
  bind_attention(p.global.kind, p.global.self, p.global.additive, "global.attn");
  bind_ffn(p.global.ffn, "global.ffn");

  p.fusion.beta = w.get("fusion.beta");
  p.fusion.proj = w.get("fusion.proj");
  p.fusion.bias = w.get("fusion.bias");
  return p;
}

/// Bilinear resize of a (T, H, W, c) video with half-pixel centers (corners not aligned), edges clamped.
template <Real Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& video, std::size_t out_h, std::size_t out_w) {
  if (video.rank() != 4) throw DimensionError("resize_bilinear: expected (T,H,W,c), got " + shape_string(video.shape()));
  const std::size_t T = video.extent(0), H = video.extent(1), W = video.extent(2), C = video.extent(3);
  if (H == out_h && W == out_w) return video;
  struct Tap {
    std::size_t i0, i1;
    Scalar frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      std::size_t i0 = static_cast<std::size_t>(std::floor(src));
      if (i0 > in - 1) i0 = in - 1;
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      v[o] = {i0, i1, static_cast<Scalar>(src - static_cast<double>(i0))};
    }
    return v;
  };
  const auto ty = taps(H, out_h), tx = taps(W, out_w);
  Tensor<Scalar> out({T, out_h, out_w, C});
  const auto at = [&](std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
    return video[((t * H + y) * W + x) * C + c];
  };
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x)
        for (std::size_t c = 0; c < C; ++c) {
          const Tap& a = ty[y];
          const Tap& b = tx[x];
          const Scalar top = (Scalar{1} - b.frac) * at(t, a.i0, b.i0, c) + b.frac * at(t, a.i0, b.i1, c);
          const Scalar bottom = (Scalar{1} - b.frac) * at(t, a.i1, b.i0, c) + b.frac * at(t, a.i1, b.i1, c);
          out[((t * out_h + y) * out_w + x) * C + c] = (Scalar{1} - a.frac) * top + a.frac * bottom;
        }
  return out;
}

/// Patch projection (3x16x16 conv, stride (1,16,16), temporal zero padding 1), then every
/// second frame is kept, then a class token is prepended to each frame.
template <Real Scalar>
TokenField<Scalar> backbone_forward(const Tensor<Scalar>& x, const ModelParams<Scalar>& p, const ModelConfig& cfg) {
  if (x.rank() != 4 || x.extent(0) != cfg.frames || x.extent(1) != cfg.height || x.extent(2) != cfg.width ||
      x.extent(3) != cfg.channels) {
    throw ConfigError("backbone: input " + shape_string(x.shape()) + " does not match config " +
                      shape_string({cfg.frames, cfg.height, cfg.width, cfg.channels}));
  }
  if (cfg.height % kPatch || cfg.width % kPatch || cfg.frames % 2) {
    throw ConfigError("backbone: H and W must be multiples of 16 and T even");
  }
  const Tensor<Scalar> projected =
      conv3d(x, p.conv_weight, {{1, static_cast<int>(kPatch), static_cast<int>(kPatch)}, {1, 0, 0}});
  const GridDims g = cfg.grid();
  TokenField<Scalar> v0(g);
  const std::size_t S = g.spatial_tokens(), d = g.hidden;
  for (std::size_t t = 0; t < g.frames; ++t) {
    std::copy(p.cls.data().begin(), p.cls.data().end(), v0.token(t, 0));
    const Scalar* src = projected.data().data() + (2 * t) * S * d;
    for (std::size_t s = 0; s < S; ++s) {
      Scalar* dst = v0.token(t, 1 + s);
      for (std::size_t j = 0; j < d; ++j) dst[j] = src[s * d + j] + p.conv_bias[j];
    }
  }
  return v0;
}

/// Shapes and decisions recorded along one forward pass.
struct ForwardTrace {
  CropDecision crop;
  Shape cropped;
  Shape resized;
  Shape v0;
  std::vector<Shape> local;
  Shape v4;
  Shape v5;
  Shape v6;
  Shape z;
  Shape logits;
};

/// crop -> bilinear resize to (H, W) -> backbone -> local blocks -> global block -> fusion -> logits.
template <Real Scalar>
Tensor<Scalar> forward(const Tensor<Scalar>& video, const DetectionSequence& detections, const ModelParams<Scalar>& p,
                       const ModelConfig& cfg, ForwardTrace* trace = nullptr) {
  cfg.validate();
  if (video.rank() != 4 || video.extent(0) != cfg.frames || video.extent(3) != cfg.channels) {
    throw ConfigError("forward: video " + shape_string(video.shape()) + " does not have " +
                      std::to_string(cfg.frames) + " frames of " + std::to_string(cfg.channels) + " channels");
  }
  if (detections.frame_count() != cfg.frames || detections.dims.height != video.extent(1) ||
      detections.dims.width != video.extent(2)) {
    throw ConfigError("forward: detections do not describe this video (frames or frame size differ)");
  }

  Tensor<Scalar> x = video;
  CropDecision crop;
  {
    exec::StageScope stage("preprocess");
    crop = compute_crop_box(detections);
    const Tensor<Scalar> cropped = apply_crop(video, crop);
    if (trace) trace->cropped = cropped.shape();
    x = resize_bilinear(cropped, cfg.height, cfg.width);
  }
  if (x.shape() != Shape{cfg.frames, cfg.height, cfg.width, cfg.channels}) {
    throw std::logic_error("forward: resized video " + shape_string(x.shape()) + " does not match config");
  }

  std::optional<TokenField<Scalar>> v;
  {
    exec::StageScope stage("backbone");
    v = backbone_forward(x, p, cfg);
  }
  if (trace) {
    trace->crop = crop;
    trace->resized = x.shape();
    trace->v0 = v->tensor().shape();
  }
  for (std::size_t l = 0; l < p.local.size(); ++l) {
    v = local_uniblock_forward(*v, p.local[l], "local." + std::to_string(l));
    if (trace) trace->local.push_back(v->tensor().shape());
  }
  GlobalTrace<Scalar> gtrace;
  const Tensor<Scalar> v6 = global_uniblock_forward(*v, p.global, trace ? &gtrace : nullptr);

  exec::StageScope stage("fusion");
  const Tensor<Scalar> z = fuse(v6, extract_class_token(*v), p.fusion.beta);
  Tensor<Scalar> logits = classify(z, p.fusion);
  if (trace) {
    trace->v4 = gtrace.v4->tensor().shape();
    trace->v5 = gtrace.v5->shape();
    trace->v6 = v6.shape();
    trace->z = z.shape();
    trace->logits = logits.shape();
  }
  return logits;
}

template <Real Scalar>
Tensor<Scalar> forward(const Tensor<Scalar>& video, const DetectionSequence& detections,
                       const WeightContainer<Scalar>& w, const ModelConfig& cfg, ForwardTrace* trace = nullptr) {
  return forward(video, detections, bind_params(w, cfg), cfg, trace);
}

/// Detection sequence with no boxes for a video of the given shape.
inline DetectionSequence empty_detections(std::size_t frames, FrameDims dims) {
  DetectionSequence seq;
  seq.dims = dims;
  seq.frames.resize(frames);
  return seq;
}

}  // namespace cuenet
