#include <charconv>
#include <sstream>

#include "cuenet/model.hpp"

namespace cuenet {

void ModelConfig::validate() const {
  const auto fail = [](const std::string& why) { throw ConfigError("model config: " + why); };
  if (frames < 2 || frames % 2) fail("frames must be even and at least 2 (temporal downsampling by 2)");
  if (height < kPatch || height % kPatch) fail("height must be a positive multiple of 16");
  if (width < kPatch || width % kPatch) fail("width must be a positive multiple of 16");
  if (channels == 0) fail("channels must be at least 1");
  if (hidden == 0) fail("hidden must be at least 1");
  if (heads == 0 || hidden % heads) fail("heads (" + std::to_string(heads) + ") must divide hidden (" + std::to_string(hidden) + ")");
  if (lt_kernel == 0 || lt_kernel % 2 == 0) fail("lt_kernel must be odd");
  if (num_classes == 0) fail("num_classes must be at least 1");
  (void)ffn_hidden(hidden, ffn_ratio);
}

ModelConfig desk_preset() { return ModelConfig{}; }

ModelConfig large_preset() {
  ModelConfig cfg;
  cfg.frames = 64;
  cfg.height = 336;
  cfg.width = 336;
  cfg.hidden = 1024;
  cfg.heads = 16;
  cfg.local_depth = 24;
  return cfg;
}

namespace {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t parse_uint(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("model config: '" + key + "' expects an unsigned integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(const std::string& key, std::string_view v) {
  double out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("model config: '" + key + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string serialize_config(const ModelConfig& c) {
  std::ostringstream os;
  os << "# cuenet model config v1\n"
     << "frames=" << c.frames << '\n'
     << "height=" << c.height << '\n'
     << "width=" << c.width << '\n'
     << "channels=" << c.channels << '\n'
     << "hidden=" << c.hidden << '\n'
     << "heads=" << c.heads << '\n'
     << "local_depth=" << c.local_depth << '\n'
     << "lt_kernel=" << c.lt_kernel << '\n'
     << "ffn_ratio=" << format_real(c.ffn_ratio) << '\n'
     << "local_attention=" << attention_name(c.local_attention) << '\n'
     << "global_attention=" << attention_name(c.global_attention) << '\n'
     << "num_classes=" << c.num_classes << '\n'
     << "seed=" << c.seed << '\n'
     << "precision=" << precision_name(c.precision) << '\n';
  return os.str();
}

ModelConfig parse_config(std::string_view text) {
  ModelConfig c = desk_preset();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("model config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "frames") c.frames = parse_uint(key, value);
    else if (key == "height") c.height = parse_uint(key, value);
    else if (key == "width") c.width = parse_uint(key, value);
    else if (key == "channels") c.channels = parse_uint(key, value);
    else if (key == "hidden") c.hidden = parse_uint(key, value);
    else if (key == "heads") c.heads = parse_uint(key, value);
    else if (key == "local_depth") c.local_depth = parse_uint(key, value);
    else if (key == "lt_kernel") c.lt_kernel = parse_uint(key, value);
    else if (key == "ffn_ratio") c.ffn_ratio = parse_real(key, value);
    else if (key == "local_attention") c.local_attention = parse_attention(std::string(value));
    else if (key == "global_attention") c.global_attention = parse_attention(std::string(value));
    else if (key == "num_classes") c.num_classes = parse_uint(key, value);
    else if (key == "seed") c.seed = parse_uint(key, value);
    else if (key == "precision") {
      if (value == "f32") c.precision = Precision::f32;
      else if (value == "f64") c.precision = Precision::f64;
      else throw ConfigError("model config: precision must be f32 or f64");
    } else {
      throw ConfigError("model config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ModelConfig load_config(const std::string& path) { return parse_config(io::read_file(path)); }

std::vector<WeightSpec> weight_manifest(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.hidden, r = cfg.ffn_width();
  std::vector<WeightSpec> m;
  const auto ln = [&](const std::string& prefix) {
    m.push_back({prefix + ".gamma", {d}, InitRule::ones});
    m.push_back({prefix + ".beta", {d}, InitRule::zeros});
  };
  const auto ffn = [&](const std::string& prefix) {
    m.push_back({prefix + ".w_in", {d, r}, InitRule::fan_in, d});
    m.push_back({prefix + ".b_in", {r}, InitRule::zeros});
    m.push_back({prefix + ".w_out", {r, d}, InitRule::fan_in, r});
    m.push_back({prefix + ".b_out", {d}, InitRule::zeros});
  };
  const auto attention = [&](AttentionKind kind, const std::string& prefix) {
    if (kind == AttentionKind::self_attention) {
      for (const char* name : {".wq", ".wk", ".wv", ".fuse"}) m.push_back({prefix + name, {d, d}, InitRule::fan_in, d});
      return;
    }
    if (kind == AttentionKind::meaa) m.push_back({prefix + ".query", {1, d}, InitRule::small});
    m.push_back({prefix + ".wq", {d, d}, InitRule::fan_in, d});
    m.push_back({prefix + ".wk", {d, d}, InitRule::fan_in, d});
    m.push_back({prefix + ".w_a", {d}, InitRule::fan_in, d});
    m.push_back({prefix + ".w1", {d, d}, InitRule::fan_in, d});
    m.push_back({prefix + ".b1", {d}, InitRule::zeros});
    m.push_back({prefix + ".w2", {d, d}, InitRule::fan_in, d});
    m.push_back({prefix + ".b2", {d}, InitRule::zeros});
  };

  m.push_back({"backbone.conv.weight", {kPatchFrames, kPatch, kPatch, cfg.channels, d}, InitRule::fan_in,
               kPatchFrames * kPatch * kPatch * cfg.channels});
  m.push_back({"backbone.conv.bias", {d}, InitRule::zeros});
  m.push_back({"backbone.cls", {1, d}, InitRule::small});
  for (std::size_t l = 0; l < cfg.local_depth; ++l) {
    const std::string prefix = "local." + std::to_string(l);
    ln(prefix + ".ln1");
    m.push_back({prefix + ".lt.value", {d, d}, InitRule::fan_in, d});
    m.push_back({prefix + ".lt.kernel", {cfg.lt_kernel, d}, InitRule::fan_in, cfg.lt_kernel});
    m.push_back({prefix + ".lt.fuse", {d, d}, InitRule::fan_in, d});
    ln(prefix + ".ln2");
    attention(cfg.local_attention, prefix + ".attn");
    ln(prefix + ".ln3");
    ffn(prefix + ".ffn");
  }
  m.push_back({"global.dpe.kernel", {3, 3, 3, d}, InitRule::fan_in, 27});
  ln("global.ln_query");
  ln("global.ln_tokens");
  attention(cfg.global_attention, "global.attn");
  ln("global.ln_ffn");
  ffn("global.ffn");
  m.push_back({"fusion.beta", {1, d}, InitRule::zeros});
  m.push_back({"fusion.proj", {d, cfg.num_classes}, InitRule::fan_in, d});
  m.push_back({"fusion.bias", {cfg.num_classes}, InitRule::zeros});
  return m;
}

}  // namespace cuenet
