#include <cmath>
#include <random>
#include <set>

#include "cuenet/model.hpp"

namespace cuenet {

namespace {

constexpr double kSmallInit = 0.02;

/// Uniform double in [0, 1) from the top 53 bits of the engine output.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

template <Real Scalar>
WeightContainer<Scalar> init_weights(const ModelConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  WeightContainer<Scalar> w;
  for (const WeightSpec& spec : weight_manifest(cfg)) {
    Tensor<Scalar> t(spec.shape);
    double bound = 0;
    switch (spec.rule) {
      case InitRule::zeros: break;
      case InitRule::ones: std::fill(t.data().begin(), t.data().end(), Scalar{1}); break;
      case InitRule::small: bound = kSmallInit; break;
      case InitRule::fan_in: bound = std::sqrt(3.0 / static_cast<double>(spec.fan_in)); break;
    }
    if (bound > 0) {
      for (auto& v : t.data()) v = static_cast<Scalar>(bound * (2.0 * unit_uniform(rng) - 1.0));
    }
    w.set(spec.name, std::move(t));
  }
  return w;
}

// CWC1 weight container:
//   "CWC1" | u32 version | u32 entry count
//   per entry: u32 name length | name | u8 precision | u8 rank | rank x u32 extents | u64 offset | u64 length
//   payloads: one CTF1 blob per entry at its offset (offsets from the start of the file)

template <Real Scalar>
std::string encode_weights(const WeightContainer<Scalar>& w) {
  std::vector<std::string> blobs;
  std::size_t manifest_size = 4 + 4 + 4;
  for (const auto& [name, t] : w.entries()) {
    blobs.push_back(io::encode_ctf(t));
    manifest_size += 4 + name.size() + 1 + 1 + 4 * t.rank() + 8 + 8;
  }
  io::ByteWriter out;
  out.bytes("CWC1");
  out.u32(kWeightFormatVersion);
  out.u32(static_cast<std::uint32_t>(w.entries().size()));
  std::uint64_t offset = manifest_size;
  std::size_t i = 0;
  for (const auto& [name, t] : w.entries()) {
    out.u32(static_cast<std::uint32_t>(name.size()));
    out.bytes(name);
    out.u8(static_cast<std::uint8_t>(cuenet::precision_of<Scalar>()));
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) out.u32(static_cast<std::uint32_t>(e));
    out.u64(offset);
    out.u64(blobs[i].size());
    offset += blobs[i].size();
    ++i;
  }
  for (const auto& b : blobs) out.bytes(b);
  return out.take();
}

template <Real Scalar>
WeightContainer<Scalar> decode_weights(std::string_view bytes, bool allow_widening, const std::string& context) {
  io::ByteReader r(bytes, context);
  if (r.bytes(4) != "CWC1") throw FormatError(context + ": bad magic (expected CWC1)");
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw FormatError(context + ": unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();

  struct Entry {
    std::string name;
    Precision precision;
    Shape shape;
    std::uint64_t offset, length;
  };
  std::vector<Entry> entries;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::uint32_t len = r.u32();
    e.name = std::string(r.bytes(len));
    if (!names.insert(e.name).second) throw FormatError(context + ": duplicate entry '" + e.name + "'");
    const std::uint8_t prec = r.u8();
    if (prec > 1) throw FormatError(context + ": entry '" + e.name + "' has unknown precision flag");
    e.precision = static_cast<Precision>(prec);
    const std::uint8_t rank = r.u8();
    e.shape.resize(rank);
    for (auto& x : e.shape) x = r.u32();
    e.offset = r.u64();
    e.length = r.u64();
    if (e.offset > bytes.size() || e.length > bytes.size() - e.offset) {
      throw FormatError(context + ": entry '" + e.name + "' payload lies past the end of the file (truncated?)");
    }
    entries.push_back(std::move(e));
  }

  WeightContainer<Scalar> w;
  for (const Entry& e : entries) {
    io::AnyTensor any = io::decode_ctf(bytes.substr(e.offset, e.length), context + " entry '" + e.name + "'");
    if (io::shape_of(any) != e.shape || io::precision_of(any) != e.precision) {
      throw FormatError(context + ": entry '" + e.name + "' payload disagrees with manifest (" +
                        shape_string(io::shape_of(any)) + " vs " + shape_string(e.shape) + ")");
    }
    if (auto* same = std::get_if<Tensor<Scalar>>(&any)) {
      w.set(e.name, std::move(*same));
      continue;
    }
    if constexpr (std::is_same_v<Scalar, double>) {
      if (!allow_widening) {
        throw FormatError(context + ": entry '" + e.name + "' is f32; loading into f64 requires widening");
      }
      w.set(e.name, std::get<Tensor<float>>(any).template cast<double>());
      w.widened = true;
    } else {
      throw FormatError(context + ": entry '" + e.name + "' is f64 and cannot be narrowed to f32");
    }
  }
  return w;
}

template WeightContainer<float> init_weights<float>(const ModelConfig&);
template WeightContainer<double> init_weights<double>(const ModelConfig&);
template std::string encode_weights<float>(const WeightContainer<float>&);
template std::string encode_weights<double>(const WeightContainer<double>&);
template WeightContainer<float> decode_weights<float>(std::string_view, bool, const std::string&);
template WeightContainer<double> decode_weights<double>(std::string_view, bool, const std::string&);

}  // namespace cuenet
