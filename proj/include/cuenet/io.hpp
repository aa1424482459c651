#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cuenet/errors.hpp"
#include "cuenet/tensor.hpp"

namespace cuenet::io {

std::string read_file(const std::string& path);

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  const std::string& str() const { return out_; }
  std::string take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  std::string out_;
};

/// Little-endian byte source; every read past the end raises FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data, std::string context = "stream")
      : data_(data), context_(std::move(context)) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > data_.size()) throw FormatError(context_ + ": offset " + std::to_string(pos) + " past end of data");
    pos_ = pos;
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(context_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + ", " + std::to_string(data_.size() - pos_) + " left)");
    }
  }
  template <typename U>
  U get() {
    auto b = bytes(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

  std::string_view data_;
  std::string context_;
  std::size_t pos_ = 0;
};

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

inline Precision precision_of(const AnyTensor& t) {
  return std::holds_alternative<Tensor<float>>(t) ? Precision::f32 : Precision::f64;
}

inline const Shape& shape_of(const AnyTensor& t) {
  return std::visit([](const auto& v) -> const Shape& { return v.shape(); }, t);
}

// CTF1 raw tensor container:
//   "CTF1" | u8 precision (0 = f32, 1 = f64) | u8 rank | rank x u32 extents | row-major LE payload

template <Real Scalar>
void encode_ctf(ByteWriter& w, const Tensor<Scalar>& t) {
  if (t.rank() > 255) throw FormatError("CTF1: rank exceeds 255");
  w.bytes("CTF1");
  w.u8(static_cast<std::uint8_t>(cuenet::precision_of<Scalar>()));
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > 0xFFFFFFFFu) throw FormatError("CTF1: extent exceeds u32");
    w.u32(static_cast<std::uint32_t>(e));
  }
  for (Scalar v : t.data()) {
    if constexpr (std::is_same_v<Scalar, float>) {
      w.f32(v);
    } else {
      w.f64(v);
    }
  }
}

template <Real Scalar>
std::string encode_ctf(const Tensor<Scalar>& t) {
  ByteWriter w;
  encode_ctf(w, t);
  return w.take();
}

/// Decodes one CTF1 blob starting at the reader's position.
AnyTensor decode_ctf(ByteReader& r);

/// Decodes a buffer that must hold exactly one CTF1 blob.
AnyTensor decode_ctf(std::string_view bytes, const std::string& context = "CTF1");

AnyTensor read_ctf(const std::string& path);

template <Real Scalar>
void write_ctf(const std::string& path, const Tensor<Scalar>& t) {
  write_file_atomic(path, encode_ctf(t));
}

}  // namespace cuenet::io
