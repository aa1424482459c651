#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cuenet/io.hpp"

namespace cuenet::io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("failed writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

namespace {

template <Real Scalar>
Tensor<Scalar> decode_payload(ByteReader& r, Shape shape) {
  const std::size_t count = shape_size(shape);
  if (r.remaining() / sizeof(Scalar) < count) {
    throw FormatError("CTF1: payload truncated (expected " + std::to_string(count) + " elements)");
  }
  std::vector<Scalar> values(count);
  for (auto& v : values) {
    if constexpr (std::is_same_v<Scalar, float>) {
      v = r.f32();
    } else {
      v = r.f64();
    }
  }
  return Tensor<Scalar>(std::move(shape), std::move(values));
}

}  // namespace

AnyTensor decode_ctf(ByteReader& r) {
  if (r.bytes(4) != "CTF1") throw FormatError("CTF1: bad magic");
  const std::uint8_t precision = r.u8();
  const std::uint8_t rank = r.u8();
  if (precision > 1) throw FormatError("CTF1: unknown precision flag " + std::to_string(precision));
  if (rank == 0) throw FormatError("CTF1: rank must be at least 1");
  Shape shape(rank);
  for (auto& e : shape) {
    e = r.u32();
    if (e == 0) throw FormatError("CTF1: zero extent");
  }
  if (precision == 0) return decode_payload<float>(r, std::move(shape));
  return decode_payload<double>(r, std::move(shape));
}

AnyTensor decode_ctf(std::string_view bytes, const std::string& context) {
  ByteReader r(bytes, context);
  AnyTensor t = decode_ctf(r);
  if (r.remaining() != 0) throw FormatError(context + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return t;
}

AnyTensor read_ctf(const std::string& path) { return decode_ctf(read_file(path), path); }

}  // namespace cuenet::io
