#include "holobind/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "holobind/errors.hpp"

namespace holobind {
namespace {

constexpr std::uint8_t kMagic[4] = {'H', 'B', 'T', '1'};

std::size_t scalar_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

}  // namespace

void put_u16(Bytes& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}
double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  return std::bit_cast<double>(get_u64(in, at));
}

std::size_t container_size(const Dims& dims, Dtype dtype) {
  return 4 + 1 + 1 + 4 * dims.size() + element_count(dims) * scalar_size(dtype);
}

void append_tensor(Bytes& out, const Tensor& t, Dtype dtype) {
  if (t.rank() > 255) throw ShapeError("tensor rank exceeds container limit of 255");
  for (auto d : t.dims())
    if (d > std::numeric_limits<std::uint32_t>::max())
      throw ShapeError("tensor extent exceeds u32 container limit");
  require_finite(t, "write_tensor");
  out.reserve(out.size() + container_size(t.dims(), dtype));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  if (dtype == Dtype::f32) {
    for (double v : t.values()) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw ParameterError("value overflows f32 container precision");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  } else {
    for (double v : t.values()) put_f64(out, v);
  }
}

Bytes encode_tensor(const Tensor& t, Dtype dtype) {
  Bytes out;
  append_tensor(out, t, dtype);
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  const std::size_t start = offset;
  auto need = [&](std::size_t at, std::size_t n, const char* what) {
    if (bytes.size() < at + n)
      throw FormatError(std::string("truncated tensor container: ") + what + " needs " +
                            std::to_string(at + n - start) + " bytes, only " +
                            std::to_string(bytes.size() - start) + " available",
                        bytes.size());
  };
  need(start, 6, "header");
  if (std::memcmp(bytes.data() + start, kMagic, 4) != 0)
    throw FormatError("bad tensor magic, expected HBT1", start);
  const std::uint8_t code = bytes[start + 4];
  if (code != 1 && code != 2)
    throw FormatError("unknown dtype code " + std::to_string(code), start + 4);
  const auto dtype = static_cast<Dtype>(code);
  const std::size_t ndim = bytes[start + 5];
  std::size_t at = start + 6;
  need(at, 4 * ndim, "extents");
  Dims dims(ndim);
  for (std::size_t i = 0; i < ndim; ++i, at += 4) {
    dims[i] = get_u32(bytes, at);
    if (dims[i] == 0) throw FormatError("zero extent in tensor header", at);
  }
  const std::size_t count = element_count(dims);
  const std::size_t width = scalar_size(dtype);
  if (bytes.size() - at < count * width)
    throw FormatError("truncated tensor payload: expected " + std::to_string(count * width) +
                          " bytes, got " + std::to_string(bytes.size() - at),
                      bytes.size());
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i, at += width) {
    values[i] = dtype == Dtype::f32 ? static_cast<double>(std::bit_cast<float>(get_u32(bytes, at)))
                                    : get_f64(bytes, at);
    if (!std::isfinite(values[i])) throw FormatError("non-finite scalar in payload", at);
  }
  offset = at;
  if (ndim == 0) return Tensor();
  return Tensor(std::move(dims), std::move(values));
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  Tensor t = decode_tensor(bytes, offset);
  if (offset != bytes.size())
    throw FormatError("trailing bytes after tensor container: expected " + std::to_string(offset) +
                          " bytes, got " + std::to_string(bytes.size()),
                      offset);
  return t;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParameterError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParameterError("write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype) {
  write_file(path, encode_tensor(t, dtype));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace holobind
