#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "holobind/tensor.hpp"

namespace holobind {

using Bytes = std::vector<std::uint8_t>;

/// Scalar encoding of a tensor container payload.
enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

/// Container layout, no padding, all integers little-endian:
///   "HBT1" | dtype u8 | ndim u8 | ndim x u32 extents | row-major scalars
/// ndim 0 denotes the empty tensor.
std::size_t container_size(const Dims& dims, Dtype dtype);

void append_tensor(Bytes& out, const Tensor& t, Dtype dtype);
Bytes encode_tensor(const Tensor& t, Dtype dtype);
/// Decodes one container starting at `offset` and advances it past the
/// container. Offsets in errors are absolute within `bytes`.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset);
/// Decodes a buffer holding exactly one container.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype = Dtype::f64);
Tensor read_tensor(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Little-endian primitives shared by the other binary formats.
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f64(Bytes& out, double v);
std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at);
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at);
double get_f64(std::span<const std::uint8_t> in, std::size_t at);

}  // namespace holobind
