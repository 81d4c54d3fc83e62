// Copyright 2026 The gprompt Authors.
// SPDX-License-Identifier: Apache-2.0

// Little-endian primitive encoding shared by the GPB1/GPA1/GPF1 formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gprompt/error.hpp"

namespace gprompt::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f32s(std::span<const float> v) { raw(v.data(), v.size() * 4); }
  void u64s(std::span<const std::uint64_t> v) { raw(v.data(), v.size() * 8); }
  void u32s(std::span<const std::uint32_t> v) { raw(v.data(), v.size() * 4); }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<std::byte> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  bool magic(std::string_view m) {
    if (remaining() < m.size()) return false;
    const bool ok = std::memcmp(bytes_.data() + pos_, m.data(), m.size()) == 0;
    pos_ += m.size();
    return ok;
  }
  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  float f32() { return scalar<float>(); }

  void f32s(std::span<float> out) { bulk(out.data(), out.size(), 4); }
  void u64s(std::span<std::uint64_t> out) { bulk(out.data(), out.size(), 8); }
  void u32s(std::span<std::uint32_t> out) { bulk(out.data(), out.size(), 4); }
  std::string string() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  /// Throws IoError if fewer than `count * width` bytes remain; used to
  /// reject absurd counts before allocating.
  void need(std::uint64_t count, std::uint64_t width = 1) const {
    if (width != 0 && count > remaining() / width) {
      throw IoError("truncated file: need " + std::to_string(count * width) +
                    " bytes at offset " + std::to_string(pos_));
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  template <typename T>
  T scalar() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bulk(void* out, std::size_t count, std::size_t width) {
    need(count, width);
    if (count != 0) std::memcpy(out, bytes_.data() + pos_, count * width);
    pos_ += count * width;
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace gprompt::detail
