/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Little-endian byte encoding shared by the tile and checkpoint formats.

#ifndef SWINSITS_SRC_BYTEIO_HPP
#define SWINSITS_SRC_BYTEIO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "swinsits/error.hpp"

namespace swinsits::io {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void f32_array(std::span<const float> v) {
    const std::size_t at = buf_.size();
    buf_.resize(at + 4 * v.size());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(buf_.data() + at, v.data(), 4 * v.size());
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto w = std::bit_cast<std::uint32_t>(v[i]);
        for (int k = 0; k < 4; ++k) buf_[at + 4 * i + k] = static_cast<std::uint8_t>(w >> (8 * k));
      }
    }
  }

  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> buf_;
};

// Reads with bounds checks; failures are Format errors carrying the offset.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n)
      detail::raise(ErrorKind::Format, context_, ": truncated payload at offset ", pos_, " reading ",
                    what, " (need ", n, " bytes, have ", remaining(), ")");
  }

  std::uint8_t u8(const char* what) {
    require(1, what);
    return data_[pos_++];
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }

  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    require(n, what);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void f32_array(std::span<float> out, const char* what) {
    auto raw = bytes(4 * out.size(), what);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t w = 0;
      for (int k = 0; k < 4; ++k) w |= static_cast<std::uint32_t>(raw[4 * i + k]) << (8 * k);
      out[i] = std::bit_cast<float>(w);
    }
  }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    detail::raise(ErrorKind::Format, context_, ": ", msg, " at offset ", at);
  }

 private:
  std::uint64_t get(int n, const char* what) {
    require(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(data_[pos_ + k]) << (8 * k);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::raise(ErrorKind::Io, "cannot open '", path.string(), "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> buf(size);
  if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!in) detail::raise(ErrorKind::Io, "failed reading '", path.string(), "'");
  return buf;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) detail::raise(ErrorKind::Io, "cannot open '", path.string(), "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) detail::raise(ErrorKind::Io, "failed writing '", path.string(), "'");
}

}  // namespace swinsits::io

#endif  // SWINSITS_SRC_BYTEIO_HPP
