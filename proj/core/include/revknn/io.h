// Copyright 2026 The revknn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REVKNN_IO_H_
#define REVKNN_IO_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace revknn {

using Fingerprint = std::array<std::uint8_t, 32>;

Fingerprint sha256(std::span<const std::uint8_t> bytes);
Fingerprint sha256(std::string_view text);
std::string to_hex(const Fingerprint& fp);
Fingerprint fingerprint_from_hex(std::string_view hex);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Float arrays travel through text formats as base64 of little-endian f32.
std::string encode_floats(std::span<const float> values);
std::vector<float> decode_floats(std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Little-endian append-only byte sink.
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data);
  void magic(std::string_view four_chars);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32s(std::span<const float> values);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

// Little-endian cursor over a byte buffer. Reads past the end raise
// DataError(kTruncated).
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_magic(std::string_view four_chars);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  void f32s(std::span<float> out);
  std::span<const std::uint8_t> bytes(std::size_t n);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace revknn

#endif  // REVKNN_IO_H_
