/*
 *
 * Copyright 2026 The trctee Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#ifndef TRCTEE_BYTES_H_
#define TRCTEE_BYTES_H_

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trctee/status.h"

namespace trctee {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

template <std::size_t N>
using ByteArray = std::array<uint8_t, N>;

using Digest48 = ByteArray<48>;
using Key32 = ByteArray<32>;

inline ByteSpan AsBytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

inline Bytes ToBytes(ByteSpan s) { return Bytes(s.begin(), s.end()); }

std::string ToHex(ByteSpan data);
StatusOr<Bytes> FromHex(std::string_view hex);

template <std::size_t N>
StatusOr<ByteArray<N>> ArrayFromHex(std::string_view hex) {
  TRCTEE_ASSIGN_OR_RETURN(Bytes raw, FromHex(hex));
  if (raw.size() != N) {
    return MakeError(ErrorCode::kBadLength,
                     "expected " + std::to_string(N) + " bytes of hex");
  }
  ByteArray<N> out;
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

template <std::size_t N>
std::optional<ByteArray<N>> ToArray(ByteSpan s) {
  if (s.size() != N) return std::nullopt;
  ByteArray<N> out;
  std::copy(s.begin(), s.end(), out.begin());
  return out;
}

// Appends big-endian integers and raw bytes to an owned buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  ByteWriter& U8(uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  ByteWriter& U16(uint16_t v);
  ByteWriter& U32(uint32_t v);
  ByteWriter& U64(uint64_t v);
  ByteWriter& Raw(ByteSpan data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
    return *this;
  }
  ByteWriter& Str(std::string_view s) { return Raw(AsBytes(s)); }

  std::size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes Take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Bounds-checked big-endian reader; every accessor returns nullopt rather than
// reading past the end of the view.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::optional<uint8_t> U8();
  std::optional<uint16_t> U16();
  std::optional<uint32_t> U32();
  std::optional<uint64_t> U64();
  std::optional<ByteSpan> Raw(std::size_t n);

  template <std::size_t N>
  std::optional<ByteArray<N>> Array() {
    auto raw = Raw(N);
    if (!raw) return std::nullopt;
    return ToArray<N>(*raw);
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }
  ByteSpan Rest() const { return data_.subspan(pos_); }

 private:
  ByteSpan data_;
  std::size_t pos_ = 0;
};

}  // namespace trctee

#endif  // TRCTEE_BYTES_H_
