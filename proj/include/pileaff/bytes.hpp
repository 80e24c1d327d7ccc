// Copyright 2026 The pileaff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian record encoding shared by the snapshot, checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pileaff/common.hpp"

namespace pileaff {

static_assert(std::endian::native == std::endian::little, "byte codecs assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void putBytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void putString(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    putBytes(s);
  }
  template <typename T>
  void putArray(std::span<const T> values) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    buf_.insert(buf_.end(), p, p + values.size_bytes());
  }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view getBytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string getString(std::size_t max_len = 1 << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) fail(ErrorCode::kFormat, "string field too long");
    return std::string(getBytes(n));
  }
  template <typename T>
  void getArray(std::span<T> out) {
    need(out.size_bytes());
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  bool atEnd() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(ErrorCode::kFormat, "truncated record");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string readFile(const std::string& path);
void writeFile(const std::string& path, std::string_view bytes);

}  // namespace pileaff
