#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pemnet/error.hpp"

namespace pemnet::io {

/// Appends little-endian encoded values to a byte buffer.
class ByteWriter {
 public:
  void raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  template <typename U>
  void uint(U value) {
    for (std::size_t k = 0; k < sizeof(U); ++k) buf_.push_back(static_cast<char>((value >> (8 * k)) & 0xFF));
  }
  void u8(std::uint8_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s);
  }

  const std::vector<char>& bytes() const noexcept { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked little-endian reader; throws LoadError on truncation.
class ByteReader {
 public:
  ByteReader(const std::vector<char>& data, std::string source) : data_(data), source_(std::move(source)) {}

  std::string raw(std::size_t n) {
    need(n);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + k])) << (8 * k);
    pos_ += sizeof(U);
    return v;
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str() {
    const auto n = u64();
    if (n > remaining()) throw LoadError(source_ + ": truncated file");
    return raw(static_cast<std::size_t>(n));
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw LoadError(source_ + ": truncated file");
  }

  const std::vector<char>& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace pemnet::io
