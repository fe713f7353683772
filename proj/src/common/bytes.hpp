#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

#include "common/error.hpp"
#include "common/order.hpp"

namespace oope {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;
using SessionId = std::array<uint8_t, 16>;

Digest sha256(std::span<const uint8_t> data);
Digest sha256(std::string_view data);
std::string to_hex(std::span<const uint8_t> data);
Bytes from_hex(std::string_view hex);

// Big-endian minimal-length encoding; zero encodes as an empty string.
Bytes mpz_to_bytes(const mpz_class& v);
// Big-endian, left-padded to exactly `width` bytes. Throws domain error if it does not fit.
Bytes mpz_to_fixed(const mpz_class& v, size_t width);
mpz_class mpz_from_bytes(std::span<const uint8_t> data);

mpz_class to_mpz(Order v);
// Domain error if v is negative or wider than 128 bits.
Order order_from_mpz(const mpz_class& v);

// Append-only big-endian serializer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes& out) : ext_(&out) {}

  void u8(uint8_t v) { buf().push_back(v); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void order(Order v);
  void raw(std::span<const uint8_t> data);
  // 4-byte length prefix followed by the bytes.
  void blob(std::span<const uint8_t> data);
  void str(std::string_view s);
  void mpz(const mpz_class& v) { blob(mpz_to_bytes(v)); }

  Bytes& buf() { return ext_ ? *ext_ : own_; }
  Bytes take() { return std::move(buf()); }
  size_t size() { return buf().size(); }

 private:
  Bytes own_;
  Bytes* ext_ = nullptr;
};

// Bounds-checked reader; underflow raises a protocol error.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  Order order();
  std::span<const uint8_t> raw(size_t n);
  template <size_t N>
  std::array<uint8_t, N> array() {
    std::array<uint8_t, N> out{};
    auto s = raw(N);
    std::copy(s.begin(), s.end(), out.begin());
    return out;
  }
  Bytes blob();
  std::string str();
  mpz_class mpz() { return mpz_from_bytes(blob()); }

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done(const char* what) const;

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace oope
