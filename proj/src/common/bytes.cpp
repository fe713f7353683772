#include "common/bytes.hpp"

#include <openssl/evp.h>

namespace oope {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::usage: return "usage";
    case Errc::domain: return "domain";
    case Errc::config: return "config";
    case Errc::protocol: return "protocol";
    case Errc::integrity: return "integrity";
    case Errc::handshake: return "handshake";
    case Errc::io: return "io";
    case Errc::capacity: return "capacity";
    case Errc::retryable: return "retryable";
    case Errc::aborted: return "aborted";
    case Errc::framing: return "framing";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

Digest sha256(std::span<const uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::internal, "sha256 failed");
  }
  return out;
}

Digest sha256(std::string_view data) {
  return sha256(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(data.data()), data.size()));
}

std::string to_hex(std::span<const uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) fail(Errc::domain, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::domain, "invalid hex digit");
    out[i] = static_cast<uint8_t>(hi << 4 | lo);
  }
  return out;
}

Bytes mpz_to_bytes(const mpz_class& v) {
  if (sgn(v) < 0) fail(Errc::domain, "negative integer cannot be encoded");
  if (v == 0) return {};
  size_t n = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  Bytes out(n);
  size_t written = 0;
  mpz_export(out.data(), &written, 1, 1, 1, 0, v.get_mpz_t());
  out.resize(written);
  return out;
}

Bytes mpz_to_fixed(const mpz_class& v, size_t width) {
  Bytes minimal = mpz_to_bytes(v);
  if (minimal.size() > width) fail(Errc::domain, "integer does not fit fixed-width field");
  Bytes out(width - minimal.size(), 0);
  out.insert(out.end(), minimal.begin(), minimal.end());
  return out;
}

mpz_class mpz_from_bytes(std::span<const uint8_t> data) {
  mpz_class v;
  if (!data.empty()) mpz_import(v.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
  return v;
}

void ByteWriter::u16(uint16_t v) {
  u8(static_cast<uint8_t>(v >> 8));
  u8(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) u8(static_cast<uint8_t>(v >> s));
}

void ByteWriter::u64(uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) u8(static_cast<uint8_t>(v >> s));
}

void ByteWriter::order(Order v) { raw(v.to_be()); }

void ByteWriter::raw(std::span<const uint8_t> data) {
  auto& b = buf();
  b.insert(b.end(), data.begin(), data.end());
}

void ByteWriter::blob(std::span<const uint8_t> data) {
  if (data.size() > UINT32_MAX) fail(Errc::domain, "blob too large");
  u32(static_cast<uint32_t>(data.size()));
  raw(data);
}

void ByteWriter::str(std::string_view s) {
  blob(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

std::span<const uint8_t> ByteReader::raw(size_t n) {
  if (remaining() < n) fail(Errc::protocol, "message truncated");
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

uint8_t ByteReader::u8() { return raw(1)[0]; }

uint16_t ByteReader::u16() {
  auto s = raw(2);
  return static_cast<uint16_t>(s[0] << 8 | s[1]);
}

uint32_t ByteReader::u32() {
  auto s = raw(4);
  uint32_t v = 0;
  for (uint8_t b : s) v = v << 8 | b;
  return v;
}

uint64_t ByteReader::u64() {
  auto s = raw(8);
  uint64_t v = 0;
  for (uint8_t b : s) v = v << 8 | b;
  return v;
}

Order ByteReader::order() { return Order::from_be(raw(16).data()); }

Bytes ByteReader::blob() {
  uint32_t n = u32();
  auto s = raw(n);
  return Bytes(s.begin(), s.end());
}

std::string ByteReader::str() {
  Bytes b = blob();
  return std::string(b.begin(), b.end());
}

void ByteReader::expect_done(const char* what) const {
  if (!done()) fail(Errc::protocol, std::string("trailing bytes in ") + what);
}

mpz_class to_mpz(Order v) {
  auto be = v.to_be();
  return mpz_from_bytes(be);
}

Order order_from_mpz(const mpz_class& v) {
  if (v < 0 || mpz_sizeinbase(v.get_mpz_t(), 2) > 128) fail(Errc::domain, "value does not fit in an order");
  Bytes b = mpz_to_fixed(v, 16);
  return Order::from_be(b.data());
}

}  // namespace oope
