#include "common/order.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace oope {

std::string Order::to_string() const {
  if (v_ == 0) return "0";
  std::string out;
  u128 v = v_;
  while (v != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

Order Order::parse(std::string_view text) {
  if (text.empty()) fail(Errc::domain, "empty order literal");
  u128 v = 0;
  const u128 max = ~u128{0};
  for (char c : text) {
    if (c < '0' || c > '9') fail(Errc::domain, "invalid order literal");
    auto d = static_cast<unsigned>(c - '0');
    if (v > (max - d) / 10) fail(Errc::domain, "order literal exceeds 128 bits");
    v = v * 10 + d;
  }
  return Order(v);
}

int Order::bit_length() const {
  int bits = 0;
  for (u128 v = v_; v != 0; v >>= 1) ++bits;
  return bits;
}

std::array<uint8_t, 16> Order::to_be() const {
  std::array<uint8_t, 16> out{};
  for (int i = 0; i < 16; ++i) out[15 - i] = static_cast<uint8_t>(v_ >> (8 * i));
  return out;
}

Order Order::from_be(const uint8_t* p) {
  u128 v = 0;
  for (int i = 0; i < 16; ++i) v = v << 8 | p[i];
  return Order(v);
}

}  // namespace oope
