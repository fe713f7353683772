#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace oope {

using u128 = unsigned __int128;

// An OPE encoding y in [0, M]. 128 bits wide, which matches the 16-byte wire field.
class Order {
 public:
  constexpr Order() = default;
  constexpr explicit Order(u128 v) : v_(v) {}

  constexpr u128 value() const { return v_; }
  constexpr auto operator<=>(const Order&) const = default;

  std::string to_string() const;
  static Order parse(std::string_view text);

  // Number of significant bits (0 for zero).
  int bit_length() const;

  std::array<uint8_t, 16> to_be() const;
  static Order from_be(const uint8_t* p);

  uint64_t hi() const { return static_cast<uint64_t>(v_ >> 64); }
  uint64_t lo() const { return static_cast<uint64_t>(v_); }

 private:
  u128 v_ = 0;
};

}  // namespace oope
