#pragma once

#include <array>
#include <cstdint>

#include "common/bytes.hpp"
#include "common/rng.hpp"

namespace oope::gc {

// 128-bit wire label.
struct Block {
  uint64_t hi = 0;
  uint64_t lo = 0;

  Block operator^(const Block& o) const { return {hi ^ o.hi, lo ^ o.lo}; }
  Block& operator^=(const Block& o) {
    hi ^= o.hi;
    lo ^= o.lo;
    return *this;
  }
  bool operator==(const Block&) const = default;
  bool lsb() const { return (lo & 1) != 0; }
  Block masked(bool bit) const { return bit ? *this : Block{}; }

  std::array<uint8_t, 16> bytes() const;
  static Block from_bytes(const uint8_t* p);
  static Block random(Rng& rng);
};

// SHA-256 of (tweak, label) truncated to 128 bits.
Block hash_block(const Block& label, uint64_t tweak);

inline void write_block(ByteWriter& w, const Block& b) { w.raw(b.bytes()); }
inline Block read_block(ByteReader& r) { return Block::from_bytes(r.raw(16).data()); }

}  // namespace oope::gc
