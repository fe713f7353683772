#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "circuits/block.hpp"
#include "circuits/garble.hpp"

// 1-out-of-2 oblivious transfer. Base OTs follow Chou-Orlandi over P-256; bulk
// transfers use IKNP extension with 128 base OTs, so each protocol round only costs
// symmetric crypto.
namespace oope::gc {

constexpr size_t kBaseOts = 128;
using OtKey = std::array<uint8_t, 32>;

// Base-OT sender: one random scalar a, A = aG.
class BaseOtSender {
 public:
  BaseOtSender();
  ~BaseOtSender();
  BaseOtSender(BaseOtSender&&) noexcept;
  BaseOtSender& operator=(BaseOtSender&&) noexcept;

  Bytes first_message(Rng& rng);
  // Consumes the receiver's points and returns both keys of every OT.
  std::vector<std::array<OtKey, 2>> finish(std::span<const uint8_t> reply, size_t count);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class BaseOtReceiver {
 public:
  BaseOtReceiver();
  ~BaseOtReceiver();
  BaseOtReceiver(BaseOtReceiver&&) noexcept;
  BaseOtReceiver& operator=(BaseOtReceiver&&) noexcept;

  // Reads A and answers with one point per choice bit.
  Bytes respond(std::span<const uint8_t> first, const std::vector<uint8_t>& choices, Rng& rng);
  const std::vector<OtKey>& keys() const { return keys_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<OtKey> keys_;
};

// Extension sender. Holds s and k_i^{s_i} from the base phase, where it acted as
// base-OT receiver.
class OtExtSender {
 public:
  OtExtSender(const std::vector<uint8_t>& s, const std::vector<OtKey>& keys);
  ~OtExtSender();
  OtExtSender(OtExtSender&&) noexcept;
  OtExtSender& operator=(OtExtSender&&) noexcept;

  // Answers the receiver's column matrix with masked label pairs.
  Bytes respond(std::span<const uint8_t> request, const std::vector<LabelPair>& pairs);

 private:
  std::vector<uint8_t> s_;
  Block s_block_;
  std::vector<Rng> prg_;
  uint64_t counter_ = 0;
};

// Extension receiver. Holds both base keys of every base OT.
class OtExtReceiver {
 public:
  explicit OtExtReceiver(const std::vector<std::array<OtKey, 2>>& keys);
  ~OtExtReceiver();
  OtExtReceiver(OtExtReceiver&&) noexcept;
  OtExtReceiver& operator=(OtExtReceiver&&) noexcept;

  Bytes request(const std::vector<uint8_t>& choices);
  std::vector<Block> finish(std::span<const uint8_t> response);

 private:
  std::vector<Rng> prg0_;
  std::vector<Rng> prg1_;
  std::vector<uint8_t> pending_choices_;
  std::vector<Block> pending_t_;
  uint64_t counter_ = 0;
};

// Runs base OT and one extension batch locally with access to both sides; used by
// tests and as a reference for the message flow.
std::vector<Block> ot_exchange(const std::vector<LabelPair>& pairs, const std::vector<uint8_t>& choices, Rng& rng);

}  // namespace oope::gc
