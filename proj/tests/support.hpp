#pragma once

#include <functional>
#include <memory>
#include <mutex>

#include "homcrypto/paillier.hpp"
#include "integrity/integrity.hpp"
#include "net/channel.hpp"
#include "net/stream.hpp"

namespace oope::testing {

inline const hom::PrivateKey& do_key512() {
  static Rng rng = Rng::from_seed(512, "proto-do");
  static const hom::PrivateKey sk = hom::keygen(512, rng, {.allow_test_sizes = true});
  return sk;
}

// The DA key must be wider than the DO key.
inline const hom::PrivateKey& da_key576() {
  static Rng rng = Rng::from_seed(576, "proto-da");
  static const hom::PrivateKey sk = hom::keygen(576, rng, {.allow_test_sizes = true});
  return sk;
}

inline const integ::MacParams& mac_params() {
  static Rng rng = Rng::from_seed(7, "proto-mac");
  static const integ::MacParams p = integ::generate_params(512, 160, rng);
  return p;
}

// Passes writes through, letting a callback inspect or rewrite each frame first.
// Channel::send writes exactly one frame per call.
class TapStream : public net::ByteStream {
 public:
  using Tap = std::function<void(Bytes& frame)>;
  TapStream(std::unique_ptr<net::ByteStream> inner, Tap tap) : inner_(std::move(inner)), tap_(std::move(tap)) {}

  void write_all(std::span<const uint8_t> data) override {
    Bytes frame(data.begin(), data.end());
    tap_(frame);
    inner_->write_all(frame);
  }
  size_t read_some(std::span<uint8_t> out) override { return inner_->read_some(out); }
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<net::ByteStream> inner_;
  Tap tap_;
};

inline net::MsgType frame_type(const Bytes& frame) { return static_cast<net::MsgType>(frame.at(4)); }
inline std::span<const uint8_t> frame_payload(const Bytes& frame) {
  return std::span<const uint8_t>(frame).subspan(net::kFrameHeader);
}

}  // namespace oope::testing
