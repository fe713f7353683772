#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>

#include "common/bytes.hpp"
#include "integrity/integrity.hpp"
#include "ope/orders.hpp"
#include "ope/table.hpp"

namespace oope::proto {

// Parameters all three roles must agree on; their digest is checked in the handshake.
struct ProtocolParams {
  uint32_t l = 32;  // plaintext bits
  uint32_t k = 32;  // statistical blinding bits
  Order M = ope::max_order_from_log2(32);
  ope::Mode mode = ope::Mode::det;
  integ::Scheme integrity = integ::Scheme::off;

  uint32_t offset_bits() const { return l + k; }
  // x + r < 2^(l+k) + 2^l needs l + k + 1 bits.
  uint32_t width() const { return l + k + 1; }
  void validate() const;
  Digest digest() const;
  std::string describe() const;
};

// Offset for the Pedersen randomness a < q. The CSP does not know q, so it uses an
// offset wide enough to hide any subgroup order up to 256 bits.
constexpr unsigned kPedersenOffsetBits = 320;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ns() const = 0;
};
const Clock& steady_clock();

// Timing counters shared by the role engines of one deployment. Atomics because each
// role runs on its own thread.
struct Stats {
  std::atomic<uint64_t> sessions{0};
  std::atomic<uint64_t> rounds{0};
  std::atomic<int64_t> decrypt_ns{0};    // DO: decryption of blinded nodes
  std::atomic<int64_t> gc_ns{0};         // DO garbling + OT answers, DA OT + evaluation
  std::atomic<int64_t> integrity_ns{0};  // DO proofs + DA verification
  std::atomic<int64_t> round_ns{0};      // CSP wall time of comparison rounds
  std::atomic<int64_t> session_ns{0};    // CSP wall time of whole sessions

  void reset();
};

struct StatsSnapshot {
  uint64_t sessions = 0, rounds = 0;
  int64_t decrypt_ns = 0, gc_ns = 0, integrity_ns = 0, round_ns = 0, session_ns = 0;
};
StatsSnapshot snapshot(const Stats& s);

// Accumulates the elapsed time of a scope into a counter. stop() and restart() leave
// waits on a peer out of the total.
class ScopedTimer {
 public:
  ScopedTimer(const Clock& clock, std::atomic<int64_t>* sink) : clock_(clock), sink_(sink), t0_(clock.now_ns()) {}
  ~ScopedTimer() { stop(); }

  void stop() {
    if (sink_ && running_) *sink_ += clock_.now_ns() - t0_;
    running_ = false;
  }
  void restart() {
    t0_ = clock_.now_ns();
    running_ = true;
  }

 private:
  const Clock& clock_;
  std::atomic<int64_t>* sink_;
  int64_t t0_;
  bool running_ = true;
};

}  // namespace oope::proto
