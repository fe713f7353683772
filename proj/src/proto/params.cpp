#include "proto/params.hpp"

#include <chrono>

namespace oope::proto {

void ProtocolParams::validate() const {
  if (l == 0 || l > 64) fail(Errc::config, "plaintext length l must lie in [1, 64]");
  if (k == 0) fail(Errc::config, "statistical parameter k must be positive");
  if (width() > 127) fail(Errc::config, "l + k + 1 must not exceed 127 bits");
  if (M.value() < 2) fail(Errc::config, "maximum order M must be at least 2");
}

Digest ProtocolParams::digest() const {
  ByteWriter w;
  w.str("oope-params-v1");
  w.u32(l);
  w.u32(k);
  w.order(M);
  w.u8(static_cast<uint8_t>(mode));
  w.u8(static_cast<uint8_t>(integrity));
  return sha256(w.buf());
}

std::string ProtocolParams::describe() const {
  return "l=" + std::to_string(l) + " k=" + std::to_string(k) + " M=" + M.to_string() + " mode=" +
         std::string(ope::mode_name(mode)) + " integrity=" + std::string(integ::scheme_name(integrity));
}

namespace {

class SteadyClock : public Clock {
 public:
  int64_t now_ns() const override {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
};

}  // namespace

const Clock& steady_clock() {
  static const SteadyClock c;
  return c;
}

void Stats::reset() {
  sessions = 0;
  rounds = 0;
  decrypt_ns = 0;
  gc_ns = 0;
  integrity_ns = 0;
  round_ns = 0;
  session_ns = 0;
}

StatsSnapshot snapshot(const Stats& s) {
  return {s.sessions.load(), s.rounds.load(),   s.decrypt_ns.load(), s.gc_ns.load(),
          s.integrity_ns.load(), s.round_ns.load(), s.session_ns.load()};
}

}  // namespace oope::proto
