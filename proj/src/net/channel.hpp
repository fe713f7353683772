#pragma once

#include <cstdint>
#include <deque>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "common/bytes.hpp"
#include "net/stream.hpp"

namespace oope::net {

constexpr uint16_t kProtocolVersion = 1;
constexpr size_t kMaxFrame = 64u << 20;  // bytes covered by the length field
constexpr size_t kFrameHeader = 4 + 1 + 16;

enum class MsgType : uint8_t {
  HELLO = 1,
  SESSION_REQUEST = 2,  // DA -> CSP
  SESSION_JOIN = 3,     // DA -> DO
  SESSION_START = 4,    // CSP -> DO, DA
  RANDOMIZED_NODE = 5,
  RANDOM_OFFSET = 6,
  GC_PAYLOAD = 7,
  OT_MSG = 8,
  GC_RESULT = 9,
  SHARES = 10,
  ORDER_RESULT = 11,
  CIPHER_UPLOAD = 12,
  MINMAX_TRIPLE = 13,
  MINMAX_RANDOMS = 14,
  MINMAX_SELECTED = 15,
  LINK_INFO = 16,  // DO -> DA: public key and integrity parameters
  INTEGRITY_TAG = 17,
  INTEGRITY_PROOF = 18,
  TABLE_REMAP = 19,
  SESSION_END = 20,
  QUERY = 21,
  QUERY_RESULT = 22,
  CLEANUP = 23,
  ABORT = 0x7f,
};

std::string_view msg_name(MsgType t);

enum class Role : uint8_t { csp = 1, do_ = 2, da = 3 };
std::string_view role_name(Role r);

struct Frame {
  MsgType type;
  SessionId session{};
  Bytes payload;
};

Bytes encode_frame(MsgType type, const SessionId& sid, std::span<const uint8_t> payload);

// Sent bytes of every channel attached to it, keyed by channel name.
class Transcript {
 public:
  void record(const std::string& channel, std::span<const uint8_t> bytes);
  std::map<std::string, Bytes> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> streams_;
};

// Framed channel over a byte stream, demultiplexed by session id. A framing or io
// failure while reading poisons the channel; later calls fail immediately.
class Channel {
 public:
  Channel(std::unique_ptr<ByteStream> stream, std::string name, Transcript* transcript = nullptr);
  ~Channel();

  const std::string& name() const { return name_; }

  void send(MsgType type, const SessionId& sid, std::span<const uint8_t> payload);
  // Best effort: failures while sending an abort are swallowed.
  void send_abort(const SessionId& sid, Errc reason, const std::string& msg);

  // Next frame of the session. An ABORT frame raises RemoteAbort.
  Frame recv(const SessionId& sid);
  // As recv, but any other type is a protocol error naming both tags.
  Frame expect(MsgType type, const SessionId& sid);
  // Next frame of any session, buffered frames first. With raise_aborts off, ABORT
  // frames are returned like any other frame.
  Frame recv_any(bool raise_aborts = true);

  // Drops buffered and future frames of a finished or aborted session.
  void forget(const SessionId& sid);

  bool poisoned() const { return poisoned_; }
  void close();

 private:
  Frame read_frame();
  void read_exact(std::span<uint8_t> out, bool frame_start);

  std::unique_ptr<ByteStream> stream_;
  std::string name_;
  Transcript* transcript_;
  std::mutex send_mu_;
  std::mutex recv_mu_;
  std::map<SessionId, std::deque<Frame>> pending_;
  std::deque<SessionId> pending_order_;
  std::set<SessionId> dead_;
  bool poisoned_ = false;
};

// Both sides send HELLO, then check the peer's version, role and parameter digest.
// Mismatch raises a handshake error (after a best-effort ABORT to the peer).
void handshake(Channel& ch, Role self, Role expected_peer, const Digest& params);
// Same, accepting any of the listed roles; returns the role the peer announced.
Role handshake_any(Channel& ch, Role self, std::initializer_list<Role> accepted, const Digest& params);

}  // namespace oope::net
