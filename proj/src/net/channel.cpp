#include "net/channel.hpp"

#include <algorithm>

namespace oope::net {

std::string_view msg_name(MsgType t) {
  switch (t) {
    case MsgType::HELLO: return "HELLO";
    case MsgType::SESSION_REQUEST: return "SESSION_REQUEST";
    case MsgType::SESSION_JOIN: return "SESSION_JOIN";
    case MsgType::SESSION_START: return "SESSION_START";
    case MsgType::RANDOMIZED_NODE: return "RANDOMIZED_NODE";
    case MsgType::RANDOM_OFFSET: return "RANDOM_OFFSET";
    case MsgType::GC_PAYLOAD: return "GC_PAYLOAD";
    case MsgType::OT_MSG: return "OT_MSG";
    case MsgType::GC_RESULT: return "GC_RESULT";
    case MsgType::SHARES: return "SHARES";
    case MsgType::ORDER_RESULT: return "ORDER_RESULT";
    case MsgType::CIPHER_UPLOAD: return "CIPHER_UPLOAD";
    case MsgType::MINMAX_TRIPLE: return "MINMAX_TRIPLE";
    case MsgType::MINMAX_RANDOMS: return "MINMAX_RANDOMS";
    case MsgType::MINMAX_SELECTED: return "MINMAX_SELECTED";
    case MsgType::LINK_INFO: return "LINK_INFO";
    case MsgType::INTEGRITY_TAG: return "INTEGRITY_TAG";
    case MsgType::INTEGRITY_PROOF: return "INTEGRITY_PROOF";
    case MsgType::TABLE_REMAP: return "TABLE_REMAP";
    case MsgType::SESSION_END: return "SESSION_END";
    case MsgType::QUERY: return "QUERY";
    case MsgType::QUERY_RESULT: return "QUERY_RESULT";
    case MsgType::CLEANUP: return "CLEANUP";
    case MsgType::ABORT: return "ABORT";
  }
  return "UNKNOWN";
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::csp: return "csp";
    case Role::do_: return "do";
    case Role::da: return "da";
  }
  return "?";
}

namespace {

std::string type_label(MsgType t) {
  std::string_view n = msg_name(t);
  if (n == "UNKNOWN") return "UNKNOWN(" + std::to_string(static_cast<int>(t)) + ")";
  return std::string(n);
}

}  // namespace

Bytes encode_frame(MsgType type, const SessionId& sid, std::span<const uint8_t> payload) {
  const size_t len = 1 + sid.size() + payload.size();
  if (len > kMaxFrame) fail(Errc::framing, "frame of " + std::to_string(len) + " bytes exceeds the 64 MiB limit");
  Bytes out;
  out.reserve(4 + len);
  ByteWriter w(out);
  w.u32(static_cast<uint32_t>(len));
  w.u8(static_cast<uint8_t>(type));
  w.raw(sid);
  w.raw(payload);
  return out;
}

void Transcript::record(const std::string& channel, std::span<const uint8_t> bytes) {
  std::lock_guard lock(mu_);
  auto& s = streams_[channel];
  s.insert(s.end(), bytes.begin(), bytes.end());
}

std::map<std::string, Bytes> Transcript::snapshot() const {
  std::lock_guard lock(mu_);
  return streams_;
}

Channel::Channel(std::unique_ptr<ByteStream> stream, std::string name, Transcript* transcript)
    : stream_(std::move(stream)), name_(std::move(name)), transcript_(transcript) {}

Channel::~Channel() = default;

void Channel::close() {
  if (stream_) stream_->close();
}

void Channel::send(MsgType type, const SessionId& sid, std::span<const uint8_t> payload) {
  Bytes frame = encode_frame(type, sid, payload);
  std::lock_guard lock(send_mu_);
  if (transcript_) transcript_->record(name_, frame);
  stream_->write_all(frame);
}

void Channel::send_abort(const SessionId& sid, Errc reason, const std::string& msg) {
  try {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(reason));
    w.str(msg.substr(0, 1024));
    send(MsgType::ABORT, sid, w.buf());
  } catch (const std::exception&) {
  }
}

void Channel::read_exact(std::span<uint8_t> out, bool frame_start) {
  size_t got = 0;
  while (got < out.size()) {
    size_t n = stream_->read_some(out.subspan(got));
    if (n == 0) {
      if (frame_start && got == 0) fail(Errc::io, name_ + ": peer closed the connection");
      fail(Errc::framing, name_ + ": truncated frame");
    }
    got += n;
  }
}

Frame Channel::read_frame() {
  if (poisoned_) fail(Errc::framing, name_ + ": channel poisoned by an earlier framing error");
  try {
    uint8_t len_buf[4];
    read_exact(len_buf, true);
    const uint32_t len = uint32_t{len_buf[0]} << 24 | uint32_t{len_buf[1]} << 16 | uint32_t{len_buf[2]} << 8 |
                         uint32_t{len_buf[3]};
    if (len < 17 || len > kMaxFrame) fail(Errc::framing, name_ + ": malformed frame length " + std::to_string(len));
    Bytes body(len);
    read_exact(body, false);
    Frame f;
    f.type = static_cast<MsgType>(body[0]);
    std::copy_n(body.begin() + 1, 16, f.session.begin());
    f.payload.assign(body.begin() + 17, body.end());
    return f;
  } catch (const Error& e) {
    if (e.code() == Errc::framing || e.code() == Errc::io) poisoned_ = true;
    throw;
  }
}

namespace {

[[noreturn]] void raise_abort(const Frame& f) {
  Errc reason = Errc::aborted;
  std::string msg;
  try {
    ByteReader r(f.payload);
    reason = static_cast<Errc>(r.u8());
    msg = r.str();
  } catch (const Error&) {
    msg = "(unreadable abort reason)";
  }
  throw RemoteAbort(reason, "peer aborted (" + std::string(errc_name(reason)) + "): " + msg);
}

}  // namespace

Frame Channel::recv(const SessionId& sid) {
  std::lock_guard lock(recv_mu_);
  Frame f;
  auto it = pending_.find(sid);
  if (it != pending_.end() && !it->second.empty()) {
    f = std::move(it->second.front());
    it->second.pop_front();
    auto pos = std::find(pending_order_.begin(), pending_order_.end(), sid);
    if (pos != pending_order_.end()) pending_order_.erase(pos);
  } else {
    for (;;) {
      f = read_frame();
      if (dead_.count(f.session)) continue;
      if (f.session == sid) break;
      const SessionId other = f.session;
      pending_[other].push_back(std::move(f));
      pending_order_.push_back(other);
    }
  }
  if (f.type == MsgType::ABORT) raise_abort(f);
  return f;
}

Frame Channel::expect(MsgType type, const SessionId& sid) {
  Frame f = recv(sid);
  if (f.type != type) {
    fail(Errc::protocol, name_ + ": expected " + type_label(type) + " but received " + type_label(f.type));
  }
  return f;
}

Frame Channel::recv_any(bool raise_aborts) {
  std::lock_guard lock(recv_mu_);
  Frame f;
  if (!pending_order_.empty()) {
    SessionId sid = pending_order_.front();
    pending_order_.pop_front();
    auto& q = pending_[sid];
    f = std::move(q.front());
    q.pop_front();
  } else {
    do {
      f = read_frame();
    } while (dead_.count(f.session));
  }
  if (raise_aborts && f.type == MsgType::ABORT) raise_abort(f);
  return f;
}

void Channel::forget(const SessionId& sid) {
  std::lock_guard lock(recv_mu_);
  dead_.insert(sid);
  pending_.erase(sid);
  pending_order_.erase(std::remove(pending_order_.begin(), pending_order_.end(), sid), pending_order_.end());
}

void handshake(Channel& ch, Role self, Role expected_peer, const Digest& params) {
  handshake_any(ch, self, {expected_peer}, params);
}

Role handshake_any(Channel& ch, Role self, std::initializer_list<Role> accepted, const Digest& params) {
  const SessionId zero{};
  ByteWriter w;
  w.u16(kProtocolVersion);
  w.u8(static_cast<uint8_t>(self));
  w.raw(params);
  ch.send(MsgType::HELLO, zero, w.buf());
  Frame f;
  try {
    f = ch.expect(MsgType::HELLO, zero);
  } catch (const RemoteAbort& e) {
    fail(Errc::handshake, ch.name() + ": handshake failed: " + e.what());
  }
  ByteReader r(f.payload);
  uint16_t version = r.u16();
  auto role = static_cast<Role>(r.u8());
  Digest peer = r.array<32>();
  r.expect_done("HELLO");
  std::string why;
  if (version != kProtocolVersion) {
    why = "protocol version " + std::to_string(version) + " != " + std::to_string(kProtocolVersion);
  } else if (std::find(accepted.begin(), accepted.end(), role) == accepted.end()) {
    std::string want;
    for (Role a : accepted) want += (want.empty() ? "" : " or ") + std::string(role_name(a));
    why = "expected peer role " + want + " but got " + std::string(role_name(role));
  } else if (peer != params) {
    why = "parameter digest mismatch (l, k, M, mode or integrity differ)";
  }
  if (!why.empty()) {
    ch.send_abort(zero, Errc::handshake, why);
    fail(Errc::handshake, ch.name() + ": handshake failed: " + why);
  }
  // Second leg: the peer confirms it accepted our HELLO as well.
  const uint8_t ok = 1;
  ch.send(MsgType::HELLO, zero, std::span(&ok, 1));
  try {
    Frame ack = ch.expect(MsgType::HELLO, zero);
    if (ack.payload.size() != 1 || ack.payload[0] != ok) fail(Errc::handshake, ch.name() + ": malformed HELLO ack");
  } catch (const RemoteAbort& e) {
    fail(Errc::handshake, ch.name() + ": handshake failed: " + e.what());
  }
  return role;
}

}  // namespace oope::net
