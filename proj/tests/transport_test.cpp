#include <thread>

#include <gtest/gtest.h>

#include "common/rng.hpp"
#include "net/channel.hpp"

namespace oope::net {
namespace {

SessionId sid_of(uint8_t v) {
  SessionId s{};
  s[15] = v;
  return s;
}

struct Pair {
  std::unique_ptr<Channel> a, b;
};

Pair loop_channels(Transcript* t = nullptr) {
  auto [x, y] = loopback_pair(Millis(5000));
  return {std::make_unique<Channel>(std::move(x), "a->b", t), std::make_unique<Channel>(std::move(y), "b->a", t)};
}

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Frame, Layout) {
  Bytes payload{9, 8, 7};
  Bytes f = encode_frame(MsgType::SHARES, sid_of(5), payload);
  ASSERT_EQ(f.size(), kFrameHeader + 3);
  EXPECT_EQ(f[0], 0);
  EXPECT_EQ(f[3], 1 + 16 + 3);
  EXPECT_EQ(f[4], static_cast<uint8_t>(MsgType::SHARES));
  EXPECT_EQ(f[20], 5);
  EXPECT_EQ(f[21], 9);
}

TEST(Frame, OversizeRejected) {
  Bytes big(kMaxFrame);
  expect_errc(Errc::framing, [&] { encode_frame(MsgType::GC_PAYLOAD, sid_of(1), big); });
}

TEST(Channel, RoundTripIsByteIdentical) {
  auto p = loop_channels();
  Rng rng = Rng::from_seed(1, "payload");
  Bytes payload(100000);
  rng.fill(payload);
  p.a->send(MsgType::GC_PAYLOAD, sid_of(1), payload);
  Frame f = p.b->expect(MsgType::GC_PAYLOAD, sid_of(1));
  EXPECT_EQ(f.payload, payload);
  p.a->send(MsgType::SHARES, sid_of(1), {});
  EXPECT_TRUE(p.b->expect(MsgType::SHARES, sid_of(1)).payload.empty());
}

TEST(Channel, InterleavedSessionsKeepPerSessionOrder) {
  Rng rng = Rng::from_seed(2, "interleave");
  for (int trial = 0; trial < 20; ++trial) {
    auto p = loop_channels();
    std::map<uint8_t, uint32_t> sent;
    const int sessions = 1 + static_cast<int>(rng.below(5));
    for (int i = 0; i < 200; ++i) {
      uint8_t s = static_cast<uint8_t>(rng.below(static_cast<uint64_t>(sessions)));
      ByteWriter w;
      w.u32(sent[s]++);
      p.a->send(MsgType::OT_MSG, sid_of(s), w.buf());
    }
    // Drain sessions in a random order; each must see 0, 1, 2, ...
    std::vector<uint8_t> order;
    for (auto& [s, n] : sent) order.push_back(s);
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (uint8_t s : order) {
      for (uint32_t k = 0; k < sent[s]; ++k) {
        Frame f = p.b->recv(sid_of(s));
        ByteReader r(f.payload);
        ASSERT_EQ(r.u32(), k);
      }
    }
  }
}

TEST(Channel, RecvAnyPrefersBufferedFrames) {
  auto p = loop_channels();
  p.a->send(MsgType::OT_MSG, sid_of(1), {});
  p.a->send(MsgType::SHARES, sid_of(2), {});
  EXPECT_EQ(p.b->recv(sid_of(2)).type, MsgType::SHARES);
  Frame f = p.b->recv_any();
  EXPECT_EQ(f.session, sid_of(1));
  EXPECT_EQ(f.type, MsgType::OT_MSG);
}

TEST(Channel, UnexpectedTypeNamesBothTags) {
  auto p = loop_channels();
  p.a->send(MsgType::SHARES, sid_of(1), {});
  try {
    p.b->expect(MsgType::GC_PAYLOAD, sid_of(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::protocol);
    std::string msg = e.what();
    EXPECT_NE(msg.find("GC_PAYLOAD"), std::string::npos);
    EXPECT_NE(msg.find("SHARES"), std::string::npos);
  }
}

TEST(Channel, AbortRaisesRemoteAbort) {
  auto p = loop_channels();
  p.a->send_abort(sid_of(3), Errc::integrity, "share mismatch");
  try {
    p.b->expect(MsgType::SHARES, sid_of(3));
    FAIL();
  } catch (const RemoteAbort& e) {
    EXPECT_EQ(e.reason(), Errc::integrity);
    EXPECT_NE(std::string(e.what()).find("share mismatch"), std::string::npos);
  }
}

TEST(Channel, TruncatedFramePoisons) {
  auto [x, y] = loopback_pair(Millis(5000));
  Channel ch(std::move(y), "rx");
  Bytes f = encode_frame(MsgType::SHARES, sid_of(1), Bytes{1, 2, 3, 4});
  f.resize(f.size() - 2);
  x->write_all(f);
  x->close();
  expect_errc(Errc::framing, [&] { ch.recv(sid_of(1)); });
  EXPECT_TRUE(ch.poisoned());
  expect_errc(Errc::framing, [&] { ch.recv(sid_of(1)); });
}

TEST(Channel, MalformedLengthPoisons) {
  auto [x, y] = loopback_pair(Millis(5000));
  Channel ch(std::move(y), "rx");
  x->write_all(Bytes{0, 0, 0, 3, 1, 2, 3});
  expect_errc(Errc::framing, [&] { ch.recv_any(); });
  EXPECT_TRUE(ch.poisoned());
  auto [x2, y2] = loopback_pair(Millis(5000));
  Channel ch2(std::move(y2), "rx");
  x2->write_all(Bytes{0x10, 0, 0, 0});
  expect_errc(Errc::framing, [&] { ch2.recv_any(); });
}

TEST(Channel, ClosedPeerIsIoError) {
  auto [x, y] = loopback_pair(Millis(5000));
  Channel ch(std::move(y), "rx");
  x->close();
  expect_errc(Errc::io, [&] { ch.recv_any(); });
}

void run_handshake(Channel& a, Channel& b, Role ra, Role rb, const Digest& da, const Digest& db, Errc* ea,
                   Errc* eb) {
  std::thread t([&] {
    try {
      handshake(b, rb, ra, db);
    } catch (const Error& e) {
      *eb = e.code();
    }
  });
  try {
    handshake(a, ra, rb, da);
  } catch (const Error& e) {
    *ea = e.code();
  }
  t.join();
}

TEST(Handshake, MatchingParameters) {
  auto p = loop_channels();
  Digest d = sha256(std::string_view("l=32"));
  Errc ea{}, eb{};
  run_handshake(*p.a, *p.b, Role::da, Role::csp, d, d, &ea, &eb);
  EXPECT_EQ(ea, Errc{});
  EXPECT_EQ(eb, Errc{});
}

TEST(Handshake, DigestMismatchRejected) {
  auto p = loop_channels();
  Errc ea{}, eb{};
  run_handshake(*p.a, *p.b, Role::da, Role::csp, sha256(std::string_view("l=32")),
                sha256(std::string_view("l=64")), &ea, &eb);
  EXPECT_EQ(ea, Errc::handshake);
  EXPECT_EQ(eb, Errc::handshake);
}

TEST(Handshake, WrongRoleRejected) {
  auto p = loop_channels();
  Digest d{};
  Errc eb{};
  std::thread t([&] {
    try {
      handshake(*p.b, Role::csp, Role::da, d);
    } catch (const Error& e) {
      eb = e.code();
    }
  });
  expect_errc(Errc::handshake, [&] { handshake(*p.a, Role::do_, Role::csp, d); });
  t.join();
  // The CSP expected a DA and sees a DO.
  EXPECT_EQ(eb, Errc::handshake);
}

TEST(Tcp, RoundTripAndTranscriptMatchesLoopback) {
  auto exchange = [](Channel& a, Channel& b) {
    Rng rng = Rng::from_seed(3, "tcp");
    for (int i = 0; i < 50; ++i) {
      Bytes payload(rng.below(5000));
      rng.fill(payload);
      a.send(MsgType::OT_MSG, sid_of(static_cast<uint8_t>(i % 3)), payload);
      Frame f = b.recv(sid_of(static_cast<uint8_t>(i % 3)));
      ASSERT_EQ(f.payload, payload);
      b.send(MsgType::SHARES, f.session, f.payload);
      ASSERT_EQ(a.expect(MsgType::SHARES, f.session).payload, payload);
    }
  };
  Transcript loop_t, tcp_t;
  {
    auto p = loop_channels(&loop_t);
    exchange(*p.a, *p.b);
  }
  {
    TcpListener l("127.0.0.1", 0);
    std::unique_ptr<ByteStream> server;
    std::thread t([&] { server = l.accept(Millis(5000)); });
    auto client = tcp_connect("127.0.0.1", l.port(), Millis(5000));
    t.join();
    Channel a(std::move(client), "a->b", &tcp_t);
    Channel b(std::move(server), "b->a", &tcp_t);
    exchange(a, b);
  }
  EXPECT_EQ(loop_t.snapshot(), tcp_t.snapshot());
  EXPECT_EQ(loop_t.snapshot().size(), 2u);
}

TEST(Tcp, ConnectTimesOut) {
  uint16_t port;
  {
    TcpListener l("127.0.0.1", 0);
    port = l.port();
  }
  expect_errc(Errc::io, [&] { tcp_connect("127.0.0.1", port, Millis(200)); });
}

TEST(Address, Parse) {
  auto [h, p] = parse_address("127.0.0.1:7001");
  EXPECT_EQ(h, "127.0.0.1");
  EXPECT_EQ(p, 7001);
  expect_errc(Errc::usage, [] { parse_address("localhost"); });
  expect_errc(Errc::usage, [] { parse_address("h:99999"); });
  expect_errc(Errc::usage, [] { parse_address("h:12x"); });
}

}  // namespace
}  // namespace oope::net
