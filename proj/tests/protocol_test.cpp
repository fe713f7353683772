#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "oracle.hpp"
#include "proto/cluster.hpp"
#include "support.hpp"

using namespace oope;
using namespace oope::proto;
using oope::testing::da_key576;
using oope::testing::do_key512;

namespace {

ProtocolParams det_params(Order M, uint32_t l = 32) {
  ProtocolParams p;
  p.l = l;
  p.k = 32;
  p.M = M;
  p.mode = ope::Mode::det;
  return p;
}

ProtocolParams fh_params(Order M, uint32_t l = 32) {
  ProtocolParams p = det_params(M, l);
  p.mode = ope::Mode::fh;
  return p;
}

ope::ServerState build(const std::vector<uint64_t>& data, const ProtocolParams& p, bool balance, uint64_t seed,
                       const integ::MacParams* mac = nullptr) {
  Rng rng = Rng::from_seed(seed, "proto-state");
  ope::InitOptions o;
  o.mode = p.mode;
  o.l = p.l;
  o.M = p.M;
  o.balance_tree = balance;
  o.integrity = p.integrity;
  o.params = mac;
  return ope::init_state(data, do_key512().public_key(), o, rng).server;
}

// Insertion order 32, 20, 25, 69, 10 gives orders (14, 7, 11, 21, 4) for
// (32, 20, 25, 69, 10) and the tree 32(20(10, 25), 69).
ope::ServerState example1() { return build({32, 20, 25, 69, 10}, det_params(Order(28)), false, 1); }

template <class F>
Errc remote_reason(F&& f) {
  try {
    f();
  } catch (const RemoteAbort& e) {
    return e.reason();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::internal;
}

std::vector<Order> orders_of(const ope::ServerState& st) {
  std::vector<Order> out;
  for (const auto& [y, e] : st.table.entries()) out.push_back(y);
  return out;
}

}  // namespace

TEST(Protocol, Example1ExistingValue) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  auto r = c.da().encrypt("v", 25);
  EXPECT_EQ(r.y, Order(11));
  EXPECT_TRUE(r.existing);
  EXPECT_EQ(r.h, 3u);
  EXPECT_EQ(r.rounds, 3u);
  EXPECT_EQ(st.table.size(), 5u);
}

TEST(Protocol, Example1Insertions) {
  for (auto [x, y] : {std::pair<uint64_t, int>{15, 6}, {100, 25}, {5, 2}}) {
    auto st = example1();
    Cluster c({.params = det_params(Order(28))}, do_key512());
    c.add_column("v", &st);
    auto r = c.da().encrypt("v", x);
    EXPECT_EQ(r.y, Order(static_cast<u128>(y))) << x;
    EXPECT_FALSE(r.existing);
    EXPECT_EQ(r.rounds, 3u);
    ASSERT_EQ(st.table.size(), 6u);
    const auto& e = st.table.at(r.y);
    EXPECT_EQ(do_key512().decrypt(e.cipher), x);
    ASSERT_TRUE(e.da_session.has_value());
    EXPECT_EQ(*e.da_session, r.sid);
    EXPECT_TRUE(st.tree.check_invariants());
  }
}

TEST(Protocol, EmptyTableGetsMidpoint) {
  ope::ServerState st;
  st.table = ope::OpeTable(Order(28), 32, ope::Mode::det);
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  auto r = c.da().encrypt("v", 9);
  EXPECT_EQ(r.h, 0u);
  EXPECT_EQ(r.y, Order(14));
}

// One-node tree: the CSP's decision is visible in the assigned order.
TEST(Protocol, CompareRoundMatchesIntegerOracle) {
  const ProtocolParams p = det_params(Order(28));
  Rng rng = Rng::from_seed(3, "compare");
  Cluster c({.params = p, .seed = 3}, do_key512());
  auto st = build({0}, p, true, 99);
  c.add_column("v", &st);
  for (int i = 0; i < 500; ++i) {
    const uint64_t x = rng.next_u64() & 0xffffffffu;
    const uint64_t xbar = rng.below(8) == 0 ? x : rng.next_u64() & 0xffffffffu;
    st = build({x}, p, true, 100 + i);
    auto r = c.da().encrypt("v", xbar);
    ASSERT_EQ(r.rounds, 1u);
    if (xbar == x) {
      EXPECT_TRUE(r.existing);
      EXPECT_EQ(r.y, Order(14));
    } else {
      EXPECT_FALSE(r.existing);
      EXPECT_EQ(r.y, xbar > x ? Order(21) : Order(7)) << x << " " << xbar;
    }
  }
}

TEST(Protocol, OracleEquivalenceAndSandwich) {
  Rng rng = Rng::from_seed(11, "oracle");
  const ProtocolParams p = det_params(ope::max_order_from_log2(32), 16);
  for (int trial = 0; trial < 12; ++trial) {
    const size_t n = 1 + rng.below(64);
    std::vector<uint64_t> data(n);
    for (auto& v : data) v = rng.below(1u << 16);
    auto st = build(data, p, true, 200 + trial);
    Cluster c({.params = p, .seed = static_cast<uint64_t>(trial)}, do_key512());
    c.add_column("v", &st);
    for (int q = 0; q < 6; ++q) {
      // Every other query reuses a dataset value, so the equality path is covered.
      const uint64_t x = q % 2 ? data[rng.below(n)] : rng.below(1u << 16);
      const auto want = oope::testing::det_oracle(st, do_key512(), x);
      ASSERT_FALSE(want.gap_exhausted);
      auto r = c.da().encrypt("v", x);
      EXPECT_EQ(r.y, want.y);
      EXPECT_EQ(r.existing, want.existing);
      EXPECT_EQ(r.rounds, want.h);
      EXPECT_TRUE(oope::testing::sandwich(st, do_key512(), r.y, x));
    }
  }
}

TEST(Protocol, RoundsEqualHeightForEqualityAtRoot) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  auto r = c.da().encrypt("v", 32);
  EXPECT_TRUE(r.existing);
  EXPECT_EQ(r.y, Order(14));
  EXPECT_EQ(r.rounds, st.tree.height());
}

TEST(Protocol, FlippedShareBitIsDetected) {
  for (const char* who : {"da->csp", "do->csp"}) {
    for (int bit = 0; bit < 4; ++bit) {
      auto st = example1();
      const auto before = orders_of(st);
      std::atomic<bool> armed{false};
      ClusterOptions o{.params = det_params(Order(28))};
      o.wrap = [&, who](const std::string& name, std::unique_ptr<net::ByteStream> s) -> std::unique_ptr<net::ByteStream> {
        if (name != who) return s;
        return std::make_unique<oope::testing::TapStream>(std::move(s), [&, bit](Bytes& f) {
          if (oope::testing::frame_type(f) == net::MsgType::SHARES && armed.exchange(false)) {
            f[net::kFrameHeader] ^= static_cast<uint8_t>(1u << bit);
          }
        });
      };
      Cluster c(o, do_key512());
      c.add_column("v", &st);
      armed = true;
      EXPECT_EQ(remote_reason([&] { c.da().encrypt("v", 15); }), Errc::integrity) << who << " bit " << bit;
      EXPECT_EQ(orders_of(st), before);
      EXPECT_EQ(st.tree.height(), 3u);
      // The deployment keeps working after the abort.
      EXPECT_EQ(c.da().encrypt("v", 15).y, Order(6));
    }
  }
}

TEST(Protocol, DaMaskedBitsLookUniform) {
  const ProtocolParams p = det_params(Order(28));
  std::array<int, 4> counts{};
  std::vector<mpz_class> blinded;
  ClusterOptions o{.params = p, .seed = 5};
  o.wrap = [&](const std::string& name, std::unique_ptr<net::ByteStream> s) -> std::unique_ptr<net::ByteStream> {
    if (name == "da->do") {
      return std::make_unique<oope::testing::TapStream>(std::move(s), [&](Bytes& f) {
        if (oope::testing::frame_type(f) == net::MsgType::GC_RESULT) {
          auto pl = oope::testing::frame_payload(f);
          ++counts[pl[0] | pl[1] << 1];
        }
      });
    }
    if (name == "csp->do") {
      return std::make_unique<oope::testing::TapStream>(std::move(s), [&](Bytes& f) {
        if (oope::testing::frame_type(f) == net::MsgType::RANDOMIZED_NODE) {
          blinded.push_back(do_key512().decrypt(decode_node(oope::testing::frame_payload(f), false).node));
        }
      });
    }
    return s;
  };
  Cluster c(o, do_key512());
  const auto base = build({1000}, p, true, 9);
  auto st = base;
  c.add_column("v", &st);
  const int sessions = 400;
  for (int i = 0; i < sessions; ++i) {
    st = base;
    c.da().encrypt("v", 2000);
  }
  double chi2 = 0;
  for (int n : counts) chi2 += (n - sessions / 4.0) * (n - sessions / 4.0) / (sessions / 4.0);
  EXPECT_LT(chi2, 16.27);  // 3 degrees of freedom, p = 0.001

  // The DO sees x + r with r uniform over l + k bits: the top bit is balanced.
  ASSERT_EQ(blinded.size(), static_cast<size_t>(sessions));
  int top = 0;
  for (const auto& v : blinded) {
    ASSERT_GE(v, 1000);
    ASSERT_LT(v, (mpz_class(1) << 64) + 1000);
    top += mpz_tstbit(v.get_mpz_t(), 63);
  }
  EXPECT_NEAR(top, sessions / 2, 4 * 10);  // four standard deviations
}

TEST(Protocol, RebalanceReachesTheDo) {
  const ProtocolParams p = det_params(Order(28));
  auto st = build({10, 20, 30}, p, true, 4);
  Cluster c({.params = p}, do_key512());
  c.add_column("v", &st);
  std::vector<ope::Remap> seen;
  std::mutex mu;
  c.do_engine().on_remap = [&](const std::string& col, const ope::Remap& r) {
    std::lock_guard lk(mu);
    EXPECT_EQ(col, "v");
    seen.push_back(r);
  };
  int rebalances = 0;
  for (uint64_t x = 11; x < 19; ++x) {
    auto r = c.da().encrypt("v", x);
    rebalances += r.rebalanced;
    EXPECT_TRUE(oope::testing::sandwich(st, do_key512(), r.y, x));
    EXPECT_EQ(do_key512().decrypt(st.table.at(r.y).cipher), x);
  }
  EXPECT_GT(rebalances, 0);
  std::lock_guard lk(mu);
  EXPECT_EQ(seen.size(), static_cast<size_t>(rebalances));
  EXPECT_TRUE(st.tree.check_invariants());
}

TEST(Protocol, RebalanceRefusedLeavesStateUnchanged) {
  const ProtocolParams p = det_params(Order(28));
  auto st = build({10, 20, 30}, p, true, 4);
  Cluster c({.params = p, .allow_rebalance = false}, do_key512());
  c.add_column("v", &st);
  Errc last = Errc::internal;
  std::vector<Order> before;
  for (uint64_t x = 11; x < 19; ++x) {
    before = orders_of(st);
    last = remote_reason([&] { c.da().encrypt("v", x); });
    if (last != Errc::internal) break;
  }
  EXPECT_EQ(last, Errc::capacity);
  EXPECT_EQ(orders_of(st), before);
}

TEST(Protocol, UnknownColumnAborts) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  EXPECT_EQ(remote_reason([&] { c.da().encrypt("nope", 1); }), Errc::usage);
  EXPECT_EQ(c.da().encrypt("v", 15).y, Order(6));
}

TEST(Protocol, WideValueRejectedLocally) {
  const ProtocolParams p = det_params(ope::max_order_from_log2(32), 16);
  ope::ServerState st;
  st.table = ope::OpeTable(p.M, 16, ope::Mode::det);
  Cluster c({.params = p}, do_key512());
  c.add_column("v", &st);
  EXPECT_EQ(remote_reason([&] { c.da().encrypt("v", 1u << 16); }), Errc::domain);
  EXPECT_EQ(c.da().encrypt("v", (1u << 16) - 1).h, 0u);
}

TEST(Protocol, CleanupRemovesSessionEntries) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  auto a = c.da().encrypt("v", 15);
  auto b = c.da().encrypt("v", 100);
  EXPECT_EQ(st.table.size(), 7u);
  SessionId unknown{};
  unknown[0] = 0xee;
  EXPECT_EQ(c.da().cleanup("v", {a.sid, unknown}), 1u);
  EXPECT_EQ(st.table.find(a.y), nullptr);
  EXPECT_NE(st.table.find(b.y), nullptr);
  EXPECT_EQ(c.da().cleanup("", {b.sid}), 1u);
  EXPECT_EQ(orders_of(st), orders_of(example1()));
  EXPECT_TRUE(st.tree.check_invariants());
}

TEST(Protocol, QueryHook) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  EXPECT_EQ(remote_reason([&] { c.da().query(Bytes{1}); }), Errc::usage);
  c.csp().on_query = [](std::span<const uint8_t> body) { return Bytes(body.rbegin(), body.rend()); };
  EXPECT_EQ(c.da().query(Bytes{1, 2, 3}), (Bytes{3, 2, 1}));
}

TEST(Protocol, AdmissionHookRefuses) {
  auto st = example1();
  Cluster c({.params = det_params(Order(28))}, do_key512());
  c.add_column("v", &st);
  c.csp().admit = [](const std::string&, uint64_t n) { return n <= 2; };
  c.da().encrypt("v", 25);
  c.da().encrypt("v", 25);
  EXPECT_EQ(remote_reason([&] { c.da().encrypt("v", 25); }), Errc::retryable);
  c.csp().admit = nullptr;
  EXPECT_EQ(c.da().encrypt("v", 15).y, Order(6));
}

TEST(Protocol, LoopbackAndTcpTranscriptsMatch) {
  const ProtocolParams p = det_params(ope::max_order_from_log2(32));
  std::vector<uint64_t> data;
  Rng rng = Rng::from_seed(21, "data");
  for (int i = 0; i < 100; ++i) data.push_back(rng.below(1u << 20));
  std::map<std::string, Bytes> snaps[2];
  for (int tcp = 0; tcp < 2; ++tcp) {
    auto st = build(data, p, true, 22);
    Cluster c({.params = p, .tcp = tcp == 1, .seed = 77, .record = true}, do_key512());
    c.add_column("v", &st);
    c.da().encrypt("v", 5);
    c.da().encrypt("v", data[3]);
    c.shutdown();
    snaps[tcp] = c.transcript().snapshot();
  }
  EXPECT_EQ(snaps[0].size(), 6u);
  EXPECT_EQ(snaps[0], snaps[1]);
}

TEST(ProtocolFh, DistinctValueGetsTheDeterministicOrder) {
  const std::vector<uint64_t> data = {40, 10, 70, 20, 90, 55};
  auto det = build(data, det_params(Order(1000)), true, 5);
  auto fh = build(data, fh_params(Order(1000)), true, 5);
  Cluster cd({.params = det_params(Order(1000))}, do_key512());
  Cluster cf({.params = fh_params(Order(1000))}, do_key512(), nullptr, &da_key576());
  cd.add_column("v", &det);
  cf.add_column("v", &fh);
  for (uint64_t x : {5, 15, 45, 60, 95}) {
    auto a = cd.da().encrypt("v", x);
    auto b = cf.da().encrypt("v", x);
    EXPECT_EQ(a.y, b.y) << x;
    EXPECT_EQ(b.c_min, b.y);
    EXPECT_EQ(b.c_max, b.y);
  }
}

TEST(ProtocolFh, DuplicatesGetDistinctOrdersInRank) {
  const ProtocolParams p = fh_params(ope::max_order_from_log2(40));
  auto st = build({5, 12, 9, 12, 20, 12, 3}, p, true, 6);
  Cluster c({.params = p}, do_key512(), nullptr, &da_key576());
  c.add_column("v", &st);
  std::set<Order> orders;
  for (int i = 0; i < 20; ++i) {
    auto r = c.da().encrypt("v", 12);
    EXPECT_FALSE(r.existing);
    EXPECT_TRUE(orders.insert(r.y).second);
    EXPECT_TRUE(oope::testing::sandwich(st, do_key512(), r.y, 12));
    ASSERT_TRUE(r.c_min && r.c_max);
    EXPECT_LE(*r.c_min, r.y);
    EXPECT_GE(*r.c_max, r.y);
  }
  EXPECT_EQ(st.table.size(), 27u);
}

TEST(ProtocolFh, MinMaxMatchesOracle) {
  const ProtocolParams p = fh_params(ope::max_order_from_log2(40));
  Rng rng = Rng::from_seed(8, "fh-data");
  std::vector<uint64_t> data(50);
  for (auto& v : data) v = rng.below(16);
  auto st = build(data, p, true, 8);
  Cluster c({.params = p, .seed = 8}, do_key512(), nullptr, &da_key576());
  c.add_column("v", &st);
  for (int q = 0; q < 20; ++q) {
    const uint64_t x = rng.below(18);
    auto r = c.da().encrypt("v", x);
    const auto [lo, hi] = oope::testing::minmax_oracle(st, do_key512(), x, r.y);
    EXPECT_EQ(*r.c_min, lo) << x;
    EXPECT_EQ(*r.c_max, hi) << x;
    const auto& e = st.table.at(r.y);
    EXPECT_EQ(do_key512().decrypt(*e.fh_min), to_mpz(lo));
    EXPECT_EQ(do_key512().decrypt(*e.fh_max), to_mpz(hi));
    EXPECT_EQ(c.da().cleanup("v", {r.sid}), 1u);
  }
}

TEST(ProtocolFh, SharesCarryOnlyTheTraversalBit) {
  const ProtocolParams p = fh_params(ope::max_order_from_log2(32));
  int frames = 0;
  bool clean = true;
  ClusterOptions o{.params = p};
  o.wrap = [&](const std::string& name, std::unique_ptr<net::ByteStream> s) -> std::unique_ptr<net::ByteStream> {
    if (name != "da->csp" && name != "do->csp") return s;
    return std::make_unique<oope::testing::TapStream>(std::move(s), [&](Bytes& f) {
      if (oope::testing::frame_type(f) != net::MsgType::SHARES) return;
      ++frames;
      auto pl = oope::testing::frame_payload(f);
      clean = clean && pl.size() == 1 && (pl[0] & 0xfa) == 0;
    });
  };
  auto st = build({4, 4, 4, 8, 8, 1}, p, true, 9);
  Cluster c(o, do_key512(), nullptr, &da_key576());
  c.add_column("v", &st);
  c.da().encrypt("v", 4);
  c.da().encrypt("v", 6);
  c.shutdown();
  EXPECT_GT(frames, 0);
  EXPECT_TRUE(clean);
}

TEST(ProtocolFh, NarrowDaKeyRejected) {
  const ProtocolParams p = fh_params(Order(1000));
  EXPECT_THROW(Cluster({.params = p}, da_key576(), nullptr, &do_key512()), Error);
}

class ProtocolIntegrity : public ::testing::TestWithParam<integ::Scheme> {};

TEST_P(ProtocolIntegrity, HonestRoundsVerify) {
  ProtocolParams p = det_params(Order(28));
  p.integrity = GetParam();
  auto st = build({32, 20, 25, 69, 10}, p, false, 1, &oope::testing::mac_params());
  Cluster c({.params = p}, do_key512(), &oope::testing::mac_params());
  c.add_column("v", &st);
  auto r = c.da().encrypt("v", 15);
  EXPECT_EQ(r.y, Order(6));
  EXPECT_EQ(c.da().integrity_checks(), 3u);
  // The DA's upload carries a tag that later sessions verify.
  auto r2 = c.da().encrypt("v", 12);
  EXPECT_EQ(r2.y, Order(5));
  EXPECT_EQ(c.da().integrity_checks(), 3u + 4u);
}

TEST_P(ProtocolIntegrity, SubstitutionCaughtBeforeEvaluation) {
  ProtocolParams p = det_params(Order(28));
  p.integrity = GetParam();
  Rng rng = Rng::from_seed(31, "subst");
  auto st = build({32, 20, 25, 69, 10}, p, false, 1, &oope::testing::mac_params());
  const auto before = orders_of(st);
  std::atomic<int> target{-1};
  ClusterOptions o{.params = p};
  o.tamper = [&](RoundView& v) {
    if (static_cast<int>(v.round) == target.load()) {
      v.cipher = hom::encrypt(do_key512().public_key(), mpz_class(77), rng);
    }
  };
  Cluster c(o, do_key512(), &oope::testing::mac_params());
  c.add_column("v", &st);
  for (int round = 0; round < 3; ++round) {
    const uint64_t evals = c.da().evaluations();
    target = round;
    EXPECT_EQ(remote_reason([&] { c.da().encrypt("v", 15); }), Errc::integrity);
    EXPECT_EQ(c.da().evaluations() - evals, static_cast<uint64_t>(round));
    EXPECT_EQ(orders_of(st), before);
  }
  target = -1;
  EXPECT_EQ(c.da().encrypt("v", 15).y, Order(6));
}

INSTANTIATE_TEST_SUITE_P(Schemes, ProtocolIntegrity,
                         ::testing::Values(integ::Scheme::dlmac, integ::Scheme::pedersen),
                         [](const auto& info) { return std::string(integ::scheme_name(info.param)); });
