#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "circuits/circuit.hpp"
#include "circuits/ot.hpp"
#include "net/channel.hpp"
#include "ope/state.hpp"
#include "proto/params.hpp"
#include "proto/wire.hpp"

namespace oope::proto {

// DO end of a DO-DA link: the OT-extension sender state survives across sessions.
struct DoLink {
  std::unique_ptr<net::Channel> ch;
  std::unique_ptr<gc::OtExtSender> ot;
};

// DA end: OT-extension receiver plus what the DO announced at link setup.
struct DaLink {
  std::unique_ptr<net::Channel> ch;
  std::unique_ptr<gc::OtExtReceiver> ot;
  hom::PublicKey do_pk;
  integ::Scheme scheme = integ::Scheme::off;
  integ::MacParams params;
};

// Link setup after the transport connected: handshake, 128 base OTs, then LINK_INFO
// from DO to DA.
std::unique_ptr<DoLink> accept_da_link(std::unique_ptr<net::Channel> ch, const ProtocolParams& params,
                                       const hom::PublicKey& do_pk, const integ::MacParams* mac, Rng& rng);
std::unique_ptr<DaLink> open_do_link(std::unique_ptr<net::Channel> ch, const ProtocolParams& params, Rng& rng);

// What an instrumented CSP may rewrite before a round's messages go out.
struct RoundView {
  uint32_t round = 0;
  Order order;
  hom::Ciphertext cipher;
  integ::NodeTag tag;
};
using TamperHook = std::function<void(RoundView&)>;

struct CspConfig {
  ProtocolParams params;
  bool allow_rebalance = true;  // deterministic mode; FH sessions never rebalance
  Stats* stats = nullptr;
  const Clock* clock = &steady_clock();
  TamperHook tamper;
};

struct CspSessionRecord {
  SessionId sid{};
  std::string column;
  uint32_t h = 0;
  uint32_t rounds = 0;
  Order y;
  bool existing = false;
  bool rebalanced = false;
};

class CspEngine {
 public:
  CspEngine(CspConfig cfg, hom::PublicKey do_pk, Rng rng, hom::RandomnessPool* pool = nullptr);

  // Columns are owned by the caller and must outlive the engine.
  void add_column(const std::string& name, ope::ServerState* state);
  ope::ServerState& column(const std::string& name);

  // Host hooks: persistence after a committed mutation, query execution, and an
  // admission check that sees the per-connection session count (rate limiting).
  std::function<void(const std::string& column)> on_commit;
  // Runs at commit when an insertion rebalanced the column, before on_commit.
  std::function<void(const std::string& column, const ope::Remap& remap)> on_remap;
  std::function<Bytes(std::span<const uint8_t> body)> on_query;
  std::function<bool(const std::string& peer, uint64_t sessions)> admit;

  // Serves one DA connection until it closes. Sessions from different connections
  // are serialized.
  void serve_da(net::Channel& da, net::Channel& do_ch);
  void handle(net::Channel& da, net::Channel& do_ch, const net::Frame& request);

  std::optional<CspSessionRecord> last_session() const;
  const CspConfig& config() const { return cfg_; }

 private:
  void run_encrypt(net::Channel& da, net::Channel& do_ch, const SessionId& sid, const SessionRequest& req);
  void run_cleanup(net::Channel& da, const SessionId& sid, const SessionRequest& req);

  CspConfig cfg_;
  hom::PublicKey do_pk_;
  Rng rng_;
  hom::RandomnessPool* pool_;
  std::map<std::string, ope::ServerState*> columns_;
  std::mutex session_mu_;
  mutable std::mutex record_mu_;
  std::optional<CspSessionRecord> last_;
};

struct DoConfig {
  ProtocolParams params;
  Stats* stats = nullptr;
  const Clock* clock = &steady_clock();
};

class DoEngine {
 public:
  DoEngine(DoConfig cfg, const hom::PrivateKey& sk, Rng rng, const integ::MacParams* mac = nullptr);

  // Called with the CSP's remap after a rebalance, so the owner state can follow.
  std::function<void(const std::string& column, const ope::Remap& remap)> on_remap;

  std::unique_ptr<DoLink> accept_link(std::unique_ptr<net::Channel> ch);
  void run_session(net::Channel& csp, DoLink& da, const SessionId& sid, const SessionStart& start,
                   const SessionJoin& join);

  const hom::PrivateKey& key() const { return sk_; }

 private:
  DoConfig cfg_;
  const hom::PrivateKey& sk_;
  Rng rng_;
  const integ::MacParams* mac_;
  gc::Circuit circuit_;
  std::mutex link_mu_;
  Rng link_rng_;  // link setup may run on an acceptor thread
};

// Runs the DO daemon loop: takes SESSION_START frames from the CSP and pairs each
// with the DA link that announced the same session id.
class DoServer {
 public:
  DoServer(DoEngine& engine, net::Channel& csp, std::chrono::milliseconds join_timeout = std::chrono::seconds(30));
  ~DoServer();

  // Takes ownership; a reader thread waits for the link's SESSION_JOIN frames.
  void attach(std::unique_ptr<DoLink> link);
  // Returns when the CSP channel closes.
  void serve();
  void stop();

 private:
  struct Slot;
  void reader(std::shared_ptr<Slot> slot);
  void release(const SessionId& sid);

  DoEngine& engine_;
  net::Channel& csp_;
  std::chrono::milliseconds join_timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<SessionId, std::shared_ptr<Slot>> joined_;
  std::vector<std::shared_ptr<Slot>> slots_;
  std::vector<std::thread> readers_;
  bool stopping_ = false;
};

struct EncryptResult {
  SessionId sid{};
  Order y;
  uint32_t h = 0;
  uint32_t rounds = 0;
  bool existing = false;
  bool rebalanced = false;
  // FH mode: c_min and c_max of the value.
  std::optional<Order> c_min;
  std::optional<Order> c_max;
};

struct DaConfig {
  ProtocolParams params;
  Stats* stats = nullptr;
  const Clock* clock = &steady_clock();
  hom::RandomnessPool* pool = nullptr;  // randomizers for uploads under the DO key
};

class DaClient {
 public:
  // `da_sk` is required in FH mode; its modulus must exceed the DO's.
  DaClient(DaConfig cfg, net::Channel& csp, DaLink& link, Rng rng, const hom::PrivateKey* da_sk = nullptr);

  EncryptResult encrypt(const std::string& column, uint64_t x);
  Bytes query(std::span<const uint8_t> body);
  // Removes the entries inserted by the given sessions; returns the number removed.
  uint64_t cleanup(const std::string& column, const std::vector<SessionId>& sids);

  uint64_t integrity_checks() const { return integrity_checks_; }
  uint64_t evaluations() const { return evaluations_; }

 private:
  SessionId new_session();

  DaConfig cfg_;
  net::Channel& csp_;
  DaLink& link_;
  Rng rng_;
  const hom::PrivateKey* da_sk_;
  gc::Circuit circuit_;
  uint64_t integrity_checks_ = 0;
  uint64_t evaluations_ = 0;
};

Bytes encode_cleanup(const std::string& column, const std::vector<SessionId>& sids);

}  // namespace oope::proto
