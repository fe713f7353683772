#pragma once

#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "proto/roles.hpp"

namespace oope::proto {

// The three roles wired together inside one process, over loopback pipes or TCP on
// 127.0.0.1. Used by tests, the benchmark harness and the acceptance checks.
struct ClusterOptions {
  ProtocolParams params;
  bool tcp = false;
  uint64_t seed = 1;
  bool record = false;  // keep per-channel transcripts
  net::Millis io_timeout{120000};
  bool allow_rebalance = true;
  TamperHook tamper{};
  const Clock* clock = nullptr;
  hom::RandomnessPool* csp_pool = nullptr;
  hom::RandomnessPool* da_pool = nullptr;
  // Fault injection: wraps the stream a named endpoint ("da->csp", ...) writes to.
  std::function<std::unique_ptr<net::ByteStream>(const std::string&, std::unique_ptr<net::ByteStream>)> wrap{};
};

class Cluster {
 public:
  // Keys and parameters are borrowed and must outlive the cluster. `da_sk` is needed
  // in FH mode only.
  Cluster(ClusterOptions opts, const hom::PrivateKey& do_sk, const integ::MacParams* mac = nullptr,
          const hom::PrivateKey* da_sk = nullptr);
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  // Columns must be registered before the first session.
  void add_column(const std::string& name, ope::ServerState* state);

  DaClient& da() { return *da_; }
  CspEngine& csp() { return *csp_; }
  DoEngine& do_engine() { return *do_; }
  Stats& stats() { return stats_; }
  const net::Transcript& transcript() const { return transcript_; }

  void shutdown();

 private:
  ClusterOptions opts_;
  Stats stats_;
  net::Transcript transcript_;
  std::unique_ptr<CspEngine> csp_;
  std::unique_ptr<DoEngine> do_;
  std::unique_ptr<DoServer> do_server_;
  std::unique_ptr<net::Channel> csp_do_, do_csp_, csp_da_, da_csp_;
  std::unique_ptr<DaLink> da_link_;
  std::unique_ptr<DaClient> da_;
  std::thread csp_thread_, do_thread_;
  bool down_ = false;
};

}  // namespace oope::proto
