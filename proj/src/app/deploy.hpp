#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "proto/roles.hpp"
#include "store/bridge.hpp"

// The three roles as separate TCP services. The CSP listens for the DO and for DAs
// on one port; the DO dials the CSP and listens for DA links.
namespace oope::app {

struct CspServerConfig {
  proto::ProtocolParams params;
  std::string listen = "127.0.0.1:7001";
  std::filesystem::path db_dir;
  hom::PublicKey do_pk;
  bool allow_rebalance = true;
  uint64_t seed = 0;  // 0: OS randomness
  net::Millis da_idle_timeout{600000};
  net::Millis do_wait{30000};  // how long a DA connection waits for the DO to appear
};

class CspServer {
 public:
  // Loads the database and binds the port. Config error when the stored tables do
  // not match the parameters or the DO key.
  explicit CspServer(CspServerConfig cfg);
  ~CspServer();
  CspServer(const CspServer&) = delete;
  CspServer& operator=(const CspServer&) = delete;

  uint16_t port() const { return listener_.port(); }
  // Accepts connections until stop().
  void run();
  void stop();

  store::Store& store() { return *store_; }
  proto::Stats& stats() { return stats_; }

 private:
  void serve_connection(std::unique_ptr<net::ByteStream> s);

  CspServerConfig cfg_;
  proto::Stats stats_;
  std::unique_ptr<store::Store> store_;
  std::unique_ptr<proto::CspEngine> engine_;
  net::TcpListener listener_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::condition_variable cv_;
  std::unique_ptr<net::Channel> do_ch_;
  std::vector<std::thread> conns_;
  std::vector<net::Channel*> open_;
  bool rows_dirty_ = false;
};

struct DoDaemonConfig {
  proto::ProtocolParams params;
  std::string listen = "127.0.0.1:7002";
  std::string csp = "127.0.0.1:7001";
  std::filesystem::path owner_file;  // optional; follows rebalances
  uint64_t seed = 0;
  net::Millis connect_timeout{30000};
  net::Millis da_idle_timeout{600000};
};

class DoDaemon {
 public:
  DoDaemon(DoDaemonConfig cfg, hom::PrivateKey sk, std::optional<integ::MacParams> mac);
  ~DoDaemon();
  DoDaemon(const DoDaemon&) = delete;
  DoDaemon& operator=(const DoDaemon&) = delete;

  uint16_t port() const { return listener_.port(); }
  // Connects to the CSP and serves until the CSP goes away or stop().
  void run();
  void stop();

 private:
  void accept_loop();

  DoDaemonConfig cfg_;
  hom::PrivateKey sk_;
  std::optional<integ::MacParams> mac_;
  proto::Stats stats_;
  std::unique_ptr<proto::DoEngine> engine_;
  net::TcpListener listener_;
  std::unique_ptr<net::Channel> csp_;
  std::unique_ptr<proto::DoServer> server_;
  std::optional<store::OwnerFile> owner_;
  std::mutex mu_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
};

struct DaConnectConfig {
  proto::ProtocolParams params;
  std::string csp = "127.0.0.1:7001";
  std::string do_addr = "127.0.0.1:7002";
  uint64_t seed = 0;
  net::Millis connect_timeout{10000};
  net::Millis io_timeout{120000};
  std::optional<hom::KeyId> expect_do_key;  // refuse a DO with another key
};

// One DA connection to both servers.
class DaSession {
 public:
  DaSession(DaConnectConfig cfg, const hom::PrivateKey* da_sk = nullptr);
  ~DaSession();

  proto::DaClient& client() { return *client_; }
  const hom::PublicKey& do_public_key() const { return link_->do_pk; }
  const proto::ProtocolParams& params() const { return cfg_.params; }
  void close();

 private:
  DaConnectConfig cfg_;
  std::unique_ptr<net::Channel> csp_;
  std::unique_ptr<proto::DaLink> link_;
  std::unique_ptr<proto::DaClient> client_;
};

}  // namespace oope::app
