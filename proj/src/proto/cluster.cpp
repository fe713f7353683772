#include "proto/cluster.hpp"

#include <exception>

#include "common/log.hpp"

namespace oope::proto {

namespace {

struct StreamPair {
  std::unique_ptr<net::ByteStream> a, b;
};

StreamPair connect_pair(bool tcp, net::Millis io_timeout) {
  if (!tcp) {
    auto [a, b] = net::loopback_pair(io_timeout);
    return {std::move(a), std::move(b)};
  }
  net::TcpListener listener("127.0.0.1", 0);
  auto b = net::tcp_connect("127.0.0.1", listener.port(), net::Millis(5000), io_timeout);
  auto a = listener.accept(net::Millis(5000), io_timeout);
  return {std::move(a), std::move(b)};
}

// Runs `side` on a helper thread and `main` here; rethrows the first failure.
template <class F, class G>
void both(F&& side, G&& main) {
  std::exception_ptr err;
  std::thread t([&] {
    try {
      side();
    } catch (...) {
      err = std::current_exception();
    }
  });
  try {
    main();
  } catch (...) {
    t.join();
    throw;
  }
  t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

Cluster::Cluster(ClusterOptions opts, const hom::PrivateKey& do_sk, const integ::MacParams* mac,
                 const hom::PrivateKey* da_sk)
    : opts_(std::move(opts)) {
  const ProtocolParams& P = opts_.params;
  P.validate();
  const Clock* clock = opts_.clock ? opts_.clock : &steady_clock();
  net::Transcript* tr = opts_.record ? &transcript_ : nullptr;
  Rng root = Rng::from_seed(opts_.seed, "cluster");
  Rng csp_rng = root.fork("csp");
  Rng do_rng = root.fork("do");
  Rng da_rng = root.fork("da");
  Rng da_link_rng = da_rng.fork("link");

  CspConfig cc;
  cc.params = P;
  cc.allow_rebalance = opts_.allow_rebalance;
  cc.stats = &stats_;
  cc.clock = clock;
  cc.tamper = opts_.tamper;
  csp_ = std::make_unique<CspEngine>(cc, do_sk.public_key(), std::move(csp_rng), opts_.csp_pool);
  do_ = std::make_unique<DoEngine>(DoConfig{P, &stats_, clock}, do_sk, std::move(do_rng), mac);

  auto cd = connect_pair(opts_.tcp, opts_.io_timeout);
  auto ca = connect_pair(opts_.tcp, opts_.io_timeout);
  auto dd = connect_pair(opts_.tcp, opts_.io_timeout);
  auto channel = [&](std::unique_ptr<net::ByteStream> s, const std::string& name) {
    if (opts_.wrap) s = opts_.wrap(name, std::move(s));
    return std::make_unique<net::Channel>(std::move(s), name, tr);
  };
  csp_do_ = channel(std::move(cd.a), "csp->do");
  do_csp_ = channel(std::move(cd.b), "do->csp");
  csp_da_ = channel(std::move(ca.a), "csp->da");
  da_csp_ = channel(std::move(ca.b), "da->csp");
  auto do_da = channel(std::move(dd.a), "do->da");
  auto da_do = channel(std::move(dd.b), "da->do");

  const Digest digest = P.digest();
  both([&] { net::handshake(*do_csp_, net::Role::do_, net::Role::csp, digest); },
       [&] { net::handshake(*csp_do_, net::Role::csp, net::Role::do_, digest); });
  both([&] { net::handshake(*da_csp_, net::Role::da, net::Role::csp, digest); },
       [&] { net::handshake(*csp_da_, net::Role::csp, net::Role::da, digest); });
  std::unique_ptr<DoLink> do_link;
  both([&] { do_link = do_->accept_link(std::move(do_da)); },
       [&] { da_link_ = open_do_link(std::move(da_do), P, da_link_rng); });

  do_server_ = std::make_unique<DoServer>(*do_, *do_csp_);
  do_server_->attach(std::move(do_link));
  da_ = std::make_unique<DaClient>(DaConfig{P, &stats_, clock, opts_.da_pool}, *da_csp_, *da_link_, std::move(da_rng), da_sk);

  do_thread_ = std::thread([this] {
    try {
      do_server_->serve();
    } catch (const std::exception& e) {
      log_warn(std::string("DO loop stopped: ") + e.what());
    }
  });
  csp_thread_ = std::thread([this] {
    try {
      csp_->serve_da(*csp_da_, *csp_do_);
    } catch (const std::exception& e) {
      log_warn(std::string("CSP loop stopped: ") + e.what());
    }
  });
}

void Cluster::add_column(const std::string& name, ope::ServerState* state) { csp_->add_column(name, state); }

void Cluster::shutdown() {
  if (down_) return;
  down_ = true;
  da_csp_->close();
  if (csp_thread_.joinable()) csp_thread_.join();
  csp_do_->close();
  if (do_thread_.joinable()) do_thread_.join();
  do_server_->stop();
  da_link_->ch->close();
  do_server_.reset();
}

Cluster::~Cluster() { shutdown(); }

}  // namespace oope::proto
