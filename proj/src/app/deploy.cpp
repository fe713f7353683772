#include "app/deploy.hpp"

#include <shared_mutex>

#include "app/files.hpp"
#include "common/log.hpp"

namespace oope::app {

namespace {

const SessionId kNoSession{};

net::TcpListener listen_on(const std::string& addr) {
  auto [host, port] = net::parse_address(addr);
  return net::TcpListener(host, port);
}

std::unique_ptr<net::ByteStream> dial(const std::string& addr, net::Millis timeout, net::Millis io_timeout) {
  auto [host, port] = net::parse_address(addr);
  return net::tcp_connect(host, port, timeout, io_timeout);
}

}  // namespace

CspServer::CspServer(CspServerConfig cfg) : cfg_(std::move(cfg)), listener_(listen_on(cfg_.listen)) {
  cfg_.params.validate();
  store_ = std::make_unique<store::Store>(store::load_database(cfg_.db_dir));
  for (const auto& [name, h] : store_->db().headers) {
    if (h.key_id != cfg_.do_pk.id()) fail(Errc::config, "column " + name + " is encrypted under another DO key");
    if (h.integrity != cfg_.params.integrity) {
      fail(Errc::config, "column " + name + " was ingested with integrity " +
                             std::string(integ::scheme_name(h.integrity)));
    }
  }
  proto::CspConfig cc;
  cc.params = cfg_.params;
  cc.allow_rebalance = cfg_.allow_rebalance;
  cc.stats = &stats_;
  engine_ = std::make_unique<proto::CspEngine>(cc, cfg_.do_pk, make_rng(cfg_.seed, "csp"));
  store::attach(*engine_, *store_);
  engine_->on_remap = [this](const std::string& column, const ope::Remap& remap) {
    store_->apply_remap(column, remap);
    rows_dirty_ = true;
  };
  engine_->on_commit = [this](const std::string& column) {
    std::shared_lock lock(store_->mutex());
    store::save_column(cfg_.db_dir, store_->db(), column);
    if (rows_dirty_) {
      store::save_rows(cfg_.db_dir, store_->db());
      rows_dirty_ = false;
    }
  };
}

CspServer::~CspServer() { stop(); }

void CspServer::run() {
  log_info("csp: listening on port " + std::to_string(port()));
  while (!stopping_) {
    std::unique_ptr<net::ByteStream> s;
    try {
      s = listener_.try_accept(net::Millis(200), cfg_.da_idle_timeout);
    } catch (const Error& e) {
      if (stopping_) break;
      throw;
    }
    if (!s) continue;
    std::lock_guard lock(mu_);
    conns_.emplace_back([this, st = std::move(s)]() mutable { serve_connection(std::move(st)); });
  }
}

void CspServer::serve_connection(std::unique_ptr<net::ByteStream> s) {
  auto ch = std::make_unique<net::Channel>(std::move(s), "csp<-peer");
  try {
    const net::Role peer =
        net::handshake_any(*ch, net::Role::csp, {net::Role::do_, net::Role::da}, cfg_.params.digest());
    if (peer == net::Role::do_) {
      std::lock_guard lock(mu_);
      if (do_ch_) {
        ch->send_abort(kNoSession, Errc::protocol, "a DO is already connected");
        return;
      }
      do_ch_ = std::move(ch);
      cv_.notify_all();
      log_info("csp: DO connected");
      return;
    }
    net::Channel* do_ch = nullptr;
    {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, cfg_.do_wait, [&] { return do_ch_ || stopping_; });
      if (!do_ch_ || stopping_) {
        ch->send_abort(kNoSession, Errc::retryable, "no DO is connected to the CSP");
        return;
      }
      do_ch = do_ch_.get();
      open_.push_back(ch.get());
    }
    engine_->serve_da(*ch, *do_ch);
  } catch (const std::exception& e) {
    log_warn(std::string("csp: connection ended: ") + e.what());
  }
  std::lock_guard lock(mu_);
  std::erase(open_, ch.get());
}

void CspServer::stop() {
  if (stopping_.exchange(true)) return;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (auto* c : open_) c->close();
    if (do_ch_) do_ch_->close();
    cv_.notify_all();
    threads.swap(conns_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
  listener_.close();
}

DoDaemon::DoDaemon(DoDaemonConfig cfg, hom::PrivateKey sk, std::optional<integ::MacParams> mac)
    : cfg_(std::move(cfg)), sk_(std::move(sk)), mac_(std::move(mac)), listener_(listen_on(cfg_.listen)) {
  cfg_.params.validate();
  if (!cfg_.owner_file.empty() && std::filesystem::exists(cfg_.owner_file)) {
    owner_ = store::load_owner(cfg_.owner_file);
  }
  engine_ = std::make_unique<proto::DoEngine>(proto::DoConfig{cfg_.params, &stats_}, sk_, make_rng(cfg_.seed, "do"),
                                              mac_ ? &*mac_ : nullptr);
  engine_->on_remap = [this](const std::string& column, const ope::Remap& remap) {
    std::lock_guard lock(mu_);
    if (!owner_) return;
    auto it = owner_->columns.find(column);
    if (it == owner_->columns.end()) return;
    it->second.apply(remap);
    store::save_owner(cfg_.owner_file, *owner_);
  };
}

DoDaemon::~DoDaemon() { stop(); }

void DoDaemon::run() {
  // The CSP link stays open between sessions, so it has no read timeout.
  csp_ = std::make_unique<net::Channel>(dial(cfg_.csp, cfg_.connect_timeout, net::Millis(0)), "do->csp");
  net::handshake(*csp_, net::Role::do_, net::Role::csp, cfg_.params.digest());
  server_ = std::make_unique<proto::DoServer>(*engine_, *csp_);
  log_info("do: connected to the CSP, listening on port " + std::to_string(port()));
  acceptor_ = std::thread([this] { accept_loop(); });
  try {
    server_->serve();
  } catch (const std::exception& e) {
    log_warn(std::string("do: CSP link ended: ") + e.what());
  }
  stop();
}

void DoDaemon::accept_loop() {
  while (!stopping_) {
    std::unique_ptr<net::ByteStream> s;
    try {
      s = listener_.try_accept(net::Millis(200), cfg_.da_idle_timeout);
      if (!s) continue;
      auto link = engine_->accept_link(std::make_unique<net::Channel>(std::move(s), "do<-da"));
      server_->attach(std::move(link));
    } catch (const std::exception& e) {
      if (stopping_) break;
      log_warn(std::string("do: DA link setup failed: ") + e.what());
    }
  }
}

void DoDaemon::stop() {
  if (stopping_.exchange(true)) return;
  if (csp_) csp_->close();
  if (acceptor_.joinable()) acceptor_.join();
  if (server_) server_->stop();
  listener_.close();
}

DaSession::DaSession(DaConnectConfig cfg, const hom::PrivateKey* da_sk) : cfg_(std::move(cfg)) {
  cfg_.params.validate();
  csp_ = std::make_unique<net::Channel>(dial(cfg_.csp, cfg_.connect_timeout, cfg_.io_timeout), "da->csp");
  net::handshake(*csp_, net::Role::da, net::Role::csp, cfg_.params.digest());
  Rng rng = make_rng(cfg_.seed, "da");
  Rng link_rng = rng.fork("link");
  link_ = proto::open_do_link(
      std::make_unique<net::Channel>(dial(cfg_.do_addr, cfg_.connect_timeout, cfg_.io_timeout), "da->do"),
      cfg_.params, link_rng);
  if (cfg_.expect_do_key && link_->do_pk.id() != *cfg_.expect_do_key) {
    fail(Errc::handshake, "the DO presented a different public key");
  }
  client_ = std::make_unique<proto::DaClient>(proto::DaConfig{cfg_.params}, *csp_, *link_, std::move(rng), da_sk);
}

DaSession::~DaSession() { close(); }

void DaSession::close() {
  client_.reset();
  if (link_) link_->ch->close();
  if (csp_) csp_->close();
}

}  // namespace oope::app
