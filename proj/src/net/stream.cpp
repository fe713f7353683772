#include "net/stream.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "common/error.hpp"

namespace oope::net {

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<uint8_t> buf;
  bool closed = false;
};

class LoopbackStream : public ByteStream {
 public:
  LoopbackStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out, Millis timeout)
      : in_(std::move(in)), out_(std::move(out)), timeout_(timeout) {}
  ~LoopbackStream() override { close(); }

  void write_all(std::span<const uint8_t> data) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) fail(Errc::io, "loopback peer closed");
    out_->buf.insert(out_->buf.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  size_t read_some(std::span<uint8_t> out) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout_, [&] { return !in_->buf.empty() || in_->closed; })) {
      fail(Errc::io, "loopback read timed out");
    }
    size_t n = std::min(out.size(), in_->buf.size());
    std::copy_n(in_->buf.begin(), n, out.begin());
    in_->buf.erase(in_->buf.begin(), in_->buf.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_, out_;
  Millis timeout_;
};

[[noreturn]] void sys_fail(const std::string& what) { fail(Errc::io, what + ": " + std::strerror(errno)); }

void set_io_timeout(int fd, Millis t) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(t.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream() override { close(); }

  void write_all(std::span<const uint8_t> data) override {
    while (!data.empty()) {
      ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        sys_fail("tcp send");
      }
      data = data.subspan(static_cast<size_t>(n));
    }
  }

  size_t read_some(std::span<uint8_t> out) override {
    for (;;) {
      ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
      if (n >= 0) return static_cast<size_t>(n);
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) fail(Errc::io, "tcp read timed out");
      sys_fail("tcp recv");
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

addrinfo* resolve(const std::string& host, uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string p = std::to_string(port);
  int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), p.c_str(), &hints, &res);
  if (rc != 0) fail(Errc::io, "cannot resolve " + host + ": " + gai_strerror(rc));
  return res;
}

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> loopback_pair(Millis timeout) {
  auto a = std::make_shared<Pipe>();
  auto b = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackStream>(a, b, timeout), std::make_unique<LoopbackStream>(b, a, timeout)};
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  addrinfo* res = resolve(host, port, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    freeaddrinfo(res);
    sys_fail("socket");
  }
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    freeaddrinfo(res);
    int e = errno;
    ::close(fd_);
    errno = e;
    sys_fail("bind " + host + ":" + std::to_string(port));
  }
  freeaddrinfo(res);
  if (::listen(fd_, 16) != 0) sys_fail("listen");
  sockaddr_in sa{};
  socklen_t len = sizeof(sa);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<ByteStream> TcpListener::accept(Millis timeout, Millis io_timeout) {
  pollfd p{fd_, POLLIN, 0};
  int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc == 0) fail(Errc::io, "timed out waiting for a connection");
  if (rc < 0) sys_fail("poll");
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) sys_fail("accept");
  set_io_timeout(fd, io_timeout);
  return std::make_unique<TcpStream>(fd);
}

std::unique_ptr<ByteStream> TcpListener::try_accept(Millis timeout, Millis io_timeout) {
  pollfd p{fd_, POLLIN, 0};
  int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc == 0) return nullptr;
  if (rc < 0) {
    if (errno == EINTR) return nullptr;
    sys_fail("poll");
  }
  return accept(Millis(0), io_timeout);
}

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port, Millis timeout, Millis io_timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    addrinfo* res = resolve(host, port, false);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      freeaddrinfo(res);
      sys_fail("socket");
    }
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    int err = errno;
    freeaddrinfo(res);
    if (rc == 0) {
      set_io_timeout(fd, io_timeout);
      return std::make_unique<TcpStream>(fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      errno = err;
      sys_fail("connect " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(Millis(50));
  }
}

std::pair<std::string, uint16_t> parse_address(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) fail(Errc::usage, "address '" + addr + "' is not host:port");
  std::string host = addr.substr(0, colon);
  unsigned long port = 0;
  try {
    size_t used = 0;
    port = std::stoul(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(Errc::usage, "address '" + addr + "' has an invalid port");
  }
  if (port > 65535) fail(Errc::usage, "address '" + addr + "' has an invalid port");
  return {host, static_cast<uint16_t>(port)};
}

}  // namespace oope::net
