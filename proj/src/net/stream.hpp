#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>

namespace oope::net {

using Millis = std::chrono::milliseconds;

// Reliable ordered byte stream. read_some returns 0 only at end of stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write_all(std::span<const uint8_t> data) = 0;
  virtual size_t read_some(std::span<uint8_t> out) = 0;
  virtual void close() = 0;
};

// Two connected in-memory endpoints. Reads block up to `timeout` and then raise an
// io error, so a wedged test fails instead of hanging.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> loopback_pair(Millis timeout = Millis(120000));

class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  std::unique_ptr<ByteStream> accept(Millis timeout, Millis io_timeout = Millis(120000));
  // Null on timeout instead of an error. io_timeout 0 disables the read timeout.
  std::unique_ptr<ByteStream> try_accept(Millis timeout, Millis io_timeout = Millis(120000));
  void close();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// Retries refused connections until `timeout` elapses (peers may still be starting).
std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port, Millis timeout,
                                        Millis io_timeout = Millis(120000));

// "host:port" -> parts. Usage error when malformed.
std::pair<std::string, uint16_t> parse_address(const std::string& addr);

}  // namespace oope::net
