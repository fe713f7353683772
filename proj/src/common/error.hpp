#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oope {

// Numeric values are mirrored by the C API status codes in include/oope/oope.h.
enum class Errc : int {
  usage = 1,
  domain = 2,
  config = 3,
  protocol = 4,
  integrity = 5,
  handshake = 6,
  io = 7,
  capacity = 8,
  retryable = 9,
  aborted = 10,
  framing = 11,
  internal = 12,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

// Raised when the peer sent an ABORT frame instead of the expected message.
class RemoteAbort : public Error {
 public:
  RemoteAbort(Errc reason, const std::string& what) : Error(Errc::aborted, what), reason_(reason) {}
  Errc reason() const { return reason_; }

 private:
  Errc reason_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const char* msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace oope
