#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sedro/error.hpp"
#include "sedro/protocol.hpp"

namespace sedro::net {

/// No data within the allotted wall time.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

/// The peer closed the connection.
class ClosedError : public IoError {
 public:
  using IoError::IoError;
};

/// Byte stream over a pair of file descriptors (a socket uses the same fd twice).
class Stream {
 public:
  Stream() = default;
  Stream(int in_fd, int out_fd, bool owned);
  Stream(Stream&& other) noexcept;
  Stream& operator=(Stream&& other) noexcept;
  Stream(const Stream&) = delete;
  Stream& operator=(const Stream&) = delete;
  ~Stream();

  void write_all(std::span<const std::uint8_t> data);
  /// Fills `out` completely. timeout_ms < 0 waits forever.
  void read_exact(std::span<std::uint8_t> out, int timeout_ms);
  bool is_open() const { return in_ >= 0; }
  void close();

 private:
  int in_ = -1;
  int out_ = -1;
  bool owned_ = false;
  bool socket_ = false;
};

void write_frame(Stream& s, const proto::Frame& frame);
/// Reads one frame. ClosedError on a clean end of stream before the header.
proto::Frame read_frame(Stream& s, int timeout_ms);

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};
/// "host:port"; throws ValidationError("listen", ...) otherwise.
Address parse_address(const std::string& text);

class Listener {
 public:
  static Listener bind(const Address& addr);
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  ~Listener();

  std::uint16_t port() const { return port_; }
  /// Waits for one connection; nullopt on timeout.
  std::optional<Stream> accept(int timeout_ms);

 private:
  Listener() = default;
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

Stream connect_tcp(const Address& addr, int timeout_ms);

/// This process's stdin/stdout.
Stream stdio_stream();

/// Child process talking the protocol over its stdin/stdout.
class Subprocess {
 public:
  /// argv[0] is looked up on PATH.
  static Subprocess spawn(const std::vector<std::string>& argv);
  Subprocess(Subprocess&& other) noexcept;
  Subprocess(const Subprocess&) = delete;
  ~Subprocess();

  Stream& stream() { return stream_; }
  /// Closes the pipes and reaps the child; returns its exit status (-1 if killed).
  int wait();

 private:
  Subprocess() = default;
  int pid_ = -1;
  Stream stream_;
};

/// Splits a command line on whitespace (no quoting).
std::vector<std::string> split_command(const std::string& cmd);

}  // namespace sedro::net
