#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace janus::transport {

/// Thin RAII wrapper over a POSIX file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset();

 private:
  int fd_ = -1;
};

/// Blocks until the descriptor is readable or `timeout_ms` elapses.
/// Returns true when readable.  A negative timeout waits indefinitely.
bool wait_readable(int fd, int timeout_ms);

class UdpSocket {
 public:
  UdpSocket() = default;

  /// Binds to 127.0.0.1:`port` (0 picks an ephemeral port).
  static UdpSocket bind_local(std::uint16_t port);
  /// Unbound socket for sending only.
  static UdpSocket open();

  std::uint16_t local_port() const;
  void set_receive_buffer(int bytes);

  void send_to(const std::string& host, std::uint16_t port,
               const std::uint8_t* data, std::size_t len);
  /// Receives one datagram; returns its size or -1 on timeout.
  int recv(std::uint8_t* buf, std::size_t cap, int timeout_ms);

  int fd() const { return fd_.get(); }

 private:
  Fd fd_;
};

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(Fd fd) : fd_(std::move(fd)) {}

  /// Connects to 127.0.0.1-style `host`:`port`, retrying until
  /// `timeout_ms` elapses (the peer may not be listening yet).
  static TcpStream connect(const std::string& host, std::uint16_t port,
                           int timeout_ms);

  void write_all(const std::uint8_t* data, std::size_t len);
  /// Reads up to `cap` bytes; returns 0 on orderly shutdown, -1 on timeout.
  int read_some(std::uint8_t* buf, std::size_t cap, int timeout_ms);

  bool valid() const { return fd_.valid(); }
  int fd() const { return fd_.get(); }

 private:
  Fd fd_;
};

class TcpListener {
 public:
  TcpListener() = default;

  static TcpListener bind_local(std::uint16_t port);
  std::uint16_t local_port() const;
  /// Accepts one connection; throws TransferAbortedError on timeout.
  TcpStream accept(int timeout_ms);

  int fd() const { return fd_.get(); }

 private:
  Fd fd_;
};

}  // namespace janus::transport
