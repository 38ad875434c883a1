#include "janus/transport/socket.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "janus/errors.hpp"

namespace janus::transport {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(what + ": " + std::strerror(errno));
}

sockaddr_in local_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const char* ip = host.empty() ? "127.0.0.1" : host.c_str();
  if (::inet_pton(AF_INET, ip, &addr.sin_addr) != 1)
    throw ConfigError("invalid IPv4 address: " + host);
  return addr;
}

std::uint16_t port_of(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
    throw_errno("getsockname");
  return ntohs(addr.sin_port);
}

}  // namespace

void Fd::reset() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool wait_readable(int fd, int timeout_ms) {
  pollfd pfd{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc > 0) return (pfd.revents & (POLLIN | POLLHUP | POLLERR)) != 0;
    if (rc == 0) return false;
    if (errno != EINTR) throw_errno("poll");
  }
}

UdpSocket UdpSocket::open() {
  int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw_errno("socket(udp)");
  UdpSocket s;
  s.fd_ = Fd(fd);
  return s;
}

UdpSocket UdpSocket::bind_local(std::uint16_t port) {
  UdpSocket s = open();
  sockaddr_in addr = local_addr("127.0.0.1", port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw_errno("bind(udp)");
  return s;
}

std::uint16_t UdpSocket::local_port() const { return port_of(fd()); }

void UdpSocket::set_receive_buffer(int bytes) {
  ::setsockopt(fd(), SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes));
}

void UdpSocket::send_to(const std::string& host, std::uint16_t port,
                        const std::uint8_t* data, std::size_t len) {
  sockaddr_in addr = local_addr(host, port);
  for (;;) {
    const ssize_t rc =
        ::sendto(fd(), data, len, 0, reinterpret_cast<sockaddr*>(&addr),
                 sizeof(addr));
    if (rc >= 0) return;
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == ENOBUFS) {
      std::this_thread::sleep_for(std::chrono::microseconds(200));
      continue;
    }
    throw_errno("sendto");
  }
}

int UdpSocket::recv(std::uint8_t* buf, std::size_t cap, int timeout_ms) {
  if (!wait_readable(fd(), timeout_ms)) return -1;
  for (;;) {
    const ssize_t rc = ::recvfrom(fd(), buf, cap, 0, nullptr, nullptr);
    if (rc >= 0) return static_cast<int>(rc);
    if (errno == EINTR) continue;
    if (errno == EAGAIN) return -1;
    throw_errno("recvfrom");
  }
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port,
                             int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(timeout_ms);
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket(tcp)");
    sockaddr_in addr = local_addr(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return TcpStream(Fd(fd));
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline)
      throw TransferAbortedError("control connect timed out");
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
}

void TcpStream::write_all(const std::uint8_t* data, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t rc = ::send(fd(), data + off, len - off, MSG_NOSIGNAL);
    if (rc > 0) {
      off += static_cast<std::size_t>(rc);
      continue;
    }
    if (rc < 0 && errno == EINTR) continue;
    throw TransferAbortedError("control channel closed while writing");
  }
}

int TcpStream::read_some(std::uint8_t* buf, std::size_t cap, int timeout_ms) {
  if (!wait_readable(fd(), timeout_ms)) return -1;
  for (;;) {
    const ssize_t rc = ::recv(fd(), buf, cap, 0);
    if (rc >= 0) return static_cast<int>(rc);
    if (errno == EINTR) continue;
    throw_errno("recv(tcp)");
  }
}

TcpListener TcpListener::bind_local(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket(tcp)");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = local_addr("127.0.0.1", port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw_errno("bind(tcp)");
  }
  if (::listen(fd, 1) != 0) {
    ::close(fd);
    throw_errno("listen");
  }
  TcpListener l;
  l.fd_ = Fd(fd);
  return l;
}

std::uint16_t TcpListener::local_port() const { return port_of(fd()); }

TcpStream TcpListener::accept(int timeout_ms) {
  if (!wait_readable(fd(), timeout_ms))
    throw TransferAbortedError("no sender connected before timeout");
  const int conn = ::accept(fd(), nullptr, nullptr);
  if (conn < 0) throw_errno("accept");
  int one = 1;
  ::setsockopt(conn, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return TcpStream(Fd(conn));
}

}  // namespace janus::transport
