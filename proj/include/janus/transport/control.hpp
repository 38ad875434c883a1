#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "janus/transport/socket.hpp"

namespace janus::transport {

/// Reliable control channel: length-prefixed JSON messages over TCP.
/// Each frame is a 4-byte big-endian payload length followed by UTF-8 JSON.
class ControlChannel {
 public:
  ControlChannel() = default;
  explicit ControlChannel(TcpStream stream) : stream_(std::move(stream)) {}

  void send(const nlohmann::json& message);

  /// Waits up to `timeout_ms` for one complete frame (-1 blocks forever).
  /// Returns std::nullopt on timeout; throws TransferAbortedError when the
  /// peer closes the stream or sends a malformed frame.
  std::optional<nlohmann::json> receive(int timeout_ms);

  bool valid() const { return stream_.valid(); }
  int fd() const { return stream_.fd(); }

 private:
  TcpStream stream_;
  std::vector<std::uint8_t> buffer_;
};

}  // namespace janus::transport
