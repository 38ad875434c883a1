#include "janus/transport/control.hpp"

#include <chrono>
#include <cstring>
#include <string>

#include "janus/errors.hpp"

namespace janus::transport {

namespace {
constexpr std::size_t kMaxFrame = 64u << 20;
}

void ControlChannel::send(const nlohmann::json& message) {
  const std::string body = message.dump();
  if (body.size() > kMaxFrame) throw Error("control frame too large");
  std::vector<std::uint8_t> frame(4 + body.size());
  const auto len = static_cast<std::uint32_t>(body.size());
  frame[0] = static_cast<std::uint8_t>(len >> 24);
  frame[1] = static_cast<std::uint8_t>(len >> 16);
  frame[2] = static_cast<std::uint8_t>(len >> 8);
  frame[3] = static_cast<std::uint8_t>(len);
  std::memcpy(frame.data() + 4, body.data(), body.size());
  stream_.write_all(frame.data(), frame.size());
}

std::optional<nlohmann::json> ControlChannel::receive(int timeout_ms) {
  using clock = std::chrono::steady_clock;
  const bool bounded = timeout_ms >= 0;
  const auto deadline = clock::now() + std::chrono::milliseconds(
                                           bounded ? timeout_ms : 0);
  std::uint8_t chunk[4096];
  for (;;) {
    if (buffer_.size() >= 4) {
      const std::size_t len = (static_cast<std::size_t>(buffer_[0]) << 24) |
                              (static_cast<std::size_t>(buffer_[1]) << 16) |
                              (static_cast<std::size_t>(buffer_[2]) << 8) |
                              static_cast<std::size_t>(buffer_[3]);
      if (len > kMaxFrame)
        throw TransferAbortedError("oversized control frame");
      if (buffer_.size() >= 4 + len) {
        const std::string body(buffer_.begin() + 4,
                               buffer_.begin() + 4 + len);
        buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + len);
        try {
          return nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
          throw TransferAbortedError("malformed control message");
        }
      }
    }
    int wait_ms = -1;
    if (bounded) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - clock::now())
                            .count();
      if (left < 0) return std::nullopt;
      wait_ms = static_cast<int>(left);
    }
    const int got = stream_.read_some(chunk, sizeof(chunk), wait_ms);
    if (got == 0) throw TransferAbortedError("control channel closed");
    if (got < 0) return std::nullopt;
    buffer_.insert(buffer_.end(), chunk, chunk + got);
  }
}

}  // namespace janus::transport
