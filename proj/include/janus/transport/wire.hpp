#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

namespace janus::transport {

/// Fixed-size header carried in front of every UDP datagram payload.
/// All multi-byte fields are big-endian.
///
///   offset  size  field
///   0       4     magic "JNS1"
///   4       1     msg_type
///   5       1     level (0-based)
///   6       4     ftg_index
///   10      1     fragment_index (0..k+m-1; >= k means parity)
///   11      1     k
///   12      1     m
///   13      8     global_seq
///   21      2     payload_len
constexpr std::size_t kHeaderSize = 23;
constexpr std::uint8_t kMagic[4] = {'J', 'N', 'S', '1'};

enum class MsgType : std::uint8_t {
  fragment = 1,
};

struct FragmentHeader {
  std::uint8_t msg_type = static_cast<std::uint8_t>(MsgType::fragment);
  std::uint8_t level = 0;
  std::uint32_t ftg_index = 0;
  std::uint8_t fragment_index = 0;
  std::uint8_t k = 0;
  std::uint8_t m = 0;
  std::uint64_t global_seq = 0;
  std::uint16_t payload_len = 0;
};

/// Writes exactly kHeaderSize bytes to `out`.
void encode_header(const FragmentHeader& header, std::uint8_t* out);

/// Returns std::nullopt when the buffer is short, the magic does not match,
/// or the declared payload length disagrees with the datagram size.
std::optional<FragmentHeader> decode_header(const std::uint8_t* buf,
                                            std::size_t len);

}  // namespace janus::transport
