#include "janus/transport/wire.hpp"

#include <cstring>

namespace janus::transport {

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  put_u32(p, static_cast<std::uint32_t>(v >> 32));
  put_u32(p + 4, static_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return (static_cast<std::uint64_t>(get_u32(p)) << 32) | get_u32(p + 4);
}

}  // namespace

void encode_header(const FragmentHeader& h, std::uint8_t* out) {
  std::memcpy(out, kMagic, 4);
  out[4] = h.msg_type;
  out[5] = h.level;
  put_u32(out + 6, h.ftg_index);
  out[10] = h.fragment_index;
  out[11] = h.k;
  out[12] = h.m;
  put_u64(out + 13, h.global_seq);
  out[21] = static_cast<std::uint8_t>(h.payload_len >> 8);
  out[22] = static_cast<std::uint8_t>(h.payload_len);
}

std::optional<FragmentHeader> decode_header(const std::uint8_t* buf,
                                            std::size_t len) {
  if (len < kHeaderSize) return std::nullopt;
  if (std::memcmp(buf, kMagic, 4) != 0) return std::nullopt;
  FragmentHeader h;
  h.msg_type = buf[4];
  h.level = buf[5];
  h.ftg_index = get_u32(buf + 6);
  h.fragment_index = buf[10];
  h.k = buf[11];
  h.m = buf[12];
  h.global_seq = get_u64(buf + 13);
  h.payload_len = static_cast<std::uint16_t>(
      (static_cast<std::uint16_t>(buf[21]) << 8) | buf[22]);
  if (kHeaderSize + h.payload_len != len) return std::nullopt;
  return h;
}

}  // namespace janus::transport
