#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace janus::transport {

struct RecvConfig {
  std::uint16_t control_port = 0;
  std::uint16_t udp_port = 0;  // 0 picks an ephemeral port
  std::string outdir;          // empty keeps payloads in memory only
  double window_s = 1.0;       // cadence of observed-loss-rate reports
  double accept_timeout_s = 30.0;
  double idle_timeout_s = 20.0;
  std::uint64_t max_level_bytes = 1ull << 32;  // refuse larger announcements
  // When set, receives the bound control port before accept() blocks;
  // lets a sender in another thread discover an ephemeral port.
  std::atomic<int>* control_port_out = nullptr;
};

struct RecvResult {
  int levels_expected = 0;
  int levels_complete = 0;
  bool complete = false;
  bool checksums_ok = true;
  double achieved_error_bound = 1.0;
  double elapsed_s = 0.0;
  std::uint64_t datagrams_received = 0;
  std::uint64_t duplicate_fragments = 0;
  std::uint64_t decoded_groups = 0;  // groups that needed parity to finish
  std::uint64_t bytes_written = 0;
  std::string close_status;
  std::vector<std::string> files;

  std::string to_json() const;
};

/// Runs one receiving session: accepts a sender on the control port, takes
/// fragments over UDP, requests retransmissions, reassembles levels, and
/// (when `outdir` is set) writes `level-<i>.bin` files plus a receipt.
/// Throws TransferAbortedError on timeouts, DecodeError when a checksum
/// fails.
RecvResult run_receiver(const RecvConfig& config);

}  // namespace janus::transport
