#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "janus/manifest.hpp"
#include "janus/simulator.hpp"
#include "janus/transport/shim.hpp"

namespace janus::transport {

struct SendConfig {
  std::string host = "127.0.0.1";
  std::uint16_t control_port = 0;
  NetworkParams params;
  ProtocolSpec protocol;  // tcp_baseline is simulation-only and rejected here
  LossShimSpec shim;
  double connect_timeout_s = 10.0;
  double ack_timeout_s = 30.0;
  int max_rounds = 64;
};

struct SendResult {
  bool complete = false;
  int levels_sent = 0;
  int levels_delivered = 0;
  int rounds = 1;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_suppressed = 0;  // dropped by the loss shim
  std::uint64_t data_fragments = 0;
  std::uint64_t parity_fragments = 0;
  double elapsed_s = 0.0;
  double achieved_error_bound = 1.0;
  std::vector<LambdaSample> lambda_updates;

  std::string to_json() const;
};

/// Runs one sending session against a listening receiver.  `levels` holds
/// the payload of every hierarchy level, aligned with `manifest.levels`.
/// Throws TransferAbortedError when the peer vanishes or the round cap is
/// exhausted, ConfigError for bad configuration.
SendResult run_sender(const Manifest& manifest,
                      const std::vector<std::vector<std::uint8_t>>& levels,
                      const SendConfig& config);

}  // namespace janus::transport
