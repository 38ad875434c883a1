#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "janus/hierarchy.hpp"

namespace janus {

/// Loss-rate state for the Markov-modulated loss model: while visited, the
/// rate is drawn once from N(mean, stddev) clamped at zero.
struct LossStateSpec {
  double mean = 0.0;
  double stddev = 0.0;
};

struct LossModelSpec {
  enum class Type { static_rate, hmm };
  Type type = Type::static_rate;
  double lambda = 0.0;            // static loss rate, packets per second
  double transition_rate = 0.04;  // hmm: exponential holding rate
  std::vector<LossStateSpec> states;  // hmm states

  static LossModelSpec static_rate_of(double lambda);
  static LossModelSpec default_hmm(double transition_rate);
};

struct ProtocolSpec {
  enum class Type {
    tcp_baseline,
    udp_static_ec,
    adaptive_error_bound,
    adaptive_deadline,
  };
  Type type = Type::udp_static_ec;
  int m = 0;                     // uniform parity for udp_static_ec
  std::vector<int> m_vector;     // per-level parity (overrides m if set)
  bool retransmit = true;        // udp_static_ec: retransmit lost groups
  double error_bound = 0.0;      // adaptive_error_bound target
  double deadline_s = 0.0;       // adaptive_deadline budget
  double initial_lambda = 0.0;   // planning prior for adaptive senders

  std::string name() const;
};

/// Complete simulation input.  JSON-serializable; see README for the file
/// schema.
struct Scenario {
  static constexpr int kVersion = 1;

  int version = kVersion;
  HierarchySpec hierarchy;
  NetworkParams params;
  LossModelSpec loss;
  ProtocolSpec protocol;
  double receiver_window_s = 3.0;
  std::uint64_t event_cap = 50'000'000;
  std::vector<std::uint64_t> forced_drops;  // emission indices dropped once

  void validate() const;
  std::string to_json() const;
  static Scenario from_json(const std::string& text);
};

struct LambdaSample {
  double time_s = 0.0;
  double lambda_hat = 0.0;
};

/// Result of one simulated transfer.
struct SimReport {
  std::string protocol;
  std::uint64_t seed = 0;
  double total_time_s = 0.0;
  int rounds = 1;
  int levels_delivered = 0;
  double achieved_error_bound = 1.0;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_lost = 0;
  std::uint64_t packets_delivered = 0;
  std::uint64_t data_fragments_sent = 0;
  std::uint64_t parity_fragments_sent = 0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<LambdaSample> lambda_trace;
  std::vector<std::uint64_t> retransmitted_groups_per_round;
  std::vector<std::pair<int, std::uint64_t>> first_round_lost_groups;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Runs one deterministic virtual-time transfer.  The same (scenario, seed)
/// pair always produces a bit-identical report.
SimReport run_scenario(const Scenario& scenario, std::uint64_t seed);

}  // namespace janus
