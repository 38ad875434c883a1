#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>

#include "janus/rng.hpp"

namespace janus::transport {

/// Deterministic sender-side loss injection, keyed on a fragment's global
/// sequence number.  Composable: a fragment is dropped if any enabled rule
/// matches.
struct LossShimSpec {
  std::unordered_set<std::uint64_t> drop_seqs;  // exact sequence numbers
  std::uint64_t drop_every = 0;                 // drop when seq % every == 0
  double drop_rate = 0.0;                       // Bernoulli(rate) per packet
  std::uint64_t seed = 0;                       // rng seed for drop_rate

  bool enabled() const {
    return !drop_seqs.empty() || drop_every > 0 || drop_rate > 0.0;
  }

  /// Parses "17,42,99" into drop_seqs.  Throws ConfigError on junk.
  static LossShimSpec from_list(const std::string& csv);
};

class LossShim {
 public:
  explicit LossShim(const LossShimSpec& spec)
      : spec_(spec), rng_(spec.seed) {}

  bool should_drop(std::uint64_t global_seq) {
    if (!spec_.drop_seqs.empty() &&
        spec_.drop_seqs.count(global_seq) != 0)
      return true;
    if (spec_.drop_every > 0 && global_seq % spec_.drop_every == 0)
      return true;
    if (spec_.drop_rate > 0.0 && rng_.uniform01() < spec_.drop_rate)
      return true;
    return false;
  }

 private:
  LossShimSpec spec_;
  Rng rng_;
};

}  // namespace janus::transport
