#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace janus {

/// One refinement level of a progressively refactored dataset.  Receiving
/// levels 1..i of the hierarchy guarantees a relative L-infinity
/// reconstruction error of at most `error_bound` of level i.
struct LevelSpec {
  std::uint64_t size_bytes = 0;
  double error_bound = 0.0;
};

/// An ordered list of levels with strictly decreasing error bounds.
struct HierarchySpec {
  std::vector<LevelSpec> levels;

  int level_count() const { return static_cast<int>(levels.size()); }

  /// Sum of the first `l` level sizes (l <= level_count).
  std::uint64_t total_bytes(int l) const;
  std::uint64_t total_bytes() const { return total_bytes(level_count()); }

  /// Throws ShapeError / ConfigError when empty, zero-sized, or when the
  /// error bounds are not strictly decreasing in (0, 1].
  void validate() const;

  /// Returns a copy with every level size divided by `divisor` (rounded to
  /// nearest, minimum one byte).  Used to derive desk-scale test inputs.
  HierarchySpec scaled(double divisor) const;
};

/// Link and coding parameters shared across the planner, the simulator and
/// the transport.
struct NetworkParams {
  double latency_s = 0.01;      // one-way packet latency t
  double link_rate = 19144.0;   // link capacity, fragments per second
  double ec_rate = 19144.0;     // parity generation rate, fragments per second
  std::uint32_t fragment_size = 4096;  // payload bytes per fragment (s)
  std::uint32_t group_size = 32;       // fragments per group (n)

  /// Effective send rate r = min(ec_rate, link_rate).
  double effective_rate() const;

  /// Throws ConfigError on non-positive rates/sizes or group_size > 255.
  void validate() const;
};

/// Relative L-infinity error between a reference array and a degraded
/// reconstruction: max|a-b| / max|a|.  Throws ShapeError on length mismatch
/// or empty input, ConfigError when the reference is all zero.
double relative_linf_error(std::span<const double> reference,
                           std::span<const double> candidate);

/// Smallest number of leading levels whose bound satisfies `target`.
/// Throws UnsatisfiableBoundError when even the full hierarchy is too
/// coarse.
int required_levels(const HierarchySpec& hierarchy, double target);

/// Number of groups needed for `size_bytes` data at k = n - m data
/// fragments of `fragment_size` bytes per group (ceiling division).
std::uint64_t group_count(std::uint64_t size_bytes, std::uint32_t group_size,
                          int parity, std::uint32_t fragment_size);

/// Selected parity allocation for a transfer: how many levels to send and
/// how much parity to attach per level.
struct CodingPlan {
  int levels_sent = 0;
  std::vector<int> parity;                 // per level, size levels_sent
  std::vector<std::uint64_t> group_counts; // per level, size levels_sent
  double effective_rate = 0.0;

  std::uint64_t total_groups() const;
};

}  // namespace janus
