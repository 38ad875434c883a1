#include "janus/hierarchy.hpp"

#include <algorithm>
#include <cmath>

#include "janus/errors.hpp"

namespace janus {

std::uint64_t HierarchySpec::total_bytes(int l) const {
  if (l < 0 || l > level_count()) throw ShapeError("level prefix out of range");
  std::uint64_t sum = 0;
  for (int i = 0; i < l; ++i) sum += levels[i].size_bytes;
  return sum;
}

void HierarchySpec::validate() const {
  if (levels.empty()) throw ShapeError("hierarchy has no levels");
  double prev = 1.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = levels[i];
    if (lv.size_bytes == 0) throw ConfigError("level size must be positive");
    if (!(lv.error_bound > 0.0) || lv.error_bound > 1.0)
      throw ConfigError("error bounds must lie in (0, 1]");
    if (i > 0 && !(lv.error_bound < prev))
      throw ConfigError("error bounds must be strictly decreasing");
    prev = lv.error_bound;
  }
}

HierarchySpec HierarchySpec::scaled(double divisor) const {
  if (!(divisor > 0.0)) throw ConfigError("scale divisor must be positive");
  HierarchySpec out = *this;
  for (auto& lv : out.levels) {
    const double scaled =
        std::round(static_cast<double>(lv.size_bytes) / divisor);
    lv.size_bytes = scaled < 1.0 ? 1 : static_cast<std::uint64_t>(scaled);
  }
  return out;
}

double NetworkParams::effective_rate() const {
  return std::min(ec_rate, link_rate);
}

void NetworkParams::validate() const {
  if (!(latency_s >= 0.0)) throw ConfigError("latency must be non-negative");
  if (!(link_rate > 0.0) || !(ec_rate > 0.0))
    throw ConfigError("rates must be positive");
  if (fragment_size == 0) throw ConfigError("fragment size must be positive");
  if (group_size < 2 || group_size > 255)
    throw ConfigError("group size must lie in [2, 255]");
}

double relative_linf_error(std::span<const double> reference,
                           std::span<const double> candidate) {
  if (reference.size() != candidate.size())
    throw ShapeError("array length mismatch");
  if (reference.empty()) throw ShapeError("empty input arrays");
  double max_abs = 0.0;
  double max_diff = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    max_abs = std::max(max_abs, std::fabs(reference[i]));
    max_diff = std::max(max_diff, std::fabs(reference[i] - candidate[i]));
  }
  if (max_abs == 0.0) throw ConfigError("reference array is identically zero");
  return max_diff / max_abs;
}

int required_levels(const HierarchySpec& hierarchy, double target) {
  hierarchy.validate();
  if (!(target > 0.0)) throw ConfigError("target bound must be positive");
  for (int l = 1; l <= hierarchy.level_count(); ++l) {
    if (hierarchy.levels[l - 1].error_bound <= target) return l;
  }
  throw UnsatisfiableBoundError("requested bound tighter than final level");
}

std::uint64_t group_count(std::uint64_t size_bytes, std::uint32_t group_size,
                          int parity, std::uint32_t fragment_size) {
  const int data_fragments = static_cast<int>(group_size) - parity;
  if (parity < 0 || data_fragments <= 0)
    throw ConfigError("parity count out of range");
  const std::uint64_t chunk =
      static_cast<std::uint64_t>(data_fragments) * fragment_size;
  return (size_bytes + chunk - 1) / chunk;
}

std::uint64_t CodingPlan::total_groups() const {
  std::uint64_t sum = 0;
  for (auto g : group_counts) sum += g;
  return sum;
}

}  // namespace janus
