#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "janus/hierarchy.hpp"

namespace janus {

enum class LossRegime { low, high };

/// Regime dispatch: the high-loss closed form applies when the expected
/// number of losses per group, lambda * n / r, strictly exceeds one.
LossRegime classify_regime(const NetworkParams& params, double loss_rate);

/// Number of fragments in flight during one group window:
/// u = floor(r * t) + n - 1.
int fragments_in_flight(const NetworkParams& params);

/// Duration of one group window: T = t + (n - 1) / r.
double round_window_s(const NetworkParams& params);

/// Low-regime probability that a group is unrecoverable with m parity
/// fragments: Poisson(lambda * T) losses placed hypergeometrically among
/// the u in-flight fragments, more than m of them hitting the group.
double p_unrecoverable_low(const NetworkParams& params, double loss_rate,
                           int parity);

/// High-regime probability: upper Poisson tail with mean lambda * n / r.
double p_unrecoverable_high(const NetworkParams& params, double loss_rate,
                            int parity);

struct Unrecoverability {
  double p = 0.0;
  LossRegime regime = LossRegime::low;
};

/// Regime-dispatched per-group unrecoverability probability.
Unrecoverability p_unrecoverable(const NetworkParams& params, double loss_rate,
                                 int parity);

/// Caches the loss-placement tables for one set of network parameters so
/// the adaptive planners can re-evaluate probabilities cheaply as the
/// observed loss rate changes.  Falls back to direct evaluation when the
/// in-flight window is too large to tabulate.
class UnrecoverabilityEvaluator {
 public:
  explicit UnrecoverabilityEvaluator(const NetworkParams& params);

  Unrecoverability operator()(double loss_rate, int parity) const;
  const NetworkParams& params() const { return params_; }

 private:
  NetworkParams params_;
  int u_ = 0;
  int half_ = 0;
  bool tabulated_ = false;
  std::vector<double> placement_tail_;  // [j * (half_+1) + m]
};

struct TimeEstimate {
  double expected_total_s = 0.0;
  int retransmission_terms = 0;  // series terms before truncation
  double p = 0.0;                // per-group unrecoverability used
  LossRegime regime = LossRegime::low;
};

/// Expected total transfer time for `total_bytes` sent as groups of n
/// fragments with m parity each, including the expected retransmission
/// rounds.  The series is truncated when a round's occurrence probability
/// drops below 1e-12, or after 200 terms.  Throws DivergenceError when the
/// per-group failure probability reaches one.
TimeEstimate expected_total_time(std::uint64_t total_bytes,
                                 const NetworkParams& params, double loss_rate,
                                 int parity,
                                 const UnrecoverabilityEvaluator* cache =
                                     nullptr);

struct MinTimePlan {
  int parity = 0;
  TimeEstimate estimate;
};

/// Scans m in {0..n/2} and returns the allocation minimizing the expected
/// total time; ties break toward smaller m.
MinTimePlan optimize_parity_for_min_time(std::uint64_t total_bytes,
                                         const NetworkParams& params,
                                         double loss_rate,
                                         const UnrecoverabilityEvaluator*
                                             cache = nullptr);

/// Deterministic single-pass transfer time for the given per-level group
/// counts: t + (n * sum(N_i) - 1) / r.
double deterministic_total_time(std::span<const std::uint64_t> group_counts,
                                const NetworkParams& params);

struct ErrorOutcome {
  double bound = 0.0;       // reconstruction bound achieved in this outcome
  double probability = 0.0;
};

struct ErrorEstimate {
  double expected_error = 0.0;
  std::vector<ErrorOutcome> outcomes;  // partition; probabilities sum to 1
};

/// Outcome-weighted expected reconstruction bound when sending the first
/// `parity.size()` levels of the hierarchy without retransmission.  The
/// outcome space partitions on the first level containing an unrecoverable
/// group (failing level 1 leaves no reconstruction: bound 1).
ErrorEstimate expected_error(const HierarchySpec& hierarchy,
                             const NetworkParams& params, double loss_rate,
                             std::span<const int> parity);

/// Level counts whose zero-parity schedule fits within the deadline.
/// The result is always a prefix {1, .., l_max}; empty when even one level
/// cannot be sent in time.
std::vector<int> feasible_level_counts(const HierarchySpec& hierarchy,
                                       const NetworkParams& params,
                                       double deadline_s);

enum class SolverMode { automatic, coordinate_descent, enumerate_all };

struct MinErrorPlan {
  std::vector<int> parity;
  std::vector<std::uint64_t> group_counts;
  double expected_error = 0.0;
  double planned_time_s = 0.0;
};

/// Minimizes the expected reconstruction bound over per-level parity
/// allocations m_i in {0..n/2} for a fixed number of levels `l`, subject to
/// the single-pass schedule fitting within the deadline.  `automatic` uses
/// exhaustive enumeration while (n/2+1)^l <= 1e6 and multi-start coordinate
/// descent (with pairwise reallocation polish) beyond that.  Ties break
/// toward larger total parity (the more protective allocation — relevant
/// when a near-zero loss estimate makes the objective indifferent), then
/// lexicographically.  `prior_bound` is
/// the bound already banked before these levels (1 when nothing was
/// delivered; used when re-planning a partially sent transfer).  Throws
/// InfeasibleDeadlineError when even the all-zero allocation does not fit.
MinErrorPlan solve_min_error_for_levels(
    const HierarchySpec& hierarchy, int l, const NetworkParams& params,
    double loss_rate, double deadline_s,
    SolverMode mode = SolverMode::automatic,
    const UnrecoverabilityEvaluator* cache = nullptr,
    double prior_bound = 1.0);

struct DeadlinePlan {
  int levels_sent = 0;
  MinErrorPlan plan;
};

/// Full deadline planner: evaluates every feasible level count and returns
/// the allocation with the smallest expected bound.
DeadlinePlan optimize_parity_for_min_error(
    const HierarchySpec& hierarchy, const NetworkParams& params,
    double loss_rate, double deadline_s,
    SolverMode mode = SolverMode::automatic,
    const UnrecoverabilityEvaluator* cache = nullptr);

/// Largest total group budget whose single-pass schedule meets the
/// deadline, i.e. max B with t + (n*B - 1) / r <= deadline; -1 when none.
std::int64_t group_budget(const NetworkParams& params, double deadline_s);

}  // namespace janus
