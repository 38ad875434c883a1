#include "janus/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "janus/errors.hpp"
#include "janus/rng.hpp"

namespace janus {

namespace {

double log_choose(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void check_parity(const NetworkParams& params, int parity) {
  const int n = static_cast<int>(params.group_size);
  if (parity < 0 || parity > n / 2)
    throw ConfigError("parity must lie in [0, n/2]");
}

void check_rate(double loss_rate) {
  if (!(loss_rate >= 0.0)) throw ConfigError("loss rate must be non-negative");
}

}  // namespace

LossRegime classify_regime(const NetworkParams& params, double loss_rate) {
  params.validate();
  check_rate(loss_rate);
  const double per_group =
      loss_rate * params.group_size / params.effective_rate();
  return per_group > 1.0 ? LossRegime::high : LossRegime::low;
}

int fragments_in_flight(const NetworkParams& params) {
  params.validate();
  const double r = params.effective_rate();
  return static_cast<int>(std::floor(r * params.latency_s)) +
         static_cast<int>(params.group_size) - 1;
}

double round_window_s(const NetworkParams& params) {
  params.validate();
  return params.latency_s +
         (params.group_size - 1.0) / params.effective_rate();
}

double p_unrecoverable_low(const NetworkParams& params, double loss_rate,
                           int parity) {
  params.validate();
  check_rate(loss_rate);
  check_parity(params, parity);
  if (loss_rate == 0.0) return 0.0;

  const int n = static_cast<int>(params.group_size);
  const int u = fragments_in_flight(params);
  const int m = parity;
  const double lam_T = loss_rate * round_window_s(params);

  // Poisson mass is negligible outside a wide window around the mean.
  const double sigma = std::sqrt(lam_T);
  const int j_lo = std::max(m + 1,
                            static_cast<int>(std::floor(lam_T - 14 * sigma)) - 20);
  const int j_hi = std::min<int>(
      u, static_cast<int>(std::ceil(lam_T + 14 * sigma)) + 40);

  const double log_lam_T = std::log(lam_T);
  double total = 0.0;
  for (int j = j_lo; j <= j_hi; ++j) {
    const double log_pois = j * log_lam_T - lam_T - std::lgamma(j + 1.0);
    if (log_pois < -745.0) continue;
    // P(hypergeometric(u, n, j) >= m+1)
    double tail = 0.0;
    const int w_lo = std::max(m + 1, j - (u - n));
    const int w_hi = std::min(n, j);
    const double log_denom = log_choose(u, j);
    for (int w = w_lo; w <= w_hi; ++w) {
      tail += std::exp(log_choose(n, w) + log_choose(u - n, j - w) - log_denom);
    }
    total += std::exp(log_pois) * std::min(tail, 1.0);
  }
  return std::clamp(total, 0.0, 1.0);
}

double p_unrecoverable_high(const NetworkParams& params, double loss_rate,
                            int parity) {
  params.validate();
  check_rate(loss_rate);
  check_parity(params, parity);
  const double mu =
      loss_rate * params.group_size / params.effective_rate();
  if (mu == 0.0) return 0.0;

  const int m = parity;
  const double log_first =
      (m + 1) * std::log(mu) - mu - std::lgamma(m + 2.0);
  if (log_first >= -700.0) {
    // Sum the upper tail directly for full relative precision.
    double term = std::exp(log_first);
    double acc = term;
    for (int j = m + 2; j < m + 2 + 100000; ++j) {
      term *= mu / j;
      acc += term;
      if (term < acc * 1e-18 && j > mu) break;
    }
    return std::clamp(acc, 0.0, 1.0);
  }
  if (mu > m + 1.0) {
    // Tail carries nearly all the mass; complement of the tiny lower CDF.
    double term = std::exp(-mu);
    double cdf = term;
    for (int j = 1; j <= m; ++j) {
      term *= mu / j;
      cdf += term;
    }
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  return 0.0;  // first tail term underflows below double range
}

Unrecoverability p_unrecoverable(const NetworkParams& params, double loss_rate,
                                 int parity) {
  const LossRegime regime = classify_regime(params, loss_rate);
  const double p = regime == LossRegime::high
                       ? p_unrecoverable_high(params, loss_rate, parity)
                       : p_unrecoverable_low(params, loss_rate, parity);
  return {p, regime};
}

UnrecoverabilityEvaluator::UnrecoverabilityEvaluator(
    const NetworkParams& params)
    : params_(params) {
  params_.validate();
  u_ = fragments_in_flight(params_);
  half_ = static_cast<int>(params_.group_size) / 2;
  if (static_cast<std::int64_t>(u_) * (half_ + 1) > 8'000'000) return;

  // placement_tail_[j][m] = P(hypergeometric(u, n, j) >= m+1)
  const int n = static_cast<int>(params_.group_size);
  placement_tail_.assign(static_cast<std::size_t>(u_ + 1) * (half_ + 1), 0.0);
  for (int j = 1; j <= u_; ++j) {
    const double log_denom = log_choose(u_, j);
    const int w_hi = std::min(n, j);
    const int w_lo = std::max(0, j - (u_ - n));
    // pmf over w, then suffix sums give every tail at once
    std::vector<double> pmf(w_hi + 1, 0.0);
    for (int w = w_lo; w <= w_hi; ++w)
      pmf[w] =
          std::exp(log_choose(n, w) + log_choose(u_ - n, j - w) - log_denom);
    double tail = 0.0;
    std::vector<double> tails(w_hi + 2, 0.0);
    for (int w = w_hi; w >= 0; --w) {
      tail += w >= w_lo ? pmf[w] : 0.0;
      tails[w] = tail;
    }
    for (int m = 0; m <= half_; ++m) {
      const int thr = m + 1;
      placement_tail_[static_cast<std::size_t>(j) * (half_ + 1) + m] =
          thr <= w_hi ? std::min(tails[thr], 1.0) : 0.0;
    }
  }
  tabulated_ = true;
}

Unrecoverability UnrecoverabilityEvaluator::operator()(double loss_rate,
                                                       int parity) const {
  check_rate(loss_rate);
  check_parity(params_, parity);
  const LossRegime regime = classify_regime(params_, loss_rate);
  if (regime == LossRegime::high)
    return {p_unrecoverable_high(params_, loss_rate, parity), regime};
  if (!tabulated_ || loss_rate == 0.0)
    return {p_unrecoverable_low(params_, loss_rate, parity), regime};

  const double lam_T = loss_rate * round_window_s(params_);
  const double sigma = std::sqrt(lam_T);
  const int j_lo = std::max(
      parity + 1, static_cast<int>(std::floor(lam_T - 14 * sigma)) - 20);
  const int j_hi = std::min<int>(
      u_, static_cast<int>(std::ceil(lam_T + 14 * sigma)) + 40);
  const double log_lam_T = std::log(lam_T);
  double total = 0.0;
  for (int j = j_lo; j <= j_hi; ++j) {
    const double log_pois = j * log_lam_T - lam_T - std::lgamma(j + 1.0);
    if (log_pois < -745.0) continue;
    total += std::exp(log_pois) *
             placement_tail_[static_cast<std::size_t>(j) * (half_ + 1) +
                             parity];
  }
  return {std::clamp(total, 0.0, 1.0), regime};
}

TimeEstimate expected_total_time(std::uint64_t total_bytes,
                                 const NetworkParams& params, double loss_rate,
                                 int parity,
                                 const UnrecoverabilityEvaluator* cache) {
  params.validate();
  check_parity(params, parity);
  if (total_bytes == 0) throw ConfigError("total size must be positive");

  const auto [p, regime] = cache ? (*cache)(loss_rate, parity)
                                 : p_unrecoverable(params, loss_rate, parity);
  if (p >= 1.0)
    throw DivergenceError("per-group failure probability reached 1");

  const int n = static_cast<int>(params.group_size);
  const double r = params.effective_rate();
  const double t = params.latency_s;
  const std::uint64_t N = group_count(total_bytes, params.group_size, parity,
                                      params.fragment_size);
  const double Nd = static_cast<double>(N);

  TimeEstimate est;
  est.p = p;
  est.regime = regime;
  est.expected_total_s = t + (n * Nd - 1.0) / r;
  if (p <= 0.0) return est;

  const double log_q = std::log1p(-p);
  double p_pow = 1.0;  // p^(i-1)
  for (int i = 1; i <= 200; ++i) {
    const double occur = -std::expm1(Nd * p_pow * log_q);
    if (occur < 1e-12) break;
    p_pow *= p;  // now p^i
    est.expected_total_s += occur * (t + (n * Nd * p_pow - 1.0) / r);
    est.retransmission_terms = i;
  }
  return est;
}

MinTimePlan optimize_parity_for_min_time(std::uint64_t total_bytes,
                                         const NetworkParams& params,
                                         double loss_rate,
                                         const UnrecoverabilityEvaluator*
                                             cache) {
  params.validate();
  MinTimePlan best;
  bool have = false;
  for (int m = 0; m <= static_cast<int>(params.group_size) / 2; ++m) {
    TimeEstimate est;
    try {
      est = expected_total_time(total_bytes, params, loss_rate, m, cache);
    } catch (const DivergenceError&) {
      continue;  // this allocation never completes; skip it
    }
    if (!have || est.expected_total_s < best.estimate.expected_total_s) {
      best = {m, est};
      have = true;
    }
  }
  if (!have) throw DivergenceError("no parity allocation converges");
  return best;
}

double deterministic_total_time(std::span<const std::uint64_t> group_counts,
                                const NetworkParams& params) {
  params.validate();
  std::uint64_t total = 0;
  for (auto g : group_counts) total += g;
  return params.latency_s +
         (static_cast<double>(params.group_size) * static_cast<double>(total) -
          1.0) /
             params.effective_rate();
}

ErrorEstimate expected_error(const HierarchySpec& hierarchy,
                             const NetworkParams& params, double loss_rate,
                             std::span<const int> parity) {
  hierarchy.validate();
  params.validate();
  const int l = static_cast<int>(parity.size());
  if (l < 1 || l > hierarchy.level_count())
    throw ShapeError("parity vector length must be 1..level count");

  // p depends on m only; cache across levels.
  const int half = static_cast<int>(params.group_size) / 2;
  std::vector<double> p_cache(half + 1, -1.0);
  auto p_of = [&](int m) {
    if (p_cache[m] < 0.0) p_cache[m] = p_unrecoverable(params, loss_rate, m).p;
    return p_cache[m];
  };

  ErrorEstimate est;
  est.outcomes.reserve(l + 1);
  double prefix = 1.0;
  for (int i = 0; i < l; ++i) {
    const double p = p_of(parity[i]);
    const std::uint64_t N =
        group_count(hierarchy.levels[i].size_bytes, params.group_size,
                    parity[i], params.fragment_size);
    const double survive =
        p >= 1.0 ? 0.0 : std::exp(static_cast<double>(N) * std::log1p(-p));
    const double bound = i == 0 ? 1.0 : hierarchy.levels[i - 1].error_bound;
    const double prob = prefix * (1.0 - survive);
    est.outcomes.push_back({bound, prob});
    est.expected_error += prob * bound;
    prefix *= survive;
  }
  const double final_bound = hierarchy.levels[l - 1].error_bound;
  est.outcomes.push_back({final_bound, prefix});
  est.expected_error += prefix * final_bound;
  return est;
}

std::int64_t group_budget(const NetworkParams& params, double deadline_s) {
  params.validate();
  if (!(deadline_s > 0.0)) throw ConfigError("deadline must be positive");
  const double raw = ((deadline_s - params.latency_s) *
                      params.effective_rate() + 1.0) /
                     params.group_size;
  if (raw < 1.0) return -1;
  return static_cast<std::int64_t>(std::floor(raw));
}

std::vector<int> feasible_level_counts(const HierarchySpec& hierarchy,
                                       const NetworkParams& params,
                                       double deadline_s) {
  hierarchy.validate();
  const std::int64_t budget = group_budget(params, deadline_s);
  std::vector<int> out;
  std::int64_t acc = 0;
  for (int l = 1; l <= hierarchy.level_count(); ++l) {
    acc += static_cast<std::int64_t>(
        group_count(hierarchy.levels[l - 1].size_bytes, params.group_size, 0,
                    params.fragment_size));
    if (budget >= 0 && acc <= budget)
      out.push_back(l);
    else
      break;
  }
  return out;
}

namespace {

/// Shared state for the fixed-level deadline solver.
struct MinErrorContext {
  int l = 0;
  int half = 0;
  std::int64_t budget = 0;
  std::vector<std::vector<std::int64_t>> groups;   // [level][m]
  std::vector<std::vector<double>> log_survive;    // [level][m] = N*log1p(-p)
  std::vector<double> bounds;                      // bounds[i]: outcome value
  double final_bound = 0.0;

  std::int64_t total_groups(std::span<const int> m) const {
    std::int64_t acc = 0;
    for (int i = 0; i < l; ++i) acc += groups[i][m[i]];
    return acc;
  }

  bool feasible(std::span<const int> m) const {
    return total_groups(m) <= budget;
  }

  double objective(std::span<const int> m) const {
    double total = 0.0;
    double prefix = 1.0;
    for (int i = 0; i < l; ++i) {
      const double survive = std::exp(log_survive[i][m[i]]);
      total += prefix * (1.0 - survive) * bounds[i];
      prefix *= survive;
    }
    return total + prefix * final_bound;
  }
};

struct Candidate {
  double obj = std::numeric_limits<double>::infinity();
  long long parity_sum = std::numeric_limits<long long>::max();
  std::vector<int> m;

  bool better_than(const Candidate& other) const {
    if (obj != other.obj) return obj < other.obj;
    // When the objective cannot distinguish allocations (e.g. a vanishing
    // loss estimate drives every unrecoverability term to zero), prefer the
    // more protective one: replanning on a momentarily quiet estimate must
    // not strip parity the budget already affords.
    if (parity_sum != other.parity_sum) return parity_sum > other.parity_sum;
    return m > other.m;
  }
};

void consider(const MinErrorContext& ctx, std::span<const int> m,
              Candidate& best) {
  Candidate cand;
  cand.obj = ctx.objective(m);
  cand.parity_sum = 0;
  for (int v : m) cand.parity_sum += v;
  cand.m.assign(m.begin(), m.end());
  if (cand.better_than(best)) best = std::move(cand);
}

Candidate solve_enumerate(const MinErrorContext& ctx) {
  // Depth-first over all allocations with a suffix lower-bound prune.
  std::vector<std::int64_t> suffix_min(ctx.l + 1, 0);
  for (int i = ctx.l - 1; i >= 0; --i)
    suffix_min[i] = suffix_min[i + 1] + ctx.groups[i][0];

  Candidate best;
  std::vector<int> m(ctx.l, 0);
  // Iterative DFS over positions.
  int depth = 0;
  std::vector<std::int64_t> acc(ctx.l + 1, 0);
  m.assign(ctx.l, -1);
  while (depth >= 0) {
    if (depth == ctx.l) {
      consider(ctx, m, best);
      --depth;
      continue;
    }
    int next = m[depth] + 1;
    bool descended = false;
    for (; next <= ctx.half; ++next) {
      const std::int64_t used = acc[depth] + ctx.groups[depth][next];
      if (used + suffix_min[depth + 1] > ctx.budget) continue;
      m[depth] = next;
      acc[depth + 1] = used;
      ++depth;
      if (depth < ctx.l) m[depth] = -1;
      descended = true;
      break;
    }
    if (!descended) {
      m[depth] = -1;
      --depth;
    }
  }
  return best;
}

/// One full cyclic pass of single-coordinate scans; returns true if the
/// allocation changed.
bool coordinate_pass(const MinErrorContext& ctx, std::vector<int>& m) {
  bool changed = false;
  for (int i = 0; i < ctx.l; ++i) {
    std::int64_t others = ctx.total_groups(m) - ctx.groups[i][m[i]];
    Candidate best;
    std::vector<int> trial = m;
    for (int v = 0; v <= ctx.half; ++v) {
      if (others + ctx.groups[i][v] > ctx.budget) continue;
      trial[i] = v;
      consider(ctx, trial, best);
    }
    if (!best.m.empty() && best.m[i] != m[i]) {
      m[i] = best.m[i];
      changed = true;
    }
  }
  return changed;
}

/// Pairwise reallocation: release parity at one level and rescan another.
/// Escapes budget-coupled local minima that single-coordinate moves cannot.
bool pairwise_pass(const MinErrorContext& ctx, std::vector<int>& m) {
  Candidate current;
  consider(ctx, m, current);
  bool changed = false;
  for (int a = 0; a < ctx.l; ++a) {
    for (int b = 0; b < ctx.l; ++b) {
      if (a == b) continue;
      for (int delta = 1; delta <= m[a]; ++delta) {
        std::vector<int> trial = m;
        trial[a] = m[a] - delta;
        const std::int64_t others =
            ctx.total_groups(trial) - ctx.groups[b][trial[b]];
        Candidate best_b;
        for (int v = 0; v <= ctx.half; ++v) {
          if (others + ctx.groups[b][v] > ctx.budget) continue;
          trial[b] = v;
          consider(ctx, trial, best_b);
        }
        if (!best_b.m.empty() && best_b.better_than(current)) {
          m = best_b.m;
          current = best_b;
          changed = true;
        }
      }
    }
  }
  return changed;
}

void repair_to_feasible(const MinErrorContext& ctx, std::vector<int>& m) {
  int guard = ctx.l * (ctx.half + 1);
  while (!ctx.feasible(m) && guard-- > 0) {
    // Trim the level currently spending the most groups.
    int worst = -1;
    std::int64_t worst_groups = -1;
    for (int i = 0; i < ctx.l; ++i) {
      if (m[i] > 0 && ctx.groups[i][m[i]] > worst_groups) {
        worst = i;
        worst_groups = ctx.groups[i][m[i]];
      }
    }
    if (worst < 0) break;
    --m[worst];
  }
  if (!ctx.feasible(m)) m.assign(ctx.l, 0);
}

Candidate solve_descent(const MinErrorContext& ctx) {
  std::vector<std::vector<int>> starts;
  starts.emplace_back(ctx.l, 0);
  starts.emplace_back(ctx.l, ctx.half);
  Rng rng(0x6A616E7573ULL);  // fixed seed: solver must be deterministic
  for (int s = 0; s < 4; ++s) {
    std::vector<int> m(ctx.l);
    for (auto& v : m)
      v = static_cast<int>(rng.uniform_below(ctx.half + 1));
    starts.push_back(std::move(m));
  }

  Candidate best;
  for (auto& start : starts) {
    std::vector<int> m = start;
    repair_to_feasible(ctx, m);
    for (int sweep = 0; sweep < 50; ++sweep) {
      const bool c1 = coordinate_pass(ctx, m);
      const bool c2 = pairwise_pass(ctx, m);
      if (!c1 && !c2) break;
    }
    consider(ctx, m, best);
  }
  return best;
}

MinErrorContext build_context(const HierarchySpec& hierarchy, int l,
                              const NetworkParams& params, double loss_rate,
                              double deadline_s,
                              const UnrecoverabilityEvaluator* cache,
                              double prior_bound) {
  hierarchy.validate();
  params.validate();
  if (l < 1 || l > hierarchy.level_count())
    throw ShapeError("level count out of range");
  if (!(prior_bound > 0.0) || prior_bound > 1.0)
    throw ConfigError("prior bound must lie in (0, 1]");

  MinErrorContext ctx;
  ctx.l = l;
  ctx.half = static_cast<int>(params.group_size) / 2;
  ctx.budget = group_budget(params, deadline_s);

  std::vector<double> p_table(ctx.half + 1);
  for (int m = 0; m <= ctx.half; ++m)
    p_table[m] = cache ? (*cache)(loss_rate, m).p
                       : p_unrecoverable(params, loss_rate, m).p;

  ctx.groups.assign(l, std::vector<std::int64_t>(ctx.half + 1));
  ctx.log_survive.assign(l, std::vector<double>(ctx.half + 1));
  ctx.bounds.resize(l);
  for (int i = 0; i < l; ++i) {
    ctx.bounds[i] = i == 0 ? prior_bound : hierarchy.levels[i - 1].error_bound;
    for (int m = 0; m <= ctx.half; ++m) {
      const std::int64_t N = static_cast<std::int64_t>(
          group_count(hierarchy.levels[i].size_bytes, params.group_size, m,
                      params.fragment_size));
      ctx.groups[i][m] = N;
      ctx.log_survive[i][m] =
          p_table[m] >= 1.0
              ? -std::numeric_limits<double>::infinity()
              : static_cast<double>(N) * std::log1p(-p_table[m]);
    }
  }
  ctx.final_bound = hierarchy.levels[l - 1].error_bound;

  std::int64_t zero_total = 0;
  for (int i = 0; i < l; ++i) zero_total += ctx.groups[i][0];
  if (ctx.budget < 0 || zero_total > ctx.budget)
    throw InfeasibleDeadlineError(
        "even the zero-parity schedule misses the deadline");
  return ctx;
}

}  // namespace

MinErrorPlan solve_min_error_for_levels(const HierarchySpec& hierarchy, int l,
                                        const NetworkParams& params,
                                        double loss_rate, double deadline_s,
                                        SolverMode mode,
                                        const UnrecoverabilityEvaluator* cache,
                                        double prior_bound) {
  MinErrorContext ctx = build_context(hierarchy, l, params, loss_rate,
                                      deadline_s, cache, prior_bound);

  bool enumerate = false;
  if (mode == SolverMode::enumerate_all) {
    enumerate = true;
  } else if (mode == SolverMode::automatic) {
    enumerate = std::pow(ctx.half + 1.0, ctx.l) <= 1e6;
  }
  const Candidate got = enumerate ? solve_enumerate(ctx) : solve_descent(ctx);

  MinErrorPlan plan;
  plan.parity = got.m;
  plan.expected_error = got.obj;
  plan.group_counts.reserve(l);
  std::vector<std::uint64_t> counts;
  for (int i = 0; i < l; ++i)
    plan.group_counts.push_back(
        static_cast<std::uint64_t>(ctx.groups[i][got.m[i]]));
  plan.planned_time_s = deterministic_total_time(plan.group_counts, params);
  return plan;
}

DeadlinePlan optimize_parity_for_min_error(const HierarchySpec& hierarchy,
                                           const NetworkParams& params,
                                           double loss_rate, double deadline_s,
                                           SolverMode mode,
                                           const UnrecoverabilityEvaluator*
                                               cache) {
  const std::vector<int> feasible =
      feasible_level_counts(hierarchy, params, deadline_s);
  if (feasible.empty())
    throw InfeasibleDeadlineError("no level prefix fits the deadline");

  DeadlinePlan best;
  bool have = false;
  for (int l : feasible) {
    MinErrorPlan plan = solve_min_error_for_levels(
        hierarchy, l, params, loss_rate, deadline_s, mode, cache);
    if (!have || plan.expected_error < best.plan.expected_error) {
      best = {l, std::move(plan)};
      have = true;
    }
  }
  return best;
}

}  // namespace janus
