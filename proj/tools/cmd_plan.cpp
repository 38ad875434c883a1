#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "common_opts.hpp"
#include "janus/errors.hpp"
#include "janus/manifest.hpp"
#include "janus/reliability.hpp"

namespace janus::cli {

using nlohmann::json;

namespace {

SolverMode parse_solver(const std::string& name) {
  if (name == "auto") return SolverMode::automatic;
  if (name == "descent") return SolverMode::coordinate_descent;
  if (name == "enumerate") return SolverMode::enumerate_all;
  throw ConfigError("unknown solver: " + name);
}

struct MinTimeOpts {
  NetOpts net;
  HierOpts hier;
  double lambda = 0.0;
  std::uint64_t bytes = 0;
  int levels = 0;
  bool table = false;
  bool as_json = false;
};

void setup_min_time(CLI::App* plan) {
  auto* cmd = plan->add_subcommand(
      "min-time", "parity allocation minimizing expected transfer time");
  auto opt = std::make_shared<MinTimeOpts>();
  cmd->add_option("--lambda", opt->lambda, "loss rate, packets/s")
      ->required();
  cmd->add_option("--bytes", opt->bytes, "payload size in bytes");
  cmd->add_option("--levels", opt->levels,
                  "number of hierarchy levels to count (default: all)");
  cmd->add_flag("--table", opt->table, "print expected time for every m");
  cmd->add_flag("--json", opt->as_json, "machine-readable output");
  add_net_options(cmd, opt->net);
  add_hier_options(cmd, opt->hier);

  cmd->callback([opt] {
    const NetworkParams params = opt->net.params();
    std::uint64_t bytes = opt->bytes;
    if (bytes == 0) {
      const HierarchySpec h = opt->hier.hierarchy();
      const int l = opt->levels > 0 ? opt->levels : h.level_count();
      if (l > h.level_count())
        throw ConfigError("--levels exceeds the hierarchy depth");
      bytes = h.total_bytes(l);
    }
    const MinTimePlan plan =
        optimize_parity_for_min_time(bytes, params, opt->lambda);
    if (opt->as_json) {
      json j;
      j["bytes"] = bytes;
      j["lambda"] = opt->lambda;
      j["parity"] = plan.parity;
      j["expected_total_s"] = plan.estimate.expected_total_s;
      j["p_unrecoverable"] = plan.estimate.p;
      j["regime"] =
          plan.estimate.regime == LossRegime::low ? "low" : "high";
      j["retransmission_terms"] = plan.estimate.retransmission_terms;
      if (opt->table) {
        json table = json::array();
        for (int m = 0;
             m <= static_cast<int>(params.group_size) / 2; ++m) {
          json row;
          row["m"] = m;
          try {
            const TimeEstimate est =
                expected_total_time(bytes, params, opt->lambda, m);
            row["expected_total_s"] = est.expected_total_s;
            row["p_unrecoverable"] = est.p;
          } catch (const DivergenceError&) {
            row["expected_total_s"] = nullptr;
          }
          table.push_back(row);
        }
        j["table"] = table;
      }
      std::printf("%s\n", j.dump(2).c_str());
      return;
    }
    std::printf("bytes:               %llu\n",
                static_cast<unsigned long long>(bytes));
    std::printf("lambda:              %g pkt/s (%s regime)\n", opt->lambda,
                plan.estimate.regime == LossRegime::low ? "low" : "high");
    std::printf("optimal parity m*:   %d\n", plan.parity);
    std::printf("expected total time: %.4f s\n",
                plan.estimate.expected_total_s);
    std::printf("group unrecoverable: %.6e\n", plan.estimate.p);
    if (opt->table) {
      std::printf("\n  m   E[T] (s)        p_unrecoverable\n");
      for (int m = 0; m <= static_cast<int>(params.group_size) / 2; ++m) {
        try {
          const TimeEstimate est =
              expected_total_time(bytes, params, opt->lambda, m);
          std::printf(" %2d   %-14.4f  %.6e\n", m, est.expected_total_s,
                      est.p);
        } catch (const DivergenceError&) {
          std::printf(" %2d   divergent\n", m);
        }
      }
    }
  });
}

struct MinErrorOpts {
  NetOpts net;
  HierOpts hier;
  double lambda = 0.0;
  double deadline = 0.0;
  int levels = 0;
  std::string solver = "auto";
  bool as_json = false;
};

void setup_min_error(CLI::App* plan) {
  auto* cmd = plan->add_subcommand(
      "min-error",
      "per-level parity allocation minimizing the expected "
      "reconstruction bound under a deadline");
  auto opt = std::make_shared<MinErrorOpts>();
  cmd->add_option("--lambda", opt->lambda, "loss rate, packets/s")
      ->required();
  cmd->add_option("--deadline", opt->deadline, "time budget, seconds")
      ->required();
  cmd->add_option("--levels", opt->levels,
                  "fix the number of levels sent (default: optimize)");
  cmd->add_option("--solver", opt->solver, "auto | descent | enumerate");
  cmd->add_flag("--json", opt->as_json, "machine-readable output");
  add_net_options(cmd, opt->net);
  add_hier_options(cmd, opt->hier);

  cmd->callback([opt] {
    const NetworkParams params = opt->net.params();
    const HierarchySpec h = opt->hier.hierarchy();
    const SolverMode mode = parse_solver(opt->solver);
    int levels = opt->levels;
    MinErrorPlan plan;
    if (levels > 0) {
      plan = solve_min_error_for_levels(h, levels, params, opt->lambda,
                                        opt->deadline, mode);
    } else {
      DeadlinePlan full = optimize_parity_for_min_error(
          h, params, opt->lambda, opt->deadline, mode);
      levels = full.levels_sent;
      plan = std::move(full.plan);
    }
    if (opt->as_json) {
      json j;
      j["lambda"] = opt->lambda;
      j["deadline_s"] = opt->deadline;
      j["levels"] = levels;
      j["parity"] = plan.parity;
      j["group_counts"] = plan.group_counts;
      j["expected_error"] = plan.expected_error;
      j["planned_time_s"] = plan.planned_time_s;
      j["group_budget"] = group_budget(params, opt->deadline);
      std::printf("%s\n", j.dump(2).c_str());
      return;
    }
    std::printf("levels sent:     %d\n", levels);
    std::printf("parity vector:   [");
    for (std::size_t i = 0; i < plan.parity.size(); ++i)
      std::printf("%s%d", i ? ", " : "", plan.parity[i]);
    std::printf("]\n");
    std::printf("group counts:    [");
    for (std::size_t i = 0; i < plan.group_counts.size(); ++i)
      std::printf("%s%llu", i ? ", " : "",
                  static_cast<unsigned long long>(plan.group_counts[i]));
    std::printf("]\n");
    std::printf("expected error:  %.6e\n", plan.expected_error);
    std::printf("planned time:    %.4f s (budget %.4f s)\n",
                plan.planned_time_s, opt->deadline);
  });
}

struct FeasibleOpts {
  NetOpts net;
  HierOpts hier;
  double deadline = 0.0;
  bool as_json = false;
};

void setup_feasible(CLI::App* plan) {
  auto* cmd = plan->add_subcommand(
      "feasible-levels",
      "level counts whose zero-parity schedule fits a deadline");
  auto opt = std::make_shared<FeasibleOpts>();
  cmd->add_option("--deadline", opt->deadline, "time budget, seconds")
      ->required();
  cmd->add_flag("--json", opt->as_json, "machine-readable output");
  add_net_options(cmd, opt->net);
  add_hier_options(cmd, opt->hier);

  cmd->callback([opt] {
    const NetworkParams params = opt->net.params();
    const HierarchySpec h = opt->hier.hierarchy();
    const auto counts = feasible_level_counts(h, params, opt->deadline);
    if (opt->as_json) {
      json j;
      j["deadline_s"] = opt->deadline;
      j["feasible_levels"] = counts;
      j["group_budget"] = group_budget(params, opt->deadline);
      std::printf("%s\n", j.dump(2).c_str());
      return;
    }
    if (counts.empty()) {
      std::printf("no level count fits within %.4f s\n", opt->deadline);
      return;
    }
    std::printf("feasible level counts:");
    for (int c : counts) std::printf(" %d", c);
    std::printf("\ngroup budget: %lld\n",
                static_cast<long long>(group_budget(params, opt->deadline)));
  });
}

struct UnrecoverableOpts {
  NetOpts net;
  double lambda = 0.0;
  int parity = 0;
  bool as_json = false;
};

void setup_unrecoverable(CLI::App* plan) {
  auto* cmd = plan->add_subcommand(
      "unrecoverable",
      "per-group unrecoverability probability for a loss rate and parity");
  auto opt = std::make_shared<UnrecoverableOpts>();
  cmd->add_option("--lambda", opt->lambda, "loss rate, packets/s")
      ->required();
  cmd->add_option("-m,--parity", opt->parity, "parity fragments per group")
      ->required();
  cmd->add_flag("--json", opt->as_json, "machine-readable output");
  add_net_options(cmd, opt->net);

  cmd->callback([opt] {
    const NetworkParams params = opt->net.params();
    const Unrecoverability u =
        p_unrecoverable(params, opt->lambda, opt->parity);
    if (opt->as_json) {
      json j;
      j["lambda"] = opt->lambda;
      j["parity"] = opt->parity;
      j["p_unrecoverable"] = u.p;
      j["regime"] = u.regime == LossRegime::low ? "low" : "high";
      j["fragments_in_flight"] = fragments_in_flight(params);
      j["round_window_s"] = round_window_s(params);
      std::printf("%s\n", j.dump(2).c_str());
      return;
    }
    std::printf("p_unrecoverable: %.8e  (%s regime, u=%d, T=%.6f s)\n", u.p,
                u.regime == LossRegime::low ? "low" : "high",
                fragments_in_flight(params), round_window_s(params));
  });
}

}  // namespace

void setup_plan(CLI::App& app) {
  auto* plan =
      app.add_subcommand("plan", "analytical planning without any network");
  plan->require_subcommand(1);
  setup_min_time(plan);
  setup_min_error(plan);
  setup_feasible(plan);
  setup_unrecoverable(plan);
}

}  // namespace janus::cli
