#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "common_opts.hpp"
#include "janus/errors.hpp"
#include "janus/simulator.hpp"

namespace janus::cli {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

struct ScenarioOpts {
  NetOpts net;
  HierOpts hier;
  std::string out;
  std::string protocol = "udp-static-ec";
  int m = 0;
  std::string m_vector;
  bool no_retransmit = false;
  double error_bound = 0.0;
  double deadline = 0.0;
  double initial_lambda = 0.0;
  std::string loss = "static";
  double lambda = 0.0;
  double transition_rate = 0.04;
  std::string states;
  double window = 3.0;
  std::uint64_t event_cap = 50'000'000;
  std::string forced_drops;
};

ProtocolSpec build_protocol(const ScenarioOpts& o) {
  ProtocolSpec p;
  if (o.protocol == "tcp-baseline") {
    p.type = ProtocolSpec::Type::tcp_baseline;
  } else if (o.protocol == "udp-static-ec") {
    p.type = ProtocolSpec::Type::udp_static_ec;
    p.m = o.m;
    if (!o.m_vector.empty()) p.m_vector = parse_int_csv(o.m_vector);
    p.retransmit = !o.no_retransmit;
  } else if (o.protocol == "adaptive-error-bound") {
    p.type = ProtocolSpec::Type::adaptive_error_bound;
    p.error_bound = o.error_bound;
    p.initial_lambda = o.initial_lambda;
  } else if (o.protocol == "adaptive-deadline") {
    p.type = ProtocolSpec::Type::adaptive_deadline;
    p.deadline_s = o.deadline;
    p.initial_lambda = o.initial_lambda;
  } else {
    throw ConfigError("unknown protocol: " + o.protocol);
  }
  return p;
}

LossModelSpec build_loss(const ScenarioOpts& o) {
  if (o.loss == "static") return LossModelSpec::static_rate_of(o.lambda);
  if (o.loss != "hmm") throw ConfigError("unknown loss model: " + o.loss);
  LossModelSpec spec = LossModelSpec::default_hmm(o.transition_rate);
  if (!o.states.empty()) {
    spec.states.clear();
    std::size_t pos = 0;
    while (pos < o.states.size()) {
      std::size_t end = o.states.find(',', pos);
      if (end == std::string::npos) end = o.states.size();
      const std::string tok = o.states.substr(pos, end - pos);
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw ConfigError("--states expects MEAN:STDDEV pairs, got " + tok);
      try {
        spec.states.push_back({std::stod(tok.substr(0, colon)),
                               std::stod(tok.substr(colon + 1))});
      } catch (const std::exception&) {
        throw ConfigError("cannot parse --states entry: " + tok);
      }
      pos = end + 1;
    }
  }
  return spec;
}

void setup_scenario_impl(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "scenario", "write a simulation scenario file from flags");
  auto opt = std::make_shared<ScenarioOpts>();
  cmd->add_option("-o,--out", opt->out, "output scenario path")->required();
  cmd->add_option("--protocol", opt->protocol,
                  "tcp-baseline | udp-static-ec | adaptive-error-bound | "
                  "adaptive-deadline");
  cmd->add_option("-m,--parity", opt->m, "uniform parity (udp-static-ec)");
  cmd->add_option("--m-vector", opt->m_vector,
                  "per-level parity, comma separated (udp-static-ec)");
  cmd->add_flag("--no-retransmit", opt->no_retransmit,
                "single pass without retransmission rounds");
  cmd->add_option("--error-bound", opt->error_bound,
                  "target bound (adaptive-error-bound)");
  cmd->add_option("--deadline", opt->deadline,
                  "time budget in seconds (adaptive-deadline)");
  cmd->add_option("--initial-lambda", opt->initial_lambda,
                  "planning prior for adaptive protocols");
  cmd->add_option("--loss", opt->loss, "static | hmm");
  cmd->add_option("--lambda", opt->lambda, "static loss rate, packets/s");
  cmd->add_option("--transition-rate", opt->transition_rate,
                  "hmm state-change rate, 1/s");
  cmd->add_option("--states", opt->states,
                  "hmm states as MEAN:STDDEV[,MEAN:STDDEV...]");
  cmd->add_option("--window", opt->window,
                  "receiver loss-report window, seconds");
  cmd->add_option("--event-cap", opt->event_cap,
                  "abort after this many simulator events");
  cmd->add_option("--forced-drops", opt->forced_drops,
                  "emission indices to drop, comma separated");
  add_net_options(cmd, opt->net);
  add_hier_options(cmd, opt->hier);

  cmd->callback([opt] {
    Scenario sc;
    sc.hierarchy = opt->hier.hierarchy();
    sc.params = opt->net.params();
    sc.loss = build_loss(*opt);
    sc.protocol = build_protocol(*opt);
    sc.receiver_window_s = opt->window;
    sc.event_cap = opt->event_cap;
    if (!opt->forced_drops.empty())
      for (int v : parse_int_csv(opt->forced_drops))
        sc.forced_drops.push_back(static_cast<std::uint64_t>(v));
    sc.validate();
    write_file(opt->out, sc.to_json() + "\n");
    std::printf("wrote %s\n", opt->out.c_str());
  });
}

struct SimulateOpts {
  std::string scenario;
  std::uint64_t seed = 1;
  int runs = 1;
  std::string csv;
  std::string report;
  bool as_json = false;
};

void setup_simulate_impl(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "simulate", "run the discrete-event transfer simulator");
  auto opt = std::make_shared<SimulateOpts>();
  cmd->add_option("-s,--scenario", opt->scenario, "scenario JSON path")
      ->required();
  cmd->add_option("--seed", opt->seed, "first seed (default 1)");
  cmd->add_option("--runs", opt->runs,
                  "number of runs with consecutive seeds");
  cmd->add_option("--csv", opt->csv, "append per-run rows to this CSV file");
  cmd->add_option("--report", opt->report,
                  "write the full report of the last run to this path");
  cmd->add_flag("--json", opt->as_json,
                "print full reports as a JSON array");

  cmd->callback([opt] {
    if (opt->runs < 1) throw ConfigError("--runs must be at least 1");
    const Scenario sc = Scenario::from_json(read_file(opt->scenario));

    const bool csv_exists =
        !opt->csv.empty() && std::filesystem::exists(opt->csv) &&
        std::filesystem::file_size(opt->csv) > 0;
    std::ofstream csv;
    if (!opt->csv.empty()) {
      csv.open(opt->csv, std::ios::app);
      if (!csv) throw Error("cannot write " + opt->csv);
      if (!csv_exists) csv << SimReport::csv_header() << "\n";
    }

    json all = json::array();
    std::string last_report;
    for (int i = 0; i < opt->runs; ++i) {
      const std::uint64_t seed = opt->seed + static_cast<std::uint64_t>(i);
      const SimReport rep = run_scenario(sc, seed);
      if (csv.is_open()) csv << rep.csv_row() << "\n";
      last_report = rep.to_json();
      if (opt->as_json) {
        all.push_back(json::parse(last_report));
      } else {
        std::printf(
            "seed=%llu protocol=%s total_time=%.6f s rounds=%d "
            "levels=%d packets=%llu lost=%llu%s\n",
            static_cast<unsigned long long>(seed), rep.protocol.c_str(),
            rep.total_time_s, rep.rounds, rep.levels_delivered,
            static_cast<unsigned long long>(rep.packets_sent),
            static_cast<unsigned long long>(rep.packets_lost),
            rep.aborted ? " ABORTED" : "");
      }
      if (rep.aborted)
        throw TransferAbortedError("simulated transfer aborted: " +
                                   rep.abort_reason);
    }
    if (opt->as_json) std::printf("%s\n", all.dump(2).c_str());
    if (!opt->report.empty()) write_file(opt->report, last_report + "\n");
  });
}

}  // namespace

void setup_scenario(CLI::App& app) { setup_scenario_impl(app); }

void setup_simulate(CLI::App& app) { setup_simulate_impl(app); }

}  // namespace janus::cli
