#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "common_opts.hpp"
#include "janus/errors.hpp"
#include "janus/manifest.hpp"
#include "janus/transport/receiver.hpp"
#include "janus/transport/sender.hpp"

namespace janus::cli {

namespace {

std::uint16_t default_control_port() {
  if (const char* env = std::getenv("JANUS_CONTROL_PORT")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0 && v < 65536) return static_cast<std::uint16_t>(v);
  }
  return 47600;
}

std::vector<std::vector<std::uint8_t>> load_payload(
    const Manifest& manifest, const std::filesystem::path& base) {
  std::vector<std::vector<std::uint8_t>> levels;
  levels.reserve(manifest.levels.size());
  for (const auto& level : manifest.levels) {
    std::vector<std::uint8_t> bytes(level.size_bytes);
    if (manifest.payload_mode == PayloadMode::synthetic) {
      fill_synthetic_level(manifest.seed, level.index, bytes);
    } else {
      const auto path = base / level.file;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw ConfigError("cannot open payload file " + path.string());
      in.read(reinterpret_cast<char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
      if (static_cast<std::uint64_t>(in.gcount()) != level.size_bytes)
        throw ConfigError("payload file " + path.string() +
                          " is shorter than the manifest says");
    }
    if (!level.checksum.empty() && crc32_label(bytes) != level.checksum)
      throw ConfigError("payload checksum mismatch for level " +
                        std::to_string(level.index));
    levels.push_back(std::move(bytes));
  }
  return levels;
}

struct SendOpts {
  NetOpts net;
  std::string manifest;
  std::string host = "127.0.0.1";
  int port = 0;
  std::string mode = "static";
  int m = 0;
  std::string m_vector;
  double error_bound = 0.0;
  double deadline = 0.0;
  double initial_lambda = 0.0;
  std::string drop_list;
  std::uint64_t drop_every = 0;
  double drop_rate = 0.0;
  std::uint64_t drop_seed = 0;
  double ack_timeout = 30.0;
  double connect_timeout = 10.0;
  int max_rounds = 64;
  std::string report;
  bool as_json = false;
};

struct RecvOpts {
  int port = 0;
  int udp_port = 0;
  std::string outdir = "recv-out";
  double window = 1.0;
  double accept_timeout = 30.0;
  double idle_timeout = 20.0;
  std::uint64_t max_level_bytes = 1ull << 32;
  std::string report;
  bool as_json = false;
};

}  // namespace

void setup_send(CLI::App& app) {
  auto* cmd =
      app.add_subcommand("send", "send a dataset to a listening receiver");
  auto opt = std::make_shared<SendOpts>();
  cmd->add_option("--manifest", opt->manifest, "manifest JSON path")
      ->required();
  cmd->add_option("--host", opt->host, "receiver address (IPv4)");
  cmd->add_option("-p,--port", opt->port,
                  "receiver control port (default: JANUS_CONTROL_PORT env "
                  "or 47600)");
  cmd->add_option("--mode", opt->mode,
                  "static | adaptive-error-bound | adaptive-deadline");
  cmd->add_option("-m,--parity", opt->m, "uniform parity (static mode)");
  cmd->add_option("--m-vector", opt->m_vector,
                  "per-level parity, comma separated (static mode)");
  cmd->add_option("--error-bound", opt->error_bound,
                  "target bound (adaptive-error-bound)");
  cmd->add_option("--deadline", opt->deadline,
                  "time budget, seconds (adaptive-deadline)");
  cmd->add_option("--initial-lambda", opt->initial_lambda,
                  "planning prior loss rate, packets/s");
  cmd->add_option("--drop-list", opt->drop_list,
                  "loss shim: drop these global sequence numbers");
  cmd->add_option("--drop-every", opt->drop_every,
                  "loss shim: drop every k-th fragment (seq % k == 0)");
  cmd->add_option("--drop-rate", opt->drop_rate,
                  "loss shim: Bernoulli drop probability per fragment");
  cmd->add_option("--drop-seed", opt->drop_seed, "loss shim rng seed");
  cmd->add_option("--ack-timeout", opt->ack_timeout,
                  "seconds to wait for the receiver's adjudication");
  cmd->add_option("--connect-timeout", opt->connect_timeout,
                  "seconds to wait for the receiver to appear");
  cmd->add_option("--max-rounds", opt->max_rounds,
                  "abort after this many retransmission rounds");
  cmd->add_option("--report", opt->report, "write the result JSON here");
  cmd->add_flag("--json", opt->as_json, "machine-readable output");
  add_net_options(cmd, opt->net);

  cmd->callback([opt] {
    const std::filesystem::path manifest_path = opt->manifest;
    const Manifest manifest = Manifest::load(manifest_path);
    const auto payload =
        load_payload(manifest, manifest_path.parent_path());

    transport::SendConfig cfg;
    cfg.host = opt->host;
    cfg.control_port = opt->port > 0 ? static_cast<std::uint16_t>(opt->port)
                                     : default_control_port();
    cfg.params = opt->net.params();
    if (opt->mode == "static") {
      cfg.protocol.type = ProtocolSpec::Type::udp_static_ec;
      cfg.protocol.m = opt->m;
      if (!opt->m_vector.empty())
        cfg.protocol.m_vector = parse_int_csv(opt->m_vector);
    } else if (opt->mode == "adaptive-error-bound") {
      cfg.protocol.type = ProtocolSpec::Type::adaptive_error_bound;
      cfg.protocol.error_bound = opt->error_bound;
      cfg.protocol.initial_lambda = opt->initial_lambda;
    } else if (opt->mode == "adaptive-deadline") {
      cfg.protocol.type = ProtocolSpec::Type::adaptive_deadline;
      cfg.protocol.deadline_s = opt->deadline;
      cfg.protocol.initial_lambda = opt->initial_lambda;
    } else {
      throw ConfigError("unknown mode: " + opt->mode);
    }
    if (!opt->drop_list.empty())
      cfg.shim = transport::LossShimSpec::from_list(opt->drop_list);
    cfg.shim.drop_every = opt->drop_every;
    cfg.shim.drop_rate = opt->drop_rate;
    cfg.shim.seed = opt->drop_seed;
    cfg.ack_timeout_s = opt->ack_timeout;
    cfg.connect_timeout_s = opt->connect_timeout;
    cfg.max_rounds = opt->max_rounds;

    const transport::SendResult res =
        transport::run_sender(manifest, payload, cfg);
    if (!opt->report.empty()) {
      std::ofstream out(opt->report, std::ios::trunc);
      if (!out) throw Error("cannot write " + opt->report);
      out << res.to_json() << "\n";
    }
    if (opt->as_json) {
      std::printf("%s\n", res.to_json().c_str());
    } else {
      std::printf(
          "sent %d levels in %.3f s: %llu packets (%llu data, %llu parity), "
          "%d round(s), receiver confirmed %d level(s)%s\n",
          res.levels_sent, res.elapsed_s,
          static_cast<unsigned long long>(res.packets_sent),
          static_cast<unsigned long long>(res.data_fragments),
          static_cast<unsigned long long>(res.parity_fragments), res.rounds,
          res.levels_delivered, res.complete ? "" : " (partial)");
    }
  });
}

void setup_recv(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "recv", "receive one dataset transfer and write its levels");
  auto opt = std::make_shared<RecvOpts>();
  cmd->add_option("-p,--port", opt->port,
                  "control port to listen on (default: JANUS_CONTROL_PORT "
                  "env or 47600)");
  cmd->add_option("--udp-port", opt->udp_port,
                  "data port (default: ephemeral)");
  cmd->add_option("-o,--outdir", opt->outdir,
                  "output directory (JANUS_OUTDIR env overrides the "
                  "default)");
  cmd->add_option("--window", opt->window,
                  "loss-report window, seconds");
  cmd->add_option("--accept-timeout", opt->accept_timeout,
                  "seconds to wait for a sender");
  cmd->add_option("--idle-timeout", opt->idle_timeout,
                  "abort after this long without traffic");
  cmd->add_option("--max-level-bytes", opt->max_level_bytes,
                  "refuse levels larger than this");
  cmd->add_option("--report", opt->report,
                  "write the receipt JSON here (default: "
                  "<outdir>/receipt.json)");
  cmd->add_flag("--json", opt->as_json, "machine-readable output");

  cmd->callback([opt] {
    transport::RecvConfig cfg;
    cfg.control_port = opt->port > 0 ? static_cast<std::uint16_t>(opt->port)
                                     : default_control_port();
    cfg.udp_port = static_cast<std::uint16_t>(opt->udp_port);
    std::string outdir = opt->outdir;
    if (const char* env = std::getenv("JANUS_OUTDIR")) outdir = env;
    cfg.outdir = outdir;
    cfg.window_s = opt->window;
    cfg.accept_timeout_s = opt->accept_timeout;
    cfg.idle_timeout_s = opt->idle_timeout;
    cfg.max_level_bytes = opt->max_level_bytes;

    const transport::RecvResult res = transport::run_receiver(cfg);
    std::string report_path = opt->report;
    if (report_path.empty() && !outdir.empty())
      report_path = (std::filesystem::path(outdir) / "receipt.json").string();
    if (!report_path.empty()) {
      std::ofstream out(report_path, std::ios::trunc);
      if (!out) throw Error("cannot write " + report_path);
      out << res.to_json() << "\n";
    }
    if (opt->as_json) {
      std::printf("%s\n", res.to_json().c_str());
    } else {
      std::printf(
          "received %d/%d levels (%llu bytes) in %.3f s, %llu datagrams, "
          "%llu decoded groups, checksums %s\n",
          res.levels_complete, res.levels_expected,
          static_cast<unsigned long long>(res.bytes_written), res.elapsed_s,
          static_cast<unsigned long long>(res.datagrams_received),
          static_cast<unsigned long long>(res.decoded_groups),
          res.checksums_ok ? "ok" : "FAILED");
    }
  });
}

}  // namespace janus::cli
