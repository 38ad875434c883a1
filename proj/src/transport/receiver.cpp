#include "janus/transport/receiver.hpp"

#include <poll.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "janus/erasure.hpp"
#include "janus/errors.hpp"
#include "janus/manifest.hpp"
#include "janus/transport/control.hpp"
#include "janus/transport/socket.hpp"
#include "janus/transport/wire.hpp"

namespace janus::transport {

using nlohmann::json;
using clock_type = std::chrono::steady_clock;

std::string RecvResult::to_json() const {
  json j;
  j["levels_expected"] = levels_expected;
  j["levels_complete"] = levels_complete;
  j["complete"] = complete;
  j["checksums_ok"] = checksums_ok;
  j["achieved_error_bound"] = achieved_error_bound;
  j["elapsed_s"] = elapsed_s;
  j["datagrams_received"] = datagrams_received;
  j["duplicate_fragments"] = duplicate_fragments;
  j["decoded_groups"] = decoded_groups;
  j["bytes_written"] = bytes_written;
  j["close_status"] = close_status;
  j["files"] = files;
  return j.dump(2);
}

namespace {

struct LevelInfo {
  std::uint64_t size = 0;
  double bound = 1.0;
  std::string checksum;
};

struct GroupBuf {
  std::uint8_t k = 0;
  std::uint8_t m = 0;
  int have = 0;
  int have_data = 0;
  bool done = false;
  std::vector<std::vector<std::uint8_t>> frags;
  std::vector<bool> seen;  // fragment indices ever received; outlives `done`
};

class ReceiverSession {
 public:
  explicit ReceiverSession(const RecvConfig& config) : cfg_(config) {}

  RecvResult run();

 private:
  double elapsed() const {
    return std::chrono::duration<double>(clock_type::now() - t0_).count();
  }

  void handshake();
  void handle_datagram(const std::uint8_t* buf, std::size_t len);
  void complete_group(int level, GroupBuf& gb);
  bool handle_end(const json& msg);    // true when the session is over
  bool handle_close(const json& msg);
  void send_lambda_report();
  void finalize(int levels_announced);
  int complete_prefix(int levels_announced) const;

  RecvConfig cfg_;
  ControlChannel control_;
  UdpSocket udp_;

  std::uint64_t s_ = 0;
  int n_ = 0;
  std::vector<LevelInfo> levels_;
  std::vector<std::unordered_map<std::uint32_t, GroupBuf>> groups_;
  std::vector<std::uint64_t> totals_;
  int levels_announced_ = 0;

  std::uint64_t highest_seq_plus1_ = 0;
  std::uint64_t lost_window_ = 0;

  clock_type::time_point t0_;
  bool checksum_failure_ = false;
  RecvResult res_;
};

void ReceiverSession::handshake() {
  TcpListener listener = TcpListener::bind_local(cfg_.control_port);
  cfg_.control_port = listener.local_port();
  if (cfg_.control_port_out)
    cfg_.control_port_out->store(cfg_.control_port);
  control_ = ControlChannel(
      listener.accept(static_cast<int>(cfg_.accept_timeout_s * 1000)));

  auto hello = control_.receive(static_cast<int>(cfg_.accept_timeout_s * 1000));
  if (!hello) throw TransferAbortedError("no hello from sender");
  if (hello->value("type", "") != "hello")
    throw TransferAbortedError("bad handshake message");
  if (hello->value("version", 0) != 1)
    throw TransferAbortedError("unsupported session version");
  s_ = hello->at("fragment_size").get<std::uint64_t>();
  n_ = hello->at("group_size").get<int>();
  if (s_ == 0 || s_ > 65000) throw TransferAbortedError("bad fragment size");
  if (n_ < 2 || n_ > 255) throw TransferAbortedError("bad group size");
  for (const auto& lv : hello->at("levels")) {
    LevelInfo info;
    info.size = lv.at("size_bytes").get<std::uint64_t>();
    info.bound = lv.at("error_bound").get<double>();
    info.checksum = lv.value("checksum", "");
    if (info.size == 0 || info.size > cfg_.max_level_bytes)
      throw TransferAbortedError("announced level size out of range");
    levels_.push_back(info);
  }
  if (levels_.empty()) throw TransferAbortedError("no levels announced");
  res_.levels_expected = static_cast<int>(levels_.size());
  groups_.resize(levels_.size());
  totals_.assign(levels_.size(), 0);

  udp_ = UdpSocket::bind_local(cfg_.udp_port);
  udp_.set_receive_buffer(8 << 20);
  control_.send({{"type", "hello-ack"}, {"udp_port", udp_.local_port()}});
}

void ReceiverSession::handle_datagram(const std::uint8_t* buf,
                                      std::size_t len) {
  const auto header = decode_header(buf, len);
  if (!header) return;
  const FragmentHeader& h = *header;
  if (h.payload_len != s_) return;
  if (h.level >= levels_.size()) return;
  const int k = h.k, m = h.m;
  if (k < 1 || k + m != n_ || h.fragment_index >= k + m) return;

  ++res_.datagrams_received;
  if (h.global_seq + 1 > highest_seq_plus1_) {
    lost_window_ += h.global_seq + 1 - highest_seq_plus1_ - 1;
    highest_seq_plus1_ = h.global_seq + 1;
  }

  GroupBuf& gb = groups_[h.level][h.ftg_index];
  if (gb.seen.empty()) {
    gb.k = h.k;
    gb.m = h.m;
    gb.frags.resize(n_);
    gb.seen.assign(n_, false);
  }
  if (gb.k != h.k || gb.m != h.m) return;  // conflicting geometry; ignore
  if (gb.seen[h.fragment_index]) {
    ++res_.duplicate_fragments;
    return;
  }
  gb.seen[h.fragment_index] = true;
  // a first-time fragment for an already-finished group (late parity or a
  // whole-group resend tail) is surplus, not a duplicate
  if (gb.done) return;
  auto& slot = gb.frags[h.fragment_index];
  slot.assign(buf + kHeaderSize, buf + len);
  ++gb.have;
  if (h.fragment_index < gb.k) ++gb.have_data;
  if (gb.have >= gb.k) complete_group(h.level, gb);
}

void ReceiverSession::complete_group(int /*level*/, GroupBuf& gb) {
  if (gb.have_data < gb.k) {
    std::vector<std::optional<std::vector<std::uint8_t>>> shares(n_);
    for (int i = 0; i < n_; ++i)
      if (!gb.frags[i].empty()) shares[i] = std::move(gb.frags[i]);
    GroupCode(gb.k, gb.m).decode(shares);
    for (int i = 0; i < gb.k; ++i) gb.frags[i] = std::move(*shares[i]);
    ++res_.decoded_groups;
  }
  for (int i = gb.k; i < n_; ++i) {
    gb.frags[i].clear();
    gb.frags[i].shrink_to_fit();
  }
  gb.done = true;
}

int ReceiverSession::complete_prefix(int levels_announced) const {
  int prefix = 0;
  for (int i = 0; i < levels_announced; ++i) {
    const auto& map = groups_[i];
    bool all = totals_[i] > 0;
    for (std::uint64_t g = 0; all && g < totals_[i]; ++g) {
      auto it = map.find(static_cast<std::uint32_t>(g));
      if (it == map.end() || !it->second.done) all = false;
    }
    if (!all) break;
    ++prefix;
  }
  return prefix;
}

bool ReceiverSession::handle_end(const json& msg) {
  levels_announced_ = msg.at("levels").get<int>();
  if (levels_announced_ < 0 ||
      levels_announced_ > static_cast<int>(levels_.size()))
    throw TransferAbortedError("bad level count in end message");
  const auto& totals = msg.at("totals");
  for (int i = 0; i < levels_announced_; ++i)
    totals_[i] = totals.at(i).get<std::uint64_t>();

  const std::uint64_t last_seq = msg.at("last_seq").get<std::uint64_t>();
  if (last_seq > highest_seq_plus1_) {
    lost_window_ += last_seq - highest_seq_plus1_;
    highest_seq_plus1_ = last_seq;
  }

  json missing = json::array();
  for (int i = 0; i < levels_announced_; ++i) {
    const auto& map = groups_[i];
    for (std::uint64_t g = 0; g < totals_[i]; ++g) {
      auto it = map.find(static_cast<std::uint32_t>(g));
      if (it == map.end() || !it->second.done)
        missing.push_back(json::array({i, g}));
    }
  }
  if (missing.empty()) {
    finalize(levels_announced_);
    res_.complete = res_.levels_complete == levels_announced_;
    control_.send({{"type", "complete"},
                   {"levels_complete", res_.levels_complete},
                   {"checksums_ok", res_.checksums_ok}});
    try {
      auto close = control_.receive(5000);
      if (close && close->value("type", "") == "close")
        res_.close_status = close->value("status", "ok");
    } catch (const TransferAbortedError&) {
      res_.close_status = "ok";  // peer already left
    }
    return true;
  }
  control_.send({{"type", "retransmit"},
                 {"groups", std::move(missing)},
                 {"levels_complete", complete_prefix(levels_announced_)}});
  return false;
}

bool ReceiverSession::handle_close(const json& msg) {
  res_.close_status = msg.value("status", "");
  const int announced =
      levels_announced_ > 0 ? levels_announced_
                            : static_cast<int>(levels_.size());
  finalize(announced);
  res_.complete = res_.levels_complete == announced;
  try {
    control_.send({{"type", "complete"},
                   {"levels_complete", res_.levels_complete},
                   {"checksums_ok", res_.checksums_ok}});
  } catch (const Error&) {
    // peer may have closed right after the close message
  }
  return true;
}

void ReceiverSession::send_lambda_report() {
  const double lambda_hat =
      static_cast<double>(lost_window_) / cfg_.window_s;
  lost_window_ = 0;
  control_.send({{"type", "lambda"},
                 {"time_s", elapsed()},
                 {"lambda_hat", lambda_hat}});
}

void ReceiverSession::finalize(int levels_announced) {
  const int prefix = complete_prefix(levels_announced);
  res_.levels_complete = prefix;
  res_.achieved_error_bound = prefix == 0 ? 1.0 : levels_[prefix - 1].bound;

  std::filesystem::path out;
  const bool write_files = !cfg_.outdir.empty();
  if (write_files) {
    out = cfg_.outdir;
    std::filesystem::create_directories(out);
  }
  for (int i = 0; i < prefix; ++i) {
    std::vector<std::uint8_t> bytes(levels_[i].size);
    std::uint64_t off = 0;
    auto& map = groups_[i];
    for (std::uint64_t g = 0; g < totals_[i]; ++g) {
      GroupBuf& gb = map[static_cast<std::uint32_t>(g)];
      for (int f = 0; f < gb.k && off < bytes.size(); ++f) {
        const std::uint64_t chunk =
            std::min<std::uint64_t>(s_, bytes.size() - off);
        std::memcpy(bytes.data() + off, gb.frags[f].data(), chunk);
        off += chunk;
      }
    }
    if (!levels_[i].checksum.empty() &&
        crc32_label(bytes) != levels_[i].checksum) {
      res_.checksums_ok = false;
      checksum_failure_ = true;
    }
    if (write_files) {
      const auto path = out / ("level-" + std::to_string(i + 1) + ".bin");
      std::ofstream file(path, std::ios::binary | std::ios::trunc);
      if (!file) throw Error("cannot write " + path.string());
      file.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
      file.close();
      res_.files.push_back(path.string());
    }
    res_.bytes_written += bytes.size();
  }
}

RecvResult ReceiverSession::run() {
  handshake();
  t0_ = clock_type::now();
  auto window_next =
      t0_ + std::chrono::duration_cast<clock_type::duration>(
                std::chrono::duration<double>(cfg_.window_s));
  auto last_activity = t0_;
  std::vector<std::uint8_t> buf(kHeaderSize + 65536);

  for (;;) {
    const auto now = clock_type::now();
    const auto idle_deadline =
        last_activity + std::chrono::duration_cast<clock_type::duration>(
                            std::chrono::duration<double>(cfg_.idle_timeout_s));
    if (now >= idle_deadline)
      throw TransferAbortedError("session idle timeout");
    auto until = std::min(window_next, idle_deadline);
    int timeout_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(until - now)
            .count());
    timeout_ms = std::clamp(timeout_ms, 0, 200);

    pollfd fds[2] = {{udp_.fd(), POLLIN, 0}, {control_.fd(), POLLIN, 0}};
    ::poll(fds, 2, timeout_ms);

    if (fds[0].revents & POLLIN) {
      int len;
      while ((len = udp_.recv(buf.data(), buf.size(), 0)) >= 0)
        handle_datagram(buf.data(), static_cast<std::size_t>(len));
      last_activity = clock_type::now();
    }
    if (fds[1].revents & (POLLIN | POLLHUP)) {
      while (auto msg = control_.receive(0)) {
        last_activity = clock_type::now();
        const std::string type = msg->value("type", "");
        bool finished = false;
        if (type == "end")
          finished = handle_end(*msg);
        else if (type == "close")
          finished = handle_close(*msg);
        else if (!type.empty() && type != "lambda")
          throw TransferAbortedError("unexpected control message: " + type);
        if (finished) {
          res_.elapsed_s = elapsed();
          if (checksum_failure_)
            throw DecodeError("level checksum mismatch after reassembly");
          return res_;
        }
      }
    }
    if (clock_type::now() >= window_next) {
      send_lambda_report();
      window_next += std::chrono::duration_cast<clock_type::duration>(
          std::chrono::duration<double>(cfg_.window_s));
    }
  }
}

}  // namespace

RecvResult run_receiver(const RecvConfig& config) {
  ReceiverSession session(config);
  return session.run();
}

}  // namespace janus::transport
