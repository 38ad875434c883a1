#include "janus/transport/sender.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <deque>
#include <list>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "janus/erasure.hpp"
#include "janus/errors.hpp"
#include "janus/reliability.hpp"
#include "janus/transport/control.hpp"
#include "janus/transport/socket.hpp"
#include "janus/transport/wire.hpp"

namespace janus::transport {

using nlohmann::json;
using clock_type = std::chrono::steady_clock;

std::string SendResult::to_json() const {
  json j;
  j["complete"] = complete;
  j["levels_sent"] = levels_sent;
  j["levels_delivered"] = levels_delivered;
  j["rounds"] = rounds;
  j["packets_sent"] = packets_sent;
  j["packets_suppressed"] = packets_suppressed;
  j["data_fragments"] = data_fragments;
  j["parity_fragments"] = parity_fragments;
  j["elapsed_s"] = elapsed_s;
  j["achieved_error_bound"] = achieved_error_bound;
  j["lambda_updates"] = json::array();
  for (const auto& s : lambda_updates)
    j["lambda_updates"].push_back(
        {{"time_s", s.time_s}, {"lambda_hat", s.lambda_hat}});
  return j.dump(2);
}

namespace {

struct GroupMeta {
  std::uint64_t offset = 0;
  std::uint8_t k = 0;
  std::uint8_t m = 0;
};

constexpr std::size_t kParityCacheGroups = 4096;

class SenderSession {
 public:
  static const NetworkParams& checked(const NetworkParams& params) {
    params.validate();
    return params;
  }

  SenderSession(const Manifest& manifest,
                const std::vector<std::vector<std::uint8_t>>& levels,
                const SendConfig& config)
      : manifest_(manifest),
        payload_(levels),
        cfg_(config),
        shim_(config.shim),
        eval_(checked(config.params)) {
    manifest_.validate();
    if (cfg_.protocol.type == ProtocolSpec::Type::tcp_baseline)
      throw ConfigError("tcp-baseline exists only in the simulator");
    if (payload_.size() != manifest_.levels.size())
      throw ConfigError("payload level count does not match manifest");
    for (std::size_t i = 0; i < payload_.size(); ++i)
      if (payload_[i].size() != manifest_.levels[i].size_bytes)
        throw ConfigError("payload size does not match manifest level");
    s_ = cfg_.params.fragment_size;
    n_ = static_cast<int>(cfg_.params.group_size);
    rate_ = cfg_.params.effective_rate();
  }

  SendResult run();

 private:
  double elapsed() const {
    return std::chrono::duration<double>(clock_type::now() - t0_).count();
  }

  void setup_plan();
  bool work() const;
  void form_group();
  void emit_one();
  void send_fragment(int level, std::uint32_t ftg, int frag,
                     const GroupMeta& meta);
  const std::vector<std::vector<std::uint8_t>>& parity_for(
      int level, std::uint32_t ftg, const GroupMeta& meta);
  void fill_data_fragment(int level, const GroupMeta& meta, int frag,
                          std::uint8_t* out);
  void handle_lambda(const json& msg);
  json await_adjudication();
  void run_pass();
  std::uint64_t remaining_new_bytes() const;
  void replan_deadline(double lambda_hat);

  Manifest manifest_;
  const std::vector<std::vector<std::uint8_t>>& payload_;
  SendConfig cfg_;
  LossShim shim_;

  UdpSocket udp_;
  ControlChannel control_;
  std::uint16_t data_port_ = 0;

  std::uint64_t s_ = 0;
  int n_ = 0;
  double rate_ = 0.0;
  clock_type::time_point t0_;

  HierarchySpec hier_;
  UnrecoverabilityEvaluator eval_;
  int levels_planned_ = 0;
  std::vector<int> plan_m_;
  std::vector<std::uint64_t> bytes_left_;
  std::vector<std::uint64_t> byte_cursor_;
  std::vector<std::vector<GroupMeta>> groups_;
  bool have_group_ = false;
  int g_level_ = 0;
  std::uint32_t g_index_ = 0;
  int g_frag_ = 0;
  std::deque<std::pair<int, std::uint32_t>> retx_;
  int round_ = 1;

  // parity LRU: key -> (fragments, position in use order)
  std::unordered_map<std::uint64_t,
                     std::pair<std::vector<std::vector<std::uint8_t>>,
                               std::list<std::uint64_t>::iterator>>
      parity_cache_;
  std::list<std::uint64_t> parity_lru_;

  std::uint64_t global_seq_ = 0;
  std::vector<std::uint8_t> txbuf_;
  SendResult res_;
};

void SenderSession::setup_plan() {
  hier_ = manifest_.hierarchy();
  const int total = hier_.level_count();
  switch (cfg_.protocol.type) {
    case ProtocolSpec::Type::udp_static_ec:
      if (!cfg_.protocol.m_vector.empty()) {
        levels_planned_ = std::min<int>(
            total, static_cast<int>(cfg_.protocol.m_vector.size()));
        plan_m_.assign(cfg_.protocol.m_vector.begin(),
                       cfg_.protocol.m_vector.begin() + levels_planned_);
      } else {
        levels_planned_ = total;
        plan_m_.assign(total, cfg_.protocol.m);
      }
      break;
    case ProtocolSpec::Type::adaptive_error_bound: {
      levels_planned_ = required_levels(hier_, cfg_.protocol.error_bound);
      const int m0 =
          optimize_parity_for_min_time(hier_.total_bytes(levels_planned_),
                                       cfg_.params,
                                       cfg_.protocol.initial_lambda, &eval_)
              .parity;
      plan_m_.assign(levels_planned_, m0);
      break;
    }
    case ProtocolSpec::Type::adaptive_deadline: {
      DeadlinePlan plan = optimize_parity_for_min_error(
          hier_, cfg_.params, cfg_.protocol.initial_lambda,
          cfg_.protocol.deadline_s, SolverMode::automatic, &eval_);
      levels_planned_ = plan.levels_sent;
      plan_m_ = plan.plan.parity;
      break;
    }
    case ProtocolSpec::Type::tcp_baseline:
      break;  // rejected in the constructor
  }
  for (int m : plan_m_)
    if (m < 0 || m > n_ / 2) throw ConfigError("parity out of range");
  bytes_left_.resize(levels_planned_);
  byte_cursor_.assign(levels_planned_, 0);
  for (int i = 0; i < levels_planned_; ++i)
    bytes_left_[i] = hier_.levels[i].size_bytes;
  groups_.assign(levels_planned_, {});
  res_.levels_sent = levels_planned_;
}

std::uint64_t SenderSession::remaining_new_bytes() const {
  std::uint64_t sum = 0;
  for (int i = 0; i < levels_planned_; ++i) sum += bytes_left_[i];
  return sum;
}

bool SenderSession::work() const {
  if (have_group_ || !retx_.empty()) return true;
  for (int i = 0; i < levels_planned_; ++i)
    if (bytes_left_[i] > 0) return true;
  return false;
}

void SenderSession::form_group() {
  if (!retx_.empty()) {
    const auto [level, ftg] = retx_.front();
    retx_.pop_front();
    g_level_ = level;
    g_index_ = ftg;
    g_frag_ = 0;
    have_group_ = true;
    return;
  }
  for (int i = 0; i < levels_planned_; ++i) {
    if (bytes_left_[i] == 0) continue;
    const int m = plan_m_[i];
    const int k = n_ - m;
    GroupMeta meta;
    meta.offset = byte_cursor_[i];
    meta.k = static_cast<std::uint8_t>(k);
    meta.m = static_cast<std::uint8_t>(m);
    const std::uint64_t take =
        std::min<std::uint64_t>(bytes_left_[i],
                                static_cast<std::uint64_t>(k) * s_);
    byte_cursor_[i] += take;
    bytes_left_[i] -= take;
    g_level_ = i;
    g_index_ = static_cast<std::uint32_t>(groups_[i].size());
    groups_[i].push_back(meta);
    g_frag_ = 0;
    have_group_ = true;
    return;
  }
}

void SenderSession::fill_data_fragment(int level, const GroupMeta& meta,
                                       int frag, std::uint8_t* out) {
  const auto& bytes = payload_[level];
  const std::uint64_t off =
      meta.offset + static_cast<std::uint64_t>(frag) * s_;
  std::uint64_t avail = 0;
  if (off < bytes.size())
    avail = std::min<std::uint64_t>(s_, bytes.size() - off);
  if (avail > 0) std::memcpy(out, bytes.data() + off, avail);
  if (avail < s_) std::memset(out + avail, 0, s_ - avail);
}

const std::vector<std::vector<std::uint8_t>>& SenderSession::parity_for(
    int level, std::uint32_t ftg, const GroupMeta& meta) {
  const std::uint64_t key =
      (static_cast<std::uint64_t>(level) << 32) | ftg;
  auto it = parity_cache_.find(key);
  if (it != parity_cache_.end()) {
    parity_lru_.splice(parity_lru_.begin(), parity_lru_, it->second.second);
    return it->second.first;
  }
  const int k = meta.k, m = meta.m;
  std::vector<std::vector<std::uint8_t>> data(
      k, std::vector<std::uint8_t>(s_));
  std::vector<const std::uint8_t*> data_ptr(k);
  for (int f = 0; f < k; ++f) {
    fill_data_fragment(level, meta, f, data[f].data());
    data_ptr[f] = data[f].data();
  }
  std::vector<std::vector<std::uint8_t>> parity(
      m, std::vector<std::uint8_t>(s_));
  std::vector<std::uint8_t*> parity_ptr(m);
  for (int p = 0; p < m; ++p) parity_ptr[p] = parity[p].data();
  GroupCode(k, m).encode(data_ptr.data(), parity_ptr.data(), s_);

  if (parity_cache_.size() >= kParityCacheGroups) {
    const std::uint64_t victim = parity_lru_.back();
    parity_lru_.pop_back();
    parity_cache_.erase(victim);
  }
  parity_lru_.push_front(key);
  auto [ins, ok] =
      parity_cache_.emplace(key, std::make_pair(std::move(parity),
                                                parity_lru_.begin()));
  (void)ok;
  return ins->second.first;
}

void SenderSession::send_fragment(int level, std::uint32_t ftg, int frag,
                                  const GroupMeta& meta) {
  FragmentHeader h;
  h.level = static_cast<std::uint8_t>(level);
  h.ftg_index = ftg;
  h.fragment_index = static_cast<std::uint8_t>(frag);
  h.k = meta.k;
  h.m = meta.m;
  h.global_seq = global_seq_++;
  h.payload_len = static_cast<std::uint16_t>(s_);

  txbuf_.resize(kHeaderSize + s_);
  encode_header(h, txbuf_.data());
  std::uint8_t* body = txbuf_.data() + kHeaderSize;
  if (frag < meta.k) {
    fill_data_fragment(level, meta, frag, body);
    ++res_.data_fragments;
  } else {
    const auto& parity = parity_for(level, ftg, meta);
    std::memcpy(body, parity[frag - meta.k].data(), s_);
    ++res_.parity_fragments;
  }
  ++res_.packets_sent;
  if (shim_.should_drop(h.global_seq)) {
    ++res_.packets_suppressed;
    return;
  }
  udp_.send_to(cfg_.host, data_port_, txbuf_.data(), txbuf_.size());
}

void SenderSession::emit_one() {
  if (!have_group_) form_group();
  const GroupMeta& meta = groups_[g_level_][g_index_];
  send_fragment(g_level_, g_index_, g_frag_, meta);
  if (++g_frag_ >= meta.k + meta.m) have_group_ = false;
}

void SenderSession::handle_lambda(const json& msg) {
  const double lambda_hat = msg.value("lambda_hat", 0.0);
  res_.lambda_updates.push_back({elapsed(), lambda_hat});
  if (cfg_.protocol.type == ProtocolSpec::Type::adaptive_error_bound) {
    if (remaining_new_bytes() == 0) return;
    const int m = optimize_parity_for_min_time(remaining_new_bytes(),
                                               cfg_.params, lambda_hat,
                                               &eval_)
                      .parity;
    for (int i = 0; i < levels_planned_; ++i) plan_m_[i] = m;
  } else if (cfg_.protocol.type == ProtocolSpec::Type::adaptive_deadline) {
    replan_deadline(lambda_hat);
  }
}

void SenderSession::replan_deadline(double lambda_hat) {
  std::vector<int> ids;
  HierarchySpec rest;
  for (int i = 0; i < levels_planned_; ++i) {
    if (bytes_left_[i] > 0) {
      ids.push_back(i);
      rest.levels.push_back({bytes_left_[i], hier_.levels[i].error_bound});
    }
  }
  if (ids.empty()) return;
  const int pending =
      have_group_ ? (groups_[g_level_][g_index_].k +
                     groups_[g_level_][g_index_].m - g_frag_)
                  : 0;
  const double budget = cfg_.protocol.deadline_s - elapsed() -
                        (pending + 1) / rate_;
  const double prior =
      ids[0] == 0 ? 1.0 : hier_.levels[ids[0] - 1].error_bound;
  try {
    MinErrorPlan plan = solve_min_error_for_levels(
        rest, static_cast<int>(rest.levels.size()), cfg_.params, lambda_hat,
        budget, SolverMode::automatic, &eval_, prior);
    for (std::size_t i = 0; i < ids.size(); ++i)
      plan_m_[ids[i]] = plan.parity[i];
  } catch (const Error&) {
    // keep the current allocation
  }
}

void SenderSession::run_pass() {
  const auto burst_start = clock_type::now();
  std::uint64_t count = 0;
  while (work()) {
    // control messages may retune the plan between fragments
    while (auto msg = control_.receive(0)) {
      const std::string type = msg->value("type", "");
      if (type == "lambda")
        handle_lambda(*msg);
      else
        throw TransferAbortedError("unexpected control message: " + type);
    }
    const auto target =
        burst_start + std::chrono::duration_cast<clock_type::duration>(
                          std::chrono::duration<double>(count / rate_));
    auto now = clock_type::now();
    if (target > now)
      std::this_thread::sleep_for(target - now);
    emit_one();
    ++count;
  }
}

json SenderSession::await_adjudication() {
  json end;
  end["type"] = "end";
  end["round"] = round_;
  end["last_seq"] = global_seq_;
  end["levels"] = levels_planned_;
  json totals = json::array();
  for (int i = 0; i < levels_planned_; ++i) totals.push_back(groups_[i].size());
  end["totals"] = std::move(totals);
  control_.send(end);

  const auto deadline =
      clock_type::now() +
      std::chrono::duration_cast<clock_type::duration>(
          std::chrono::duration<double>(cfg_.ack_timeout_s));
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - clock_type::now())
                          .count();
    if (left < 0)
      throw TransferAbortedError("receiver did not adjudicate in time");
    auto msg = control_.receive(static_cast<int>(left));
    if (!msg) continue;
    const std::string type = msg->value("type", "");
    if (type == "lambda") {
      handle_lambda(*msg);
      continue;
    }
    if (type == "retransmit" || type == "complete") return *msg;
    throw TransferAbortedError("unexpected control message: " + type);
  }
}

SendResult SenderSession::run() {
  control_ = ControlChannel(TcpStream::connect(
      cfg_.host, cfg_.control_port,
      static_cast<int>(cfg_.connect_timeout_s * 1000)));
  udp_ = UdpSocket::open();

  json hello;
  hello["type"] = "hello";
  hello["version"] = 1;
  hello["mode"] = cfg_.protocol.name();
  hello["fragment_size"] = s_;
  hello["group_size"] = n_;
  hello["seed"] = manifest_.seed;
  json levels = json::array();
  for (const auto& lv : manifest_.levels)
    levels.push_back({{"size_bytes", lv.size_bytes},
                      {"error_bound", lv.error_bound},
                      {"checksum", lv.checksum}});
  hello["levels"] = std::move(levels);
  control_.send(hello);

  auto ack = control_.receive(static_cast<int>(cfg_.connect_timeout_s * 1000));
  if (!ack) throw TransferAbortedError("no hello-ack from receiver");
  if (ack->value("type", "") != "hello-ack")
    throw TransferAbortedError("bad handshake reply");
  data_port_ = ack->at("udp_port").get<std::uint16_t>();

  t0_ = clock_type::now();
  setup_plan();

  for (;;) {
    run_pass();
    json reply = await_adjudication();
    if (reply.value("type", "") == "complete") {
      res_.complete = true;
      res_.levels_delivered = reply.value("levels_complete", levels_planned_);
      res_.achieved_error_bound =
          res_.levels_delivered == 0
              ? 1.0
              : hier_.levels[res_.levels_delivered - 1].error_bound;
      control_.send({{"type", "close"}, {"status", "ok"}});
      break;
    }
    // retransmission round
    res_.levels_delivered = reply.value("levels_complete", 0);
    const auto& groups = reply.at("groups");
    if (cfg_.protocol.type == ProtocolSpec::Type::adaptive_deadline &&
        elapsed() >= cfg_.protocol.deadline_s) {
      control_.send({{"type", "close"}, {"status", "deadline"}});
      auto fin = control_.receive(5000);
      if (fin && fin->value("type", "") == "complete")
        res_.levels_delivered =
            fin->value("levels_complete", res_.levels_delivered);
      res_.achieved_error_bound =
          res_.levels_delivered == 0
              ? 1.0
              : hier_.levels[res_.levels_delivered - 1].error_bound;
      break;
    }
    if (round_ >= cfg_.max_rounds) {
      control_.send({{"type", "close"}, {"status", "aborted"}});
      throw TransferAbortedError("round cap exhausted");
    }
    for (const auto& g : groups)
      retx_.push_back({g.at(0).get<int>(), g.at(1).get<std::uint32_t>()});
    ++round_;
    res_.rounds = round_;
  }
  res_.elapsed_s = elapsed();
  return res_;
}

}  // namespace

SendResult run_sender(const Manifest& manifest,
                      const std::vector<std::vector<std::uint8_t>>& levels,
                      const SendConfig& config) {
  SenderSession session(manifest, levels, config);
  return session.run();
}

}  // namespace janus::transport
