#include "janus/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "janus/errors.hpp"
#include "janus/reliability.hpp"
#include "janus/rng.hpp"

namespace janus {

using nlohmann::json;

LossModelSpec LossModelSpec::static_rate_of(double lambda) {
  LossModelSpec spec;
  spec.type = Type::static_rate;
  spec.lambda = lambda;
  return spec;
}

LossModelSpec LossModelSpec::default_hmm(double transition_rate) {
  LossModelSpec spec;
  spec.type = Type::hmm;
  spec.transition_rate = transition_rate;
  spec.states = {{19.0, 2.0}, {383.0, 40.0}, {957.0, 100.0}};
  return spec;
}

std::string ProtocolSpec::name() const {
  switch (type) {
    case Type::tcp_baseline: return "tcp-baseline";
    case Type::udp_static_ec: return "udp-static-ec";
    case Type::adaptive_error_bound: return "adaptive-error-bound";
    case Type::adaptive_deadline: return "adaptive-deadline";
  }
  return "?";
}

void Scenario::validate() const {
  if (version != kVersion) throw ConfigError("unsupported scenario version");
  hierarchy.validate();
  params.validate();
  const int half = static_cast<int>(params.group_size) / 2;
  switch (protocol.type) {
    case ProtocolSpec::Type::tcp_baseline:
      break;
    case ProtocolSpec::Type::udp_static_ec:
      if (!protocol.m_vector.empty()) {
        if (static_cast<int>(protocol.m_vector.size()) >
            hierarchy.level_count())
          throw ConfigError("parity vector longer than hierarchy");
        for (int m : protocol.m_vector)
          if (m < 0 || m > half) throw ConfigError("parity out of range");
      } else if (protocol.m < 0 || protocol.m > half) {
        throw ConfigError("parity out of range");
      }
      break;
    case ProtocolSpec::Type::adaptive_error_bound:
      if (!(protocol.error_bound > 0.0))
        throw ConfigError("adaptive protocol needs a positive error bound");
      break;
    case ProtocolSpec::Type::adaptive_deadline:
      if (!(protocol.deadline_s > 0.0))
        throw ConfigError("deadline must be positive");
      break;
  }
  if (loss.type == LossModelSpec::Type::static_rate) {
    if (!(loss.lambda >= 0.0)) throw ConfigError("loss rate must be >= 0");
  } else {
    if (loss.states.size() < 2)
      throw ConfigError("hmm loss model needs at least two states");
    if (!(loss.transition_rate > 0.0))
      throw ConfigError("hmm transition rate must be positive");
  }
  if (!(receiver_window_s > 0.0))
    throw ConfigError("receiver window must be positive");
}

std::string Scenario::to_json() const {
  json j;
  j["format"] = "janus-scenario";
  j["version"] = version;
  j["levels"] = json::array();
  for (const auto& lv : hierarchy.levels)
    j["levels"].push_back(
        {{"size_bytes", lv.size_bytes}, {"error_bound", lv.error_bound}});
  j["params"] = {{"latency_s", params.latency_s},
                 {"link_rate", params.link_rate},
                 {"ec_rate", params.ec_rate},
                 {"fragment_size", params.fragment_size},
                 {"group_size", params.group_size}};
  if (loss.type == LossModelSpec::Type::static_rate) {
    j["loss"] = {{"type", "static"}, {"lambda", loss.lambda}};
  } else {
    json states = json::array();
    for (const auto& st : loss.states)
      states.push_back({{"mean", st.mean}, {"stddev", st.stddev}});
    j["loss"] = {{"type", "hmm"},
                 {"transition_rate", loss.transition_rate},
                 {"states", states}};
  }
  json p;
  p["type"] = protocol.name();
  switch (protocol.type) {
    case ProtocolSpec::Type::tcp_baseline:
      break;
    case ProtocolSpec::Type::udp_static_ec:
      if (!protocol.m_vector.empty())
        p["m_vector"] = protocol.m_vector;
      else
        p["m"] = protocol.m;
      p["retransmit"] = protocol.retransmit;
      break;
    case ProtocolSpec::Type::adaptive_error_bound:
      p["error_bound"] = protocol.error_bound;
      p["initial_lambda"] = protocol.initial_lambda;
      break;
    case ProtocolSpec::Type::adaptive_deadline:
      p["deadline_s"] = protocol.deadline_s;
      p["initial_lambda"] = protocol.initial_lambda;
      break;
  }
  j["protocol"] = std::move(p);
  j["receiver_window_s"] = receiver_window_s;
  j["event_cap"] = event_cap;
  if (!forced_drops.empty()) j["forced_drops"] = forced_drops;
  return j.dump(2);
}

Scenario Scenario::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  try {
    if (j.value("format", "") != "janus-scenario")
      throw ConfigError("not a janus scenario");
    Scenario sc;
    sc.version = j.at("version").get<int>();
    for (const auto& lv : j.at("levels"))
      sc.hierarchy.levels.push_back({lv.at("size_bytes").get<std::uint64_t>(),
                                     lv.at("error_bound").get<double>()});
    const auto& p = j.at("params");
    sc.params.latency_s = p.at("latency_s").get<double>();
    sc.params.link_rate = p.at("link_rate").get<double>();
    sc.params.ec_rate = p.value("ec_rate", sc.params.link_rate);
    sc.params.fragment_size = p.at("fragment_size").get<std::uint32_t>();
    sc.params.group_size = p.at("group_size").get<std::uint32_t>();
    const auto& lo = j.at("loss");
    if (lo.at("type") == "static") {
      sc.loss.type = LossModelSpec::Type::static_rate;
      sc.loss.lambda = lo.at("lambda").get<double>();
    } else if (lo.at("type") == "hmm") {
      sc.loss.type = LossModelSpec::Type::hmm;
      sc.loss.transition_rate = lo.at("transition_rate").get<double>();
      for (const auto& st : lo.at("states"))
        sc.loss.states.push_back(
            {st.at("mean").get<double>(), st.at("stddev").get<double>()});
    } else {
      throw ConfigError("unknown loss model type");
    }
    const auto& pr = j.at("protocol");
    const std::string type = pr.at("type").get<std::string>();
    if (type == "tcp-baseline") {
      sc.protocol.type = ProtocolSpec::Type::tcp_baseline;
    } else if (type == "udp-static-ec") {
      sc.protocol.type = ProtocolSpec::Type::udp_static_ec;
      if (pr.contains("m_vector"))
        sc.protocol.m_vector = pr["m_vector"].get<std::vector<int>>();
      else
        sc.protocol.m = pr.at("m").get<int>();
      sc.protocol.retransmit = pr.value("retransmit", true);
    } else if (type == "adaptive-error-bound") {
      sc.protocol.type = ProtocolSpec::Type::adaptive_error_bound;
      sc.protocol.error_bound = pr.at("error_bound").get<double>();
      sc.protocol.initial_lambda = pr.value("initial_lambda", 0.0);
    } else if (type == "adaptive-deadline") {
      sc.protocol.type = ProtocolSpec::Type::adaptive_deadline;
      sc.protocol.deadline_s = pr.at("deadline_s").get<double>();
      sc.protocol.initial_lambda = pr.value("initial_lambda", 0.0);
    } else {
      throw ConfigError("unknown protocol type: " + type);
    }
    sc.receiver_window_s = j.value("receiver_window_s", 3.0);
    sc.event_cap = j.value("event_cap", std::uint64_t{50'000'000});
    if (j.contains("forced_drops"))
      sc.forced_drops = j["forced_drops"].get<std::vector<std::uint64_t>>();
    sc.validate();
    return sc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario field error: ") + e.what());
  }
}

std::string SimReport::to_json() const {
  json j;
  j["protocol"] = protocol;
  j["seed"] = seed;
  j["total_time_s"] = total_time_s;
  j["rounds"] = rounds;
  j["levels_delivered"] = levels_delivered;
  j["achieved_error_bound"] = achieved_error_bound;
  j["packets_sent"] = packets_sent;
  j["packets_lost"] = packets_lost;
  j["packets_delivered"] = packets_delivered;
  j["data_fragments_sent"] = data_fragments_sent;
  j["parity_fragments_sent"] = parity_fragments_sent;
  j["aborted"] = aborted;
  if (aborted) j["abort_reason"] = abort_reason;
  j["lambda_trace"] = json::array();
  for (const auto& s : lambda_trace)
    j["lambda_trace"].push_back(
        {{"time_s", s.time_s}, {"lambda_hat", s.lambda_hat}});
  j["retransmitted_groups_per_round"] = retransmitted_groups_per_round;
  j["first_round_lost_groups"] = json::array();
  for (const auto& [level, group] : first_round_lost_groups)
    j["first_round_lost_groups"].push_back({{"level", level},
                                            {"group", group}});
  return j.dump(2);
}

std::string SimReport::csv_header() {
  return "seed,protocol,total_time_s,rounds,levels_delivered,"
         "achieved_error_bound,packets_sent,packets_lost,packets_delivered,"
         "data_fragments_sent,parity_fragments_sent,aborted";
}

std::string SimReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << seed << ',' << protocol << ',' << total_time_s << ',' << rounds << ','
     << levels_delivered << ',' << achieved_error_bound << ',' << packets_sent
     << ',' << packets_lost << ',' << packets_delivered << ','
     << data_fragments_sent << ',' << parity_fragments_sent << ','
     << (aborted ? 1 : 0);
  return os.str();
}

namespace {

enum EventKind : int {
  kLossFire,
  kStateChange,
  kEmit,
  kArrival,
  kNotify,
  kWindowTimer,
  kAckArrival,
  kRtoCheck,
};

// Priorities order simultaneous events: loss postings precede arrivals so a
// loss event present "now" claims the arriving packet, and timers fire after
// any arrival carrying their acknowledgement.
constexpr int kPrioLoss = 0;
constexpr int kPrioArrival = 1;
constexpr int kPrioTimer = 2;

struct Event {
  double time;
  int prio;
  std::uint64_t order;
  EventKind kind;
  std::uint64_t a;
};

struct EventAfter {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    if (x.prio != y.prio) return x.prio > y.prio;
    return x.order > y.order;
  }
};

struct PacketInfo {
  std::int32_t level;       // 0-based; -1 for the tcp byte stream
  std::uint32_t group;
  std::uint8_t frag;
  std::uint8_t k;
  std::uint8_t m;
  std::int32_t round;
};

struct GroupState {
  std::uint8_t k = 0;
  std::uint8_t m = 0;
  std::int32_t round = 0;
  std::uint16_t received = 0;
  bool complete = false;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

class Engine {
 public:
  Engine(const Scenario& sc, std::uint64_t seed)
      : sc_(sc),
        net_(sc.params),
        seed_(seed),
        loss_rng_(mix_seed(seed, 0x10C5)),
        hmm_rng_(mix_seed(seed, 0x3A7E)),
        eval_(sc.params) {
    sc_.validate();
    t_ = net_.latency_s;
    r_ = net_.effective_rate();
    inv_r_ = 1.0 / r_;
    n_ = static_cast<int>(net_.group_size);
    s_ = net_.fragment_size;
    forced_.insert(sc_.forced_drops.begin(), sc_.forced_drops.end());
    rep_.protocol = sc_.protocol.name();
    rep_.seed = seed;
  }

  SimReport run();

 private:
  static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    return Rng::splitmix64(x);
  }

  void schedule(double time, int prio, EventKind kind, std::uint64_t a) {
    heap_.push(Event{time, prio, next_order_++, kind, a});
  }

  // --- loss process -----------------------------------------------------
  void start_loss();
  void arm_loss();
  void on_loss_fire();
  void on_state_change();
  bool check_drop(std::uint64_t seq);

  // --- sender machinery -------------------------------------------------
  bool is_udp() const {
    return sc_.protocol.type != ProtocolSpec::Type::tcp_baseline;
  }
  void wake_sender();
  void on_emit();
  void emit_udp();
  void emit_tcp();
  bool udp_work() const;
  bool tcp_work() const;
  void setup_plan();
  void udp_form_group();
  int current_parity(int level) const;
  std::uint64_t remaining_new_bytes() const;
  void on_lambda_update(double lambda_hat);
  void replan_deadline(double lambda_hat);

  // --- receiver machinery -----------------------------------------------
  void on_arrival(std::uint64_t pkt_index);
  void on_notify(std::uint64_t round);
  void on_window_timer();
  void deliver_udp(const PacketInfo& info);
  void adjudicate(int round);
  void finish(double total_time, int levels_complete);

  // --- tcp --------------------------------------------------------------
  void tcp_on_data(std::uint64_t seq);
  void on_ack(std::uint64_t next_expected);
  void on_rto(std::uint64_t seq);

  Scenario sc_;
  NetworkParams net_;
  std::uint64_t seed_;
  Rng loss_rng_;
  Rng hmm_rng_;
  UnrecoverabilityEvaluator eval_;

  double t_ = 0.0, r_ = 0.0, inv_r_ = 0.0;
  int n_ = 0;
  std::uint64_t s_ = 0;

  std::priority_queue<Event, std::vector<Event>, EventAfter> heap_;
  std::uint64_t next_order_ = 0;
  double now_ = 0.0;
  bool done_ = false;

  // loss state
  std::deque<double> pending_fires_;  // loss-event times awaiting an arrival
  bool gen_armed_ = false;
  double lambda_now_ = 0.0;
  int hmm_state_ = -1;
  std::unordered_set<std::uint64_t> forced_;

  // emission pacing
  double burst_base_ = 0.0;
  std::uint64_t burst_count_ = 0;
  double last_emit_ = -kInf;
  bool emitting_ = false;
  std::uint64_t next_seq_ = 0;
  std::vector<PacketInfo> packets_;

  // udp sender
  int levels_planned_ = 0;
  std::vector<int> plan_m_;          // per level, current allocation
  std::vector<char> dropped_;        // level abandoned by a deadline replan
  std::vector<std::uint64_t> bytes_left_;
  std::vector<std::vector<std::uint8_t>> group_m_;  // m of every formed group
  bool have_group_ = false;
  PacketInfo cur_group_{};
  int cur_frag_ = 0;
  std::deque<std::pair<int, std::uint64_t>> retx_queue_;
  int round_ = 1;
  double deadline_ = kInf;

  // udp receiver
  std::vector<std::vector<GroupState>> rx_groups_;
  std::vector<std::uint64_t> rx_totals_;       // group count per level (0 =
                                               // unknown until notified)
  std::vector<std::uint64_t> rx_complete_;
  std::uint64_t highest_seq_plus1_ = 0;
  std::uint64_t lost_window_ = 0;
  bool adaptive_ = false;
  int window_index_ = 0;

  // tcp state
  std::uint64_t tcp_total_ = 0;
  std::uint64_t tcp_next_new_ = 0;
  std::int64_t tcp_cum_acked_ = -1;
  int tcp_dup_ = 0;
  std::deque<std::uint64_t> tcp_retx_;
  std::vector<bool> tcp_retx_pending_;
  double tcp_cwnd_ = 10.0;
  double tcp_ssthresh_ = 1e18;
  std::uint64_t tcp_expect_ = 0;
  std::vector<bool> tcp_rcvd_;
  std::uint64_t tcp_rcv_count_ = 0;

  SimReport rep_;
};

void Engine::start_loss() {
  if (sc_.loss.type == LossModelSpec::Type::static_rate) {
    lambda_now_ = sc_.loss.lambda;
  } else {
    hmm_state_ =
        static_cast<int>(hmm_rng_.uniform_below(sc_.loss.states.size()));
    const auto& st = sc_.loss.states[hmm_state_];
    lambda_now_ = std::max(0.0, hmm_rng_.gaussian(st.mean, st.stddev));
    schedule(now_ + hmm_rng_.exponential(sc_.loss.transition_rate),
             kPrioTimer, kStateChange, 0);
  }
  arm_loss();
}

void Engine::arm_loss() {
  if (gen_armed_) return;
  if (lambda_now_ <= 0.0) return;
  schedule(now_ + loss_rng_.exponential(lambda_now_), kPrioLoss, kLossFire, 0);
  gen_armed_ = true;
}

void Engine::on_loss_fire() {
  gen_armed_ = false;
  pending_fires_.push_back(now_);
  arm_loss();
}

void Engine::on_state_change() {
  const std::size_t count = sc_.loss.states.size();
  // move to a uniformly chosen different state
  const auto step = 1 + hmm_rng_.uniform_below(count - 1);
  hmm_state_ = static_cast<int>((hmm_state_ + step) % count);
  const auto& st = sc_.loss.states[hmm_state_];
  lambda_now_ = std::max(0.0, hmm_rng_.gaussian(st.mean, st.stddev));
  schedule(now_ + hmm_rng_.exponential(sc_.loss.transition_rate), kPrioTimer,
           kStateChange, 0);
  arm_loss();
}

bool Engine::check_drop(std::uint64_t seq) {
  // A loss event destroys the packet occupying the wire when it fires; a
  // packet arriving at `now_` occupied the wire for the preceding
  // transmission slot.  Older pending events hit an idle wire and evaporate.
  bool hit = false;
  while (!pending_fires_.empty() && pending_fires_.front() <= now_) {
    if (pending_fires_.front() > now_ - inv_r_) hit = true;
    pending_fires_.pop_front();
  }
  if (hit) return true;
  if (!forced_.empty()) {
    auto it = forced_.find(seq);
    if (it != forced_.end()) {
      forced_.erase(it);
      return true;
    }
  }
  return false;
}

int Engine::current_parity(int level) const { return plan_m_[level]; }

std::uint64_t Engine::remaining_new_bytes() const {
  std::uint64_t sum = 0;
  for (int i = 0; i < levels_planned_; ++i) sum += bytes_left_[i];
  return sum;
}

void Engine::setup_plan() {
  const int total_levels = sc_.hierarchy.level_count();
  switch (sc_.protocol.type) {
    case ProtocolSpec::Type::tcp_baseline: {
      std::uint64_t bytes = sc_.hierarchy.total_bytes();
      tcp_total_ = (bytes + s_ - 1) / s_;
      tcp_rcvd_.assign(tcp_total_, false);
      tcp_retx_pending_.assign(tcp_total_, false);
      return;
    }
    case ProtocolSpec::Type::udp_static_ec: {
      if (!sc_.protocol.m_vector.empty()) {
        levels_planned_ = static_cast<int>(sc_.protocol.m_vector.size());
        plan_m_ = sc_.protocol.m_vector;
      } else {
        levels_planned_ = total_levels;
        plan_m_.assign(levels_planned_, sc_.protocol.m);
      }
      break;
    }
    case ProtocolSpec::Type::adaptive_error_bound: {
      levels_planned_ =
          required_levels(sc_.hierarchy, sc_.protocol.error_bound);
      const int m0 = optimize_parity_for_min_time(
                         sc_.hierarchy.total_bytes(levels_planned_), net_,
                         sc_.protocol.initial_lambda, &eval_)
                         .parity;
      plan_m_.assign(levels_planned_, m0);
      adaptive_ = true;
      break;
    }
    case ProtocolSpec::Type::adaptive_deadline: {
      deadline_ = sc_.protocol.deadline_s;
      DeadlinePlan plan = optimize_parity_for_min_error(
          sc_.hierarchy, net_, sc_.protocol.initial_lambda, deadline_,
          SolverMode::automatic, &eval_);
      levels_planned_ = plan.levels_sent;
      plan_m_ = plan.plan.parity;
      adaptive_ = true;
      break;
    }
  }
  bytes_left_.resize(levels_planned_);
  for (int i = 0; i < levels_planned_; ++i)
    bytes_left_[i] = sc_.hierarchy.levels[i].size_bytes;
  group_m_.assign(levels_planned_, {});
  dropped_.assign(levels_planned_, 0);
  rx_groups_.assign(levels_planned_, {});
  rx_totals_.assign(levels_planned_, 0);
  rx_complete_.assign(levels_planned_, 0);
}

bool Engine::udp_work() const {
  if (have_group_) return true;
  if (!retx_queue_.empty()) return true;
  for (int i = 0; i < levels_planned_; ++i)
    if (bytes_left_[i] > 0 && !dropped_[i]) return true;
  return false;
}

bool Engine::tcp_work() const {
  if (!tcp_retx_.empty()) return true;
  const auto outstanding =
      static_cast<double>(tcp_next_new_) - (tcp_cum_acked_ + 1);
  return tcp_next_new_ < tcp_total_ && outstanding < tcp_cwnd_;
}

void Engine::wake_sender() {
  if (done_ || emitting_) return;
  const bool work = is_udp() ? udp_work() : tcp_work();
  if (!work) return;
  const double start = std::max(now_, last_emit_ + inv_r_);
  burst_base_ = start;
  burst_count_ = 0;
  emitting_ = true;
  schedule(start, kPrioTimer, kEmit, 0);
}

void Engine::udp_form_group() {
  for (int i = 0; i < levels_planned_; ++i) {
    if (bytes_left_[i] == 0 || dropped_[i]) continue;
    const int m = current_parity(i);
    const int k = n_ - m;
    const std::uint64_t chunk = static_cast<std::uint64_t>(k) * s_;
    bytes_left_[i] -= std::min(bytes_left_[i], chunk);
    cur_group_.level = i;
    cur_group_.group = static_cast<std::uint32_t>(group_m_[i].size());
    group_m_[i].push_back(static_cast<std::uint8_t>(m));
    cur_group_.k = static_cast<std::uint8_t>(k);
    cur_group_.m = static_cast<std::uint8_t>(m);
    cur_group_.round = round_;
    cur_frag_ = 0;
    have_group_ = true;
    return;
  }
}

void Engine::emit_udp() {
  if (!have_group_) {
    if (!retx_queue_.empty()) {
      const auto [level, group] = retx_queue_.front();
      retx_queue_.pop_front();
      const int m = group_m_[level][group];
      cur_group_ = PacketInfo{level, static_cast<std::uint32_t>(group), 0,
                              static_cast<std::uint8_t>(n_ - m),
                              static_cast<std::uint8_t>(m), round_};
      cur_frag_ = 0;
      have_group_ = true;
    } else {
      udp_form_group();
    }
  }

  PacketInfo info = cur_group_;
  info.frag = static_cast<std::uint8_t>(cur_frag_);
  if (++cur_frag_ >= n_) have_group_ = false;

  const std::uint64_t seq = next_seq_++;
  packets_.push_back(info);
  ++rep_.packets_sent;
  if (info.frag < info.k)
    ++rep_.data_fragments_sent;
  else
    ++rep_.parity_fragments_sent;
  schedule(now_ + t_, kPrioArrival, kArrival, seq);

  if (udp_work()) {
    ++burst_count_;
    schedule(burst_base_ + static_cast<double>(burst_count_) / r_, kPrioTimer,
             kEmit, 0);
  } else {
    emitting_ = false;
    // end of round: completion notice rides behind the last fragment
    schedule(now_ + t_, kPrioArrival, kNotify,
             static_cast<std::uint64_t>(round_));
  }
}

void Engine::emit_tcp() {
  std::uint64_t seq;
  if (!tcp_retx_.empty()) {
    seq = tcp_retx_.front();
    tcp_retx_.pop_front();
    tcp_retx_pending_[seq] = false;
  } else {
    seq = tcp_next_new_++;
  }
  const std::uint64_t emit_index = next_seq_++;
  ++rep_.packets_sent;
  ++rep_.data_fragments_sent;
  // arrival carries (emission index, stream sequence) packed together
  schedule(now_ + t_, kPrioArrival, kArrival, (emit_index << 32) | seq);
  schedule(now_ + 2.0 * t_, kPrioTimer, kRtoCheck, seq);

  if (tcp_work()) {
    ++burst_count_;
    schedule(burst_base_ + static_cast<double>(burst_count_) / r_, kPrioTimer,
             kEmit, 0);
  } else {
    emitting_ = false;
  }
}

void Engine::on_emit() {
  if (done_) {
    emitting_ = false;
    return;
  }
  const bool work = is_udp() ? udp_work() : tcp_work();
  if (!work) {
    emitting_ = false;
    return;
  }
  last_emit_ = now_;
  if (is_udp())
    emit_udp();
  else
    emit_tcp();
}

void Engine::on_arrival(std::uint64_t a) {
  if (is_udp()) {
    const std::uint64_t seq = a;
    if (check_drop(seq)) {
      ++rep_.packets_lost;
      return;
    }
    ++rep_.packets_delivered;
    // gap-based loss detection feeds the observed-rate windows
    if (seq + 1 > highest_seq_plus1_) {
      lost_window_ += seq - highest_seq_plus1_;
      highest_seq_plus1_ = seq + 1;
    }
    deliver_udp(packets_[seq]);
  } else {
    const std::uint64_t emit_index = a >> 32;
    const std::uint64_t seq = a & 0xFFFFFFFFULL;
    if (check_drop(emit_index)) {
      ++rep_.packets_lost;
      return;
    }
    ++rep_.packets_delivered;
    tcp_on_data(seq);
  }
}

void Engine::deliver_udp(const PacketInfo& info) {
  auto& groups = rx_groups_[info.level];
  if (groups.size() <= info.group) groups.resize(info.group + 1);
  GroupState& gs = groups[info.group];
  if (gs.complete) return;
  if (info.round > gs.round) {
    // a fresh incarnation supersedes any partial state
    gs.round = info.round;
    gs.received = 0;
    gs.k = info.k;
    gs.m = info.m;
  }
  if (gs.k == 0) {
    gs.k = info.k;
    gs.m = info.m;
  }
  ++gs.received;
  if (gs.received >= gs.k) {
    gs.complete = true;
    ++rx_complete_[info.level];
  }
}

void Engine::adjudicate(int round) {
  std::vector<std::pair<int, std::uint64_t>> lost;
  for (int i = 0; i < levels_planned_; ++i) {
    auto& groups = rx_groups_[i];
    if (groups.size() < rx_totals_[i]) groups.resize(rx_totals_[i]);
    for (std::uint64_t g = 0; g < rx_totals_[i]; ++g) {
      if (!groups[g].complete) lost.push_back({i, g});
    }
  }
  if (round == 1) rep_.first_round_lost_groups = lost;

  // The completion notice shares a timestamp with the round's final arrival,
  // so `now_` is exactly the wall time of the last packet in flight.
  if (lost.empty()) {
    finish(now_, levels_planned_);
    return;
  }
  const bool retransmit =
      sc_.protocol.type == ProtocolSpec::Type::adaptive_error_bound ||
      (sc_.protocol.type == ProtocolSpec::Type::udp_static_ec &&
       sc_.protocol.retransmit);
  if (!retransmit) {
    int prefix = 0;
    while (prefix < levels_planned_ &&
           rx_complete_[prefix] >= rx_totals_[prefix] &&
           rx_totals_[prefix] > 0)
      ++prefix;
    finish(now_, prefix);
    return;
  }
  // reply travels on the instantaneous reverse path; next round starts now
  rep_.retransmitted_groups_per_round.push_back(lost.size());
  round_ = round + 1;
  rep_.rounds = round_;
  for (const auto& [level, group] : lost) retx_queue_.push_back({level, group});
  wake_sender();
}

void Engine::finish(double total_time, int levels_complete) {
  done_ = true;
  rep_.total_time_s = total_time;
  rep_.levels_delivered = levels_complete;
  rep_.achieved_error_bound =
      levels_complete == 0
          ? 1.0
          : sc_.hierarchy.levels[levels_complete - 1].error_bound;
}

void Engine::on_notify(std::uint64_t round) {
  // tail losses: everything between the highest delivered sequence and the
  // final emitted one is known missing once the notice arrives
  const std::uint64_t last_plus1 = next_seq_;
  if (last_plus1 > highest_seq_plus1_) {
    lost_window_ += last_plus1 - highest_seq_plus1_;
    highest_seq_plus1_ = last_plus1;
  }
  for (int i = 0; i < levels_planned_; ++i)
    rx_totals_[i] = group_m_[i].size();
  adjudicate(static_cast<int>(round));
}

void Engine::on_window_timer() {
  if (done_) return;
  ++window_index_;
  const double lambda_hat =
      static_cast<double>(lost_window_) / sc_.receiver_window_s;
  lost_window_ = 0;
  rep_.lambda_trace.push_back({now_, lambda_hat});
  on_lambda_update(lambda_hat);  // instantaneous reverse control path
  schedule((window_index_ + 1) * sc_.receiver_window_s, kPrioTimer,
           kWindowTimer, 0);
}

void Engine::on_lambda_update(double lambda_hat) {
  if (sc_.protocol.type == ProtocolSpec::Type::adaptive_error_bound) {
    const std::uint64_t remaining = remaining_new_bytes();
    if (remaining == 0) return;
    const int m = optimize_parity_for_min_time(remaining, net_, lambda_hat,
                                               &eval_)
                      .parity;
    for (int i = 0; i < levels_planned_; ++i) plan_m_[i] = m;
  } else if (sc_.protocol.type == ProtocolSpec::Type::adaptive_deadline) {
    replan_deadline(lambda_hat);
  }
}

void Engine::replan_deadline(double lambda_hat) {
  // collect levels that still have ungrouped bytes
  std::vector<int> level_ids;
  HierarchySpec rest;
  for (int i = 0; i < levels_planned_; ++i) {
    if (bytes_left_[i] > 0) {
      level_ids.push_back(i);
      rest.levels.push_back(
          {bytes_left_[i], sc_.hierarchy.levels[i].error_bound});
    }
  }
  if (level_ids.empty()) return;

  const int pending =
      have_group_ ? (cur_group_.k + cur_group_.m - cur_frag_) : 0;
  const double budget =
      deadline_ - now_ - static_cast<double>(pending) * inv_r_ - inv_r_;
  const double prior =
      level_ids[0] == 0 ? 1.0
                        : sc_.hierarchy.levels[level_ids[0] - 1].error_bound;
  // Re-run the full planner on the remaining content: every feasible level
  // count is evaluated, so a tight budget can abandon deep levels to
  // concentrate parity on the shallow ones (and a later replan under a
  // calmer estimate can take them back).
  try {
    MinErrorPlan best;
    int best_l = 0;
    for (int l : feasible_level_counts(rest, net_, budget)) {
      MinErrorPlan plan = solve_min_error_for_levels(
          rest, l, net_, lambda_hat, budget, SolverMode::automatic, &eval_,
          prior);
      if (best_l == 0 || plan.expected_error < best.expected_error) {
        best = std::move(plan);
        best_l = l;
      }
    }
    if (best_l == 0) return;  // keep the current allocation
    for (std::size_t i = 0; i < level_ids.size(); ++i) {
      const bool keep = i < static_cast<std::size_t>(best_l);
      if (keep) plan_m_[level_ids[i]] = best.parity[i];
      dropped_[level_ids[i]] = keep ? 0 : 1;
    }
  } catch (const Error&) {
    // keep the current allocation; the existing schedule already fits
  }
}

void Engine::tcp_on_data(std::uint64_t seq) {
  if (!tcp_rcvd_[seq]) {
    tcp_rcvd_[seq] = true;
    ++tcp_rcv_count_;
    if (seq == tcp_expect_) {
      while (tcp_expect_ < tcp_total_ && tcp_rcvd_[tcp_expect_]) ++tcp_expect_;
    }
    if (tcp_rcv_count_ == tcp_total_) {
      finish(now_, sc_.hierarchy.level_count());
      return;
    }
  }
  schedule(now_ + t_, kPrioArrival, kAckArrival, tcp_expect_);
}

void Engine::on_ack(std::uint64_t next_expected) {
  if (done_) return;
  const std::int64_t acked = static_cast<std::int64_t>(next_expected) - 1;
  if (acked > tcp_cum_acked_) {
    const double delta = static_cast<double>(acked - tcp_cum_acked_);
    tcp_cum_acked_ = acked;
    tcp_dup_ = 0;
    if (tcp_cwnd_ < tcp_ssthresh_)
      tcp_cwnd_ += delta;  // slow start
    else
      tcp_cwnd_ += delta / tcp_cwnd_;
    wake_sender();
    return;
  }
  if (acked == tcp_cum_acked_) {
    if (++tcp_dup_ == 3) {
      tcp_dup_ = 0;
      const std::uint64_t missing = static_cast<std::uint64_t>(acked + 1);
      if (missing < tcp_next_new_ && !tcp_retx_pending_[missing]) {
        tcp_retx_pending_[missing] = true;
        tcp_retx_.push_front(missing);
        tcp_ssthresh_ = std::max(tcp_cwnd_ / 2.0, 2.0);
        tcp_cwnd_ = tcp_ssthresh_;
        wake_sender();
      }
    }
  }
}

void Engine::on_rto(std::uint64_t seq) {
  if (done_) return;
  if (static_cast<std::int64_t>(seq) <= tcp_cum_acked_) return;
  if (tcp_rcvd_[seq]) return;  // delivered but cumulative ack lags
  if (tcp_retx_pending_[seq]) return;
  tcp_retx_pending_[seq] = true;
  tcp_retx_.push_front(seq);
  tcp_ssthresh_ = std::max(tcp_cwnd_ / 2.0, 2.0);
  tcp_cwnd_ = 1.0;
  wake_sender();
}

SimReport Engine::run() {
  setup_plan();
  start_loss();
  if (adaptive_)
    schedule(sc_.receiver_window_s, kPrioTimer, kWindowTimer, 0);
  wake_sender();

  std::uint64_t processed = 0;
  while (!done_ && !heap_.empty()) {
    const Event ev = heap_.top();
    heap_.pop();
    now_ = ev.time;
    if (++processed > sc_.event_cap) {
      rep_.aborted = true;
      rep_.abort_reason = "event cap exceeded";
      rep_.total_time_s = now_;
      break;
    }
    switch (ev.kind) {
      case kLossFire: on_loss_fire(); break;
      case kStateChange: on_state_change(); break;
      case kEmit: on_emit(); break;
      case kArrival: on_arrival(ev.a); break;
      case kNotify: on_notify(ev.a); break;
      case kWindowTimer: on_window_timer(); break;
      case kAckArrival: on_ack(ev.a); break;
      case kRtoCheck: on_rto(ev.a); break;
    }
  }
  if (!done_ && !rep_.aborted) {
    rep_.aborted = true;
    rep_.abort_reason = "simulation stalled";
    rep_.total_time_s = now_;
  }
  return rep_;
}

}  // namespace

SimReport run_scenario(const Scenario& scenario, std::uint64_t seed) {
  Engine engine(scenario, seed);
  return engine.run();
}

}  // namespace janus
