#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "janus/errors.hpp"
#include "janus/manifest.hpp"
#include "janus/reliability.hpp"
#include "janus/simulator.hpp"

using namespace janus;

namespace {

Scenario mini_static(double lambda, int m) {
  Scenario sc;
  sc.hierarchy = preset_hierarchy("nyx-mini");
  sc.loss = LossModelSpec::static_rate_of(lambda);
  sc.protocol.type = ProtocolSpec::Type::udp_static_ec;
  sc.protocol.m = m;
  return sc;
}

}  // namespace

TEST_CASE("scenario JSON round trip") {
  Scenario sc = mini_static(383.0, 2);
  sc.forced_drops = {4, 99};
  sc.receiver_window_s = 0.25;
  const std::string text = sc.to_json();
  const Scenario back = Scenario::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.loss.lambda == 383.0);
  CHECK(back.protocol.m == 2);
  CHECK(back.forced_drops == std::vector<std::uint64_t>{4, 99});

  Scenario hmm = mini_static(0.0, 0);
  hmm.loss = LossModelSpec::default_hmm(2.0);
  hmm.protocol.type = ProtocolSpec::Type::adaptive_error_bound;
  hmm.protocol.error_bound = 6e-5;
  hmm.protocol.initial_lambda = 383.0;
  const Scenario hmm_back = Scenario::from_json(hmm.to_json());
  CHECK(hmm_back.to_json() == hmm.to_json());
  REQUIRE(hmm_back.loss.states.size() == 3);
  CHECK(hmm_back.loss.states[2].mean == 957.0);

  CHECK_THROWS_AS(Scenario::from_json("{"), ConfigError);
  CHECK_THROWS_AS(Scenario::from_json("{\"format\": \"other\"}"), ConfigError);
}

TEST_CASE("scenario validation") {
  Scenario sc = mini_static(19.0, 0);
  CHECK_NOTHROW(sc.validate());

  Scenario bad = sc;
  bad.protocol.m = 17;  // > n/2
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.protocol.m_vector = {0, 0, 0, 0, 0};  // longer than hierarchy
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.loss.lambda = -2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.protocol.type = ProtocolSpec::Type::adaptive_error_bound;
  bad.protocol.error_bound = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.protocol.type = ProtocolSpec::Type::adaptive_deadline;
  bad.protocol.deadline_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.receiver_window_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = sc;
  bad.loss = LossModelSpec::default_hmm(2.0);
  bad.loss.states.resize(1);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("lossless static transfer matches the deterministic schedule "
          "exactly") {
  // nyx-mini at m=0 packs into 6 / 22 / 45 / 148 groups.  [DERIVED]
  Scenario sc = mini_static(0.0, 0);
  const SimReport rep = run_scenario(sc, 1);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.rounds == 1);
  CHECK(rep.levels_delivered == 4);
  CHECK(rep.achieved_error_bound == 1e-7);
  CHECK(rep.packets_sent == 32 * 221);
  CHECK(rep.packets_lost == 0);
  CHECK(rep.packets_delivered == rep.packets_sent);
  CHECK(rep.parity_fragments_sent == 0);
  CHECK(rep.data_fragments_sent == rep.packets_sent);
  const std::vector<std::uint64_t> groups{6, 22, 45, 148};
  CHECK(rep.total_time_s == deterministic_total_time(groups, sc.params));
  CHECK(rep.first_round_lost_groups.empty());
  CHECK(rep.retransmitted_groups_per_round.empty());
}

TEST_CASE("lossless transfer with parity still ends at the last arrival") {
  // m=2 shrinks k to 30: 6 / 24 / 48 / 158 groups.  [DERIVED]
  Scenario sc = mini_static(0.0, 2);
  const SimReport rep = run_scenario(sc, 1);
  CHECK_FALSE(rep.aborted);
  const std::vector<std::uint64_t> groups{6, 24, 48, 158};
  CHECK(rep.total_time_s == deterministic_total_time(groups, sc.params));
  CHECK(rep.packets_sent == 32 * 236);
  CHECK(rep.parity_fragments_sent == 2 * 236);
  CHECK(rep.data_fragments_sent == 30 * 236);
}

TEST_CASE("identical seeds reproduce bit-identical reports") {
  Scenario sc = mini_static(383.0, 2);
  const SimReport a = run_scenario(sc, 42);
  const SimReport b = run_scenario(sc, 42);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.csv_row() == b.csv_row());

  const SimReport c = run_scenario(sc, 43);
  CHECK(a.to_json() != c.to_json());

  Scenario hmm = sc;
  hmm.loss = LossModelSpec::default_hmm(2.0);
  CHECK(run_scenario(hmm, 7).to_json() == run_scenario(hmm, 7).to_json());
}

TEST_CASE("packet conservation under random loss") {
  Scenario sc = mini_static(383.0, 2);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const SimReport rep = run_scenario(sc, seed);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.packets_sent == rep.packets_lost + rep.packets_delivered);
    CHECK(rep.packets_sent ==
          rep.data_fragments_sent + rep.parity_fragments_sent);
    CHECK(rep.levels_delivered == 4);  // retransmission guarantees delivery
    CHECK(rep.packets_lost > 0);       // 383 pkt/s over ~0.4 s must hit
  }
}

TEST_CASE("single forced drop is absorbed by one parity fragment") {
  Scenario sc = mini_static(0.0, 1);
  sc.forced_drops = {5};  // level 1, group 0, a data fragment
  const SimReport rep = run_scenario(sc, 1);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.rounds == 1);
  CHECK(rep.levels_delivered == 4);
  CHECK(rep.packets_lost == 1);
  CHECK(rep.first_round_lost_groups.empty());
  CHECK(rep.retransmitted_groups_per_round.empty());
}

TEST_CASE("unprotected forced drop triggers one retransmission round") {
  Scenario sc = mini_static(0.0, 0);
  sc.forced_drops = {0};  // level 1, group 0, fragment 0
  const SimReport rep = run_scenario(sc, 1);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.rounds == 2);
  CHECK(rep.levels_delivered == 4);
  CHECK(rep.packets_lost == 1);
  REQUIRE(rep.first_round_lost_groups.size() == 1);
  CHECK(rep.first_round_lost_groups[0].first == 0);   // 0-based level
  CHECK(rep.first_round_lost_groups[0].second == 0);  // group index
  CHECK(rep.retransmitted_groups_per_round ==
        std::vector<std::uint64_t>{1});
  CHECK(rep.packets_sent == 32 * 221 + 32);  // one group resent whole

  // round 1 ends at t + (32*221 - 1)/r; the retransmitted group then takes
  // 31/r more to stream out plus t to arrive
  const double round1 = 7071.0 / 19144.0 + 0.01;
  const double expect = round1 + 31.0 / 19144.0 + 0.01;
  CHECK(rep.total_time_s == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("two drops in one group overwhelm single parity") {
  Scenario sc = mini_static(0.0, 1);
  sc.forced_drops = {3, 7};  // same group (level 1 group 0 spans 0..31)
  const SimReport rep = run_scenario(sc, 1);
  CHECK(rep.rounds == 2);
  CHECK(rep.levels_delivered == 4);
  CHECK(rep.packets_lost == 2);
  REQUIRE(rep.first_round_lost_groups.size() == 1);
  CHECK(rep.first_round_lost_groups[0].first == 0);
  CHECK(rep.first_round_lost_groups[0].second == 0);
}

TEST_CASE("without retransmission delivery stops at the broken level") {
  // nyx-mini m=0: level boundaries at emissions 192 / 896 / 2336.
  Scenario sc = mini_static(0.0, 0);
  sc.protocol.retransmit = false;
  sc.forced_drops = {200};  // level 2, group 0
  const SimReport rep = run_scenario(sc, 1);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.rounds == 1);
  CHECK(rep.levels_delivered == 1);
  CHECK(rep.achieved_error_bound == 4e-3);
  REQUIRE(rep.first_round_lost_groups.size() == 1);
  CHECK(rep.first_round_lost_groups[0].first == 1);
  CHECK(rep.first_round_lost_groups[0].second == 0);

  // losing level 1 means nothing usable arrives
  Scenario sc2 = mini_static(0.0, 0);
  sc2.protocol.retransmit = false;
  sc2.forced_drops = {0};
  const SimReport rep2 = run_scenario(sc2, 1);
  CHECK(rep2.levels_delivered == 0);
  CHECK(rep2.achieved_error_bound == 1.0);
}

TEST_CASE("partial parity vector sends only those levels") {
  Scenario sc = mini_static(0.0, 0);
  sc.protocol.m_vector = {2, 2};
  const SimReport rep = run_scenario(sc, 1);
  CHECK(rep.levels_delivered == 2);
  CHECK(rep.achieved_error_bound == 5e-4);
  // 6 + 24 groups at k = 30.  [DERIVED]
  CHECK(rep.packets_sent == 32 * 30);
  const std::vector<std::uint64_t> groups{6, 24};
  CHECK(rep.total_time_s == deterministic_total_time(groups, sc.params));
}

TEST_CASE("adaptive error-bound sender tracks the observed loss rate") {
  Scenario sc = mini_static(0.0, 0);
  sc.loss = LossModelSpec::default_hmm(2.0);
  sc.protocol.type = ProtocolSpec::Type::adaptive_error_bound;
  sc.protocol.error_bound = 6e-5;  // three levels suffice
  sc.protocol.initial_lambda = 383.0;
  sc.receiver_window_s = 0.1;
  const SimReport rep = run_scenario(sc, 5);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.levels_delivered == 3);
  CHECK(rep.achieved_error_bound == 6e-5);
  CHECK(rep.protocol == "adaptive-error-bound");
  CHECK_FALSE(rep.lambda_trace.empty());
  for (std::size_t i = 0; i < rep.lambda_trace.size(); ++i) {
    CHECK(rep.lambda_trace[i].time_s ==
          doctest::Approx(0.1 * static_cast<double>(i + 1)).epsilon(1e-9));
    CHECK(rep.lambda_trace[i].lambda_hat >= 0.0);
  }

  // an unsatisfiable bound is rejected up front
  Scenario bad = sc;
  bad.protocol.error_bound = 1e-9;
  CHECK_THROWS_AS(run_scenario(bad, 1), UnsatisfiableBoundError);
}

TEST_CASE("adaptive deadline sender finishes inside its budget") {
  Scenario sc = mini_static(383.0, 0);
  sc.protocol.type = ProtocolSpec::Type::adaptive_deadline;
  sc.protocol.deadline_s = 0.5;
  sc.protocol.initial_lambda = 383.0;
  sc.receiver_window_s = 0.1;
  for (std::uint64_t seed : {1ULL, 2ULL, 9ULL}) {
    const SimReport rep = run_scenario(sc, seed);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.rounds == 1);  // deadline mode never retransmits
    CHECK(rep.total_time_s <= 0.5);
    CHECK(rep.levels_delivered >= 1);
    CHECK(rep.protocol == "adaptive-deadline");
  }

  Scenario hopeless = sc;
  hopeless.protocol.deadline_s = 0.011;  // budget below a single group
  CHECK_THROWS_AS(run_scenario(hopeless, 1), InfeasibleDeadlineError);
}

TEST_CASE("tcp baseline completes and retransmits under loss") {
  Scenario clean = mini_static(0.0, 0);
  clean.protocol.type = ProtocolSpec::Type::tcp_baseline;
  const SimReport rep = run_scenario(clean, 1);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.levels_delivered == 4);
  CHECK(rep.packets_lost == 0);
  // ceil(28703636 / 4096) = 7008 stream segments, none retransmitted.
  // [DERIVED]
  CHECK(rep.packets_sent == 7008);
  CHECK(rep.protocol == "tcp-baseline");

  Scenario lossy = mini_static(383.0, 0);
  lossy.protocol.type = ProtocolSpec::Type::tcp_baseline;
  const SimReport rl = run_scenario(lossy, 3);
  CHECK_FALSE(rl.aborted);
  CHECK(rl.levels_delivered == 4);
  CHECK(rl.packets_lost > 0);
  CHECK(rl.packets_sent > 7008);                      // retransmissions
  CHECK(rl.packets_sent >= rl.packets_delivered + rl.packets_lost);
  CHECK(rl.total_time_s > rep.total_time_s);
}

TEST_CASE("tcp slows down as the loss rate grows") {
  double mean_low = 0.0, mean_high = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Scenario a = mini_static(19.0, 0);
    a.protocol.type = ProtocolSpec::Type::tcp_baseline;
    mean_low += run_scenario(a, seed).total_time_s;
    Scenario b = mini_static(957.0, 0);
    b.protocol.type = ProtocolSpec::Type::tcp_baseline;
    mean_high += run_scenario(b, seed).total_time_s;
  }
  CHECK(mean_low < mean_high);
}

TEST_CASE("event cap aborts pathological runs") {
  Scenario sc = mini_static(383.0, 0);
  sc.event_cap = 100;
  const SimReport rep = run_scenario(sc, 1);
  CHECK(rep.aborted);
  CHECK(rep.abort_reason == "event cap exceeded");
}

TEST_CASE("csv row layout matches the header") {
  const std::string header = SimReport::csv_header();
  CHECK(header.rfind("seed,protocol,total_time_s", 0) == 0);
  const auto commas = std::count(header.begin(), header.end(), ',');
  Scenario sc = mini_static(0.0, 0);
  const SimReport rep = run_scenario(sc, 77);
  const std::string row = rep.csv_row();
  CHECK(std::count(row.begin(), row.end(), ',') == commas);
  CHECK(row.rfind("77,udp-static-ec,", 0) == 0);
}
