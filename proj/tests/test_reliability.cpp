#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "janus/errors.hpp"
#include "janus/manifest.hpp"
#include "janus/reliability.hpp"

using namespace janus;

namespace {

// Strict relative comparison; doctest's Approx mixes in an absolute scale
// term that would make checks on tiny probabilities vacuous.
void check_rel(double actual, double expect, double tol) {
  const double diff = std::fabs(actual - expect);
  const double scale = std::max(std::fabs(actual), std::fabs(expect));
  CHECK_MESSAGE(diff <= tol * scale, "actual=", actual, " expect=", expect,
                " rel=", scale > 0 ? diff / scale : 0.0);
}

NetworkParams default_params() { return NetworkParams{}; }

// Values below tagged [DERIVED] were produced by an independent
// arbitrary-precision evaluation (60 significant digits, exact rational
// hypergeometric terms) of the same closed forms; see
// scripts/oracle_reliability.py.

// Per-group unrecoverability, regime-dispatched, for n=32, s=4096, t=0.01,
// r=19144 at m = 0..16.  [DERIVED]
constexpr std::array<double, 17> kPGrid19 = {
    0.03133442843663841,     0.00048294311572272584,  4.8372292715128268e-06,
    3.5325816540881275e-08,  2.0029328037366674e-10,  9.1706696803640417e-13,
    3.4825142411481518e-15,  1.1179823077241652e-17,  3.077255943193013e-20,
    7.3403725272626152e-23,  1.5298324339702199e-25,  2.8031835715207325e-28,
    4.5371999851402204e-31,  6.509545045335867e-34,   8.2978291153266613e-37,
    9.4108767652971157e-40,  9.5005970401882887e-43};
constexpr std::array<double, 17> kPGrid383 = {
    0.47641217563749727,     0.13467400720534217,     0.026129110866164693,
    0.0037813635434330081,   0.00042980975766897039,  3.9716166668512193e-05,
    3.0566903405386846e-06,  1.9944783036476978e-07,  1.1181067136671679e-08,
    5.4403665037586506e-10,  2.3155861522309116e-11,  8.6734150264433938e-13,
    2.8720379334222977e-14,  8.4354093382141531e-16,  2.2025406951075982e-17,
    5.1193488169390191e-19,  1.059642714190668e-20};
constexpr std::array<double, 17> kPGrid957 = {
    0.79803597502010215,     0.47496105332221278,     0.21655511929389679,
    0.078767416903536905,    0.023663851843957123,    0.0060343953418199392,
    0.0013341892204812333,   0.00026008086680177748,  4.5304081496462131e-05,
    7.1295198514443859e-06,  1.0228661959020573e-06,  1.3481125560588923e-07,
    1.6428670585213245e-08,  1.8615506051705658e-09,  1.9708474392039054e-10,
    1.9578815048244814e-11,  1.831931018716663e-12};

// Pure upper-tail (high-regime closed form) at the same parameters,
// evaluated even where the dispatcher would use the low-regime form.
// [DERIVED]
constexpr std::array<double, 17> kPHigh19 = {
    0.03126026834467964,     0.00049377456874802827,  5.2134473583912792e-06,
    4.1327951006906646e-08,  2.6223068082930348e-10,  1.3869913364595349e-12,
    6.2892608601381096e-15,  2.4956774080312631e-17,  8.8036588649833891e-20,
    2.7951712797046577e-22,  8.0682978151378942e-25,  2.1349267343058012e-27,
    5.2147631663403099e-30,  1.182800909967124e-32,   2.5039964984100384e-35,
    4.9697419363718473e-38,  9.2834770112475234e-41};
constexpr std::array<double, 17> kPHigh383 = {
    0.47281333232183426,     0.1353081192491431,      0.027272601817600512,
    0.004217801329353784,    0.00052787713921651055,  5.541881416090638e-05,
    5.0074648096606938e-06,  3.9698261718810179e-07,  2.8028442571093297e-08,
    1.7834782996879465e-09,  1.032741515979759e-10,   5.4861808167642223e-12,
    2.6918780809949591e-13,  1.2270732999866809e-14,  5.2227144376174766e-16,
    2.0846646326089405e-17,  7.8336828410684055e-19};

// Expected total transfer time (Eq.-2 analogue) for the full 28 703 635 538
// byte payload at m = 0..16.  [DERIVED]
constexpr std::array<double, 17> kTime19 = {
    377.93692504530293, 378.06499501243428, 390.47512722368862,
    403.93146996782787, 418.35679322745153, 433.85198704791725,
    450.53731926453082, 468.55821353949023, 488.08182407020473,
    509.30204972837441, 532.45123485165061, 557.80685541161722,
    585.69653363978273, 616.52143961554532, 650.77133514417051,
    689.05298997074806, 732.11692645215214};
constexpr std::array<double, 17> kTime383 = {
    699.30702794958677, 436.73876034495197, 400.97363839881098,
    405.48406701753646, 418.54700329921258, 433.87916851845137,
    450.54367557810116, 468.55875951010415, 488.08185651198534,
    509.30205137721777, 532.45123492502421, 557.80685541449645,
    585.69653363988289, 616.52143961554839, 650.77133514417062,
    689.05298997074806, 732.11692645215214};
constexpr std::array<double, 17> kTime957 = {
    1813.0725272247298, 719.86376997651041, 498.47387075007344,
    438.51261969683253, 428.52639098331173, 436.50621472098186,
    451.15246078875663, 468.69020925084834, 488.11388938579228,
    509.31408176042834, 532.45415239324518, 557.80729632063708,
    585.69659079375117, 616.52144644404405, 650.77133590742949,
    689.05299005103404, 732.11692646013375};

constexpr std::uint64_t kTotalBytes = 28703635538ULL;  // four-level total

}  // namespace

TEST_CASE("regime classification switches strictly above one expected loss "
          "per group") {
  const auto params = default_params();
  // r / n = 19144 / 32 = 598.25 exactly.  [DERIVED]
  CHECK(classify_regime(params, 19.0) == LossRegime::low);
  CHECK(classify_regime(params, 383.0) == LossRegime::low);
  CHECK(classify_regime(params, 598.25) == LossRegime::low);  // == 1, not >
  CHECK(classify_regime(params, 598.26) == LossRegime::high);
  CHECK(classify_regime(params, 957.0) == LossRegime::high);
  CHECK_THROWS_AS(classify_regime(params, -1.0), ConfigError);
}

TEST_CASE("window geometry") {
  const auto params = default_params();
  // u = floor(19144 * 0.01) + 32 - 1 = 191 + 31 = 222.  [DERIVED]
  CHECK(fragments_in_flight(params) == 222);
  check_rel(round_window_s(params), 0.01 + 31.0 / 19144.0, 1e-15);
}

TEST_CASE("per-group unrecoverability matches the arbitrary-precision "
          "reference on the paper grid") {
  const auto params = default_params();
  for (int m = 0; m <= 16; ++m) {
    const auto a = p_unrecoverable(params, 19.0, m);
    CHECK(a.regime == LossRegime::low);
    check_rel(a.p, kPGrid19[m], 1e-9);

    const auto b = p_unrecoverable(params, 383.0, m);
    CHECK(b.regime == LossRegime::low);
    check_rel(b.p, kPGrid383[m], 1e-9);

    const auto c = p_unrecoverable(params, 957.0, m);
    CHECK(c.regime == LossRegime::high);
    check_rel(c.p, kPGrid957[m], 1e-9);
  }
  // dispatch agrees with the regime-specific entry points
  CHECK(p_unrecoverable(params, 19.0, 3).p ==
        p_unrecoverable_low(params, 19.0, 3));
  CHECK(p_unrecoverable(params, 957.0, 3).p ==
        p_unrecoverable_high(params, 957.0, 3));
}

TEST_CASE("high-regime closed form reaches reference precision") {
  const auto params = default_params();
  // The tail formula must track the reference to 1e-12 (absolute; all
  // probabilities are <= 1 so this dominates the relative reading for
  // p near 1) and stay relatively accurate into the deep tail.
  for (int m = 0; m <= 16; ++m) {
    const double a = p_unrecoverable_high(params, 19.0, m);
    CHECK(std::fabs(a - kPHigh19[m]) <= 1e-12);
    check_rel(a, kPHigh19[m], 1e-10);

    const double b = p_unrecoverable_high(params, 383.0, m);
    CHECK(std::fabs(b - kPHigh383[m]) <= 1e-12);
    check_rel(b, kPHigh383[m], 1e-10);

    const double c = p_unrecoverable_high(params, 957.0, m);
    CHECK(std::fabs(c - kPGrid957[m]) <= 1e-12);
    check_rel(c, kPGrid957[m], 1e-10);
  }
}

TEST_CASE("high-regime closed form on off-default parameter sets") {
  // [DERIVED] n=16, t=0.02, r=5000, lambda=400 (high regime: 1.28 expected
  // losses per group), m = 0..8.
  constexpr std::array<double, 9> kRef16 = {
      0.72196269954680592,   0.36607495496671738,   0.13830679843546076,
      0.041125718315457915,  0.01002777267705701,   0.0020666985936263777,
      0.00036833612249450974, 5.7778413487539586e-05, 8.0891800464243587e-06};
  NetworkParams p16;
  p16.latency_s = 0.02;
  p16.link_rate = p16.ec_rate = 5000.0;
  p16.group_size = 16;
  for (int m = 0; m <= 8; ++m) {
    const double v = p_unrecoverable_high(p16, 400.0, m);
    CHECK(std::fabs(v - kRef16[m]) <= 1e-12);
    check_rel(v, kRef16[m], 1e-10);
  }
  CHECK(classify_regime(p16, 400.0) == LossRegime::high);

  // [DERIVED] n=64, t=0.01, r=40000, lambda=1000 (1.6 losses per group),
  // m = 0..12 of the grid.
  constexpr std::array<double, 13> kRef64 = {
      0.79810348200534464,   0.47506905321389592,   0.21664151018073702,
      0.078813487229718926,  0.023682278049311688,  0.0060402911115813706,
      0.0013357612615199528, 0.00026044015293448579, 4.5375931217392421e-05,
      7.142291801020264e-06, 1.0249094944007188e-06, 1.3510843161969417e-07,
      1.646828991555755e-08};
  NetworkParams p64;
  p64.link_rate = p64.ec_rate = 40000.0;
  p64.group_size = 64;
  for (int m = 0; m <= 12; ++m) {
    const double v = p_unrecoverable_high(p64, 1000.0, m);
    CHECK(std::fabs(v - kRef64[m]) <= 1e-12);
    check_rel(v, kRef64[m], 1e-10);
  }
}

TEST_CASE("unrecoverability across assorted parameter sets") {
  struct Case {
    int n, m;
    double t, r, lam, p;
  };
  // [DERIVED]
  const Case cases[] = {
      {8, 1, 0.005, 2000, 50, 0.016602313247881386},
      {16, 3, 0.02, 5000, 120, 0.00050084714276353972},
      {64, 10, 0.01, 40000, 500, 5.2283464165140212e-10},
      {32, 0, 0.01, 19144, 19, 0.03133442843663841},
      {32, 5, 0.01, 19144, 383, 3.9716166668512193e-05},
  };
  for (const auto& c : cases) {
    NetworkParams params;
    params.latency_s = c.t;
    params.link_rate = params.ec_rate = c.r;
    params.group_size = static_cast<std::uint32_t>(c.n);
    check_rel(p_unrecoverable(params, c.lam, c.m).p, c.p, 1e-9);
  }
}

TEST_CASE("probability edge cases and validation") {
  const auto params = default_params();
  CHECK(p_unrecoverable(params, 0.0, 0).p == 0.0);
  CHECK(p_unrecoverable_high(params, 0.0, 0) == 0.0);
  CHECK_THROWS_AS(p_unrecoverable(params, 19.0, -1), ConfigError);
  CHECK_THROWS_AS(p_unrecoverable(params, 19.0, 17), ConfigError);  // > n/2
  CHECK_THROWS_AS(p_unrecoverable(params, -5.0, 0), ConfigError);
  // probabilities decrease monotonically in parity
  for (int m = 1; m <= 16; ++m) {
    CHECK(p_unrecoverable(params, 383.0, m).p <
          p_unrecoverable(params, 383.0, m - 1).p);
  }
}

TEST_CASE("evaluator cache reproduces direct evaluation") {
  const auto params = default_params();
  const UnrecoverabilityEvaluator eval(params);
  for (double lam : {19.0, 383.0, 957.0, 598.25, 700.0}) {
    for (int m = 0; m <= 16; ++m) {
      const auto direct = p_unrecoverable(params, lam, m);
      const auto cached = eval(lam, m);
      CHECK(cached.regime == direct.regime);
      check_rel(cached.p, direct.p, 1e-11);
    }
  }
  CHECK(eval(0.0, 5).p == 0.0);

  // Oversized in-flight windows skip tabulation and defer to the direct
  // path, which must agree bit for bit.
  NetworkParams wide = params;
  wide.link_rate = wide.ec_rate = 1e7;
  wide.latency_s = 0.1;
  const UnrecoverabilityEvaluator fallback(wide);
  for (int m = 0; m <= 16; ++m) {
    CHECK(fallback(2000.0, m).p == p_unrecoverable_low(wide, 2000.0, m));
  }
}

TEST_CASE("expected transfer time matches the reference grid") {
  const auto params = default_params();
  const UnrecoverabilityEvaluator eval(params);
  for (int m = 0; m <= 16; ++m) {
    check_rel(expected_total_time(kTotalBytes, params, 19.0, m)
                  .expected_total_s,
              kTime19[m], 1e-9);
    check_rel(expected_total_time(kTotalBytes, params, 383.0, m)
                  .expected_total_s,
              kTime383[m], 1e-9);
    // evaluator-backed path must agree with the direct path
    check_rel(expected_total_time(kTotalBytes, params, 957.0, m, &eval)
                  .expected_total_s,
              kTime957[m], 1e-9);
  }
}

TEST_CASE("expected transfer time structure") {
  const auto params = default_params();
  // Lossless: single term, exact deterministic schedule.
  const auto clean = expected_total_time(131072, params, 0.0, 0);
  CHECK(clean.retransmission_terms == 0);
  CHECK(clean.p == 0.0);
  CHECK(clean.expected_total_s == 0.01 + (32.0 * 1.0 - 1.0) / 19144.0);

  const auto lossy = expected_total_time(kTotalBytes, params, 383.0, 2);
  CHECK(lossy.retransmission_terms > 0);
  CHECK(lossy.retransmission_terms <= 200);
  CHECK(lossy.regime == LossRegime::low);
  check_rel(lossy.p, kPGrid383[2], 1e-9);

  CHECK_THROWS_AS(expected_total_time(0, params, 19.0, 0), ConfigError);
  // Saturated loss: every group fails with probability one.
  CHECK_THROWS_AS(expected_total_time(131072, params, 1e7, 0),
                  DivergenceError);
}

TEST_CASE("minimum-time parity selection reproduces the reference optima") {
  const auto params = default_params();
  struct Ref {
    double lam;
    int m_star;
    double min_time;
  };
  // [DERIVED]
  const Ref refs[] = {{19.0, 0, 377.93692504530293},
                      {383.0, 2, 400.97363839881098},
                      {957.0, 4, 428.52639098331173}};
  for (const auto& ref : refs) {
    const auto plan = optimize_parity_for_min_time(kTotalBytes, params,
                                                   ref.lam);
    CHECK(plan.parity == ref.m_star);
    check_rel(plan.estimate.expected_total_s, ref.min_time, 1e-9);
  }
  // Saturated loss cannot converge for any parity.
  CHECK_THROWS_AS(optimize_parity_for_min_time(kTotalBytes, params, 1e7),
                  DivergenceError);
}

TEST_CASE("deterministic schedule time") {
  const auto params = default_params();
  const std::vector<std::uint64_t> counts{5344};
  CHECK(deterministic_total_time(counts, params) ==
        0.01 + (32.0 * 5344.0 - 1.0) / 19144.0);
  const std::vector<std::uint64_t> multi{5344, 21873, 44401, 147367};
  CHECK(deterministic_total_time(multi, params) ==
        0.01 + (32.0 * 218985.0 - 1.0) / 19144.0);
}

TEST_CASE("group budget under a deadline") {
  const auto params = default_params();
  // [DERIVED] floor(((tau - t) * r + 1) / n)
  CHECK(group_budget(params, 378.03) == 226150);
  CHECK(group_budget(params, 401.11) == 239958);
  CHECK(group_budget(params, 429.75) == 257091);
  CHECK(group_budget(params, 0.0109) == -1);  // less than one group
  CHECK_THROWS_AS(group_budget(params, 0.0), ConfigError);
  CHECK_THROWS_AS(group_budget(params, -1.0), ConfigError);
}

TEST_CASE("feasible level counts are deadline-limited prefixes") {
  const auto params = default_params();
  const auto h = preset_hierarchy("nyx-full");
  // Zero-parity group totals per level: 5344 / 21873 / 44401 / 147367;
  // prefix sums 5344 / 27217 / 71618 / 218985.  [DERIVED]
  CHECK(feasible_level_counts(h, params, 401.11) ==
        std::vector<int>{1, 2, 3, 4});
  CHECK(feasible_level_counts(h, params, 100.0) == std::vector<int>{1, 2});
  CHECK(feasible_level_counts(h, params, 0.5).empty());
}

TEST_CASE("expected reconstruction bound for reference allocations") {
  const auto params = default_params();
  const auto h = preset_hierarchy("nyx-full");
  struct Ref {
    double lam;
    std::array<int, 4> m;
    double objective;
  };
  // [DERIVED] outcome-weighted expected bound for the reference parity
  // vectors under the dispatched loss model.
  const Ref refs[] = {
      {19.0, {5, 4, 2, 0}, 0.00015011432166162024},
      {383.0, {8, 7, 7, 0}, 0.000166537328148887},
      {957.0, {12, 11, 11, 0}, 0.00022210112434565304},
  };
  for (const auto& ref : refs) {
    const auto est = expected_error(h, params, ref.lam, ref.m);
    check_rel(est.expected_error, ref.objective, 1e-9);
    REQUIRE(est.outcomes.size() == 5);
    double prob_sum = 0.0;
    double weighted = 0.0;
    for (const auto& o : est.outcomes) {
      prob_sum += o.probability;
      weighted += o.probability * o.bound;
    }
    CHECK(prob_sum == doctest::Approx(1.0).epsilon(1e-12));
    check_rel(weighted, est.expected_error, 1e-12);
    // outcome bounds: failing level 1 leaves nothing (bound 1), then the
    // previous level's bound, and finally the full-success bound.
    CHECK(est.outcomes[0].bound == 1.0);
    CHECK(est.outcomes[4].bound == h.levels[3].error_bound);
  }
  const std::vector<int> too_long(5, 0);
  CHECK_THROWS_AS(expected_error(h, params, 19.0, too_long), ShapeError);
  CHECK_THROWS_AS(expected_error(h, params, 19.0, std::vector<int>{}),
                  ShapeError);
}
