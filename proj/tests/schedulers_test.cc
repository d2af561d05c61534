#include "kvsched/schedulers.h"

#include <gtest/gtest.h>

#include <algorithm>

#include "kvsched/engine.h"
#include "test_util.h"

namespace kvsched {
namespace {

Request req(int id, int64_t a, int64_t s, int64_t o) { return {id, a, s, o, o}; }

SimState waiting_state(int64_t m, std::vector<Request> waiting) {
  SimState st;
  st.memory_limit = m;
  st.waiting = std::move(waiting);
  return st;
}

TEST(McsfSelectTest, BreaksAtFirstInfeasible) {
  // A, B finish at 2; adding C makes round 2 hold 3 + 3 + 3.
  SimState st = waiting_state(6, {req(0, 0, 1, 2), req(1, 0, 1, 2), req(2, 0, 1, 5)});
  EXPECT_EQ(mcsf_select(st, 6).admit, (std::vector<int>{0, 1}));
}

TEST(McsfSelectTest, EmptyWaiting) {
  EXPECT_TRUE(mcsf_select(waiting_state(6, {}), 6).admit.empty());
}

TEST(McsfSelectTest, LargeMemorySingleRequest) {
  SimState st = waiting_state(16492, {req(0, 0, 40, 85)});
  EXPECT_EQ(mcsf_select(st, 16492).admit, (std::vector<int>{0}));
}

TEST(McsfSelectTest, OrdersByPredictionNotTruth) {
  Request long_pred{0, 0, 1, 1, 5};
  Request short_pred{1, 1, 1, 4, 2};
  SimState st = waiting_state(100, {long_pred, short_pred});
  EXPECT_EQ(mcsf_select(st, 100).admit, (std::vector<int>{1, 0}));
}

TEST(McBenchmarkSelectTest, ArrivalOrder) {
  // Arrival order C, A, B. C alone peaks at 6 at round 5; C + A peaks at 6
  // at rounds 2 and 5; B would push round 2 to 9.
  SimState st =
      waiting_state(6, {req(2, 0, 1, 5), req(0, 1, 1, 2), req(1, 2, 1, 2)});
  st.now = 2;
  std::sort(st.waiting.begin(), st.waiting.end(),
            [](const Request& a, const Request& b) { return a.arrival < b.arrival; });
  EXPECT_EQ(mc_benchmark_select(st, 6).admit, (std::vector<int>{2, 0}));
}

TEST(McBenchmarkSelectTest, SingleFeasible) {
  SimState st = waiting_state(10, {req(0, 0, 2, 3)});
  EXPECT_EQ(mc_benchmark_select(st, 10).admit, (std::vector<int>{0}));
}

TEST(McBenchmarkSelectTest, AgreesWithMcsfWhenOrdersCoincide) {
  SimState st = waiting_state(
      12, {req(0, 0, 1, 1), req(1, 1, 1, 2), req(2, 2, 2, 3), req(3, 3, 1, 6)});
  st.now = 3;
  EXPECT_EQ(mc_benchmark_select(st, 12).admit, mcsf_select(st, 12).admit);
}

TEST(AlphaProtectionSelectTest, AdmitsUnderThreshold) {
  SimState st = waiting_state(100, {req(0, 0, 9, 5), req(1, 0, 9, 5), req(2, 0, 9, 5)});
  st.occupancy = 40;
  const int64_t budget = protected_budget(0.25, 100);
  EXPECT_EQ(budget, 75);
  EXPECT_EQ(alpha_protection_select(st, budget).admit, (std::vector<int>{0, 1, 2}));
  st.waiting.push_back(req(3, 0, 9, 5));
  EXPECT_EQ(alpha_protection_select(st, budget).admit.size(), 3u);
}

TEST(AlphaProtectionSelectTest, EmptySystemZeroAlpha) {
  SimState st = waiting_state(10, {req(0, 0, 9, 1)});
  EXPECT_EQ(alpha_protection_select(st, protected_budget(0.0, 10)).admit.size(), 1u);
}

TEST(AlphaProtectionSelectTest, AlreadyOverThreshold) {
  SimState st = waiting_state(100, {req(0, 0, 1, 1)});
  st.occupancy = 80;
  EXPECT_TRUE(alpha_protection_select(st, 75).admit.empty());
}

TEST(FcfsSelectTest, UsesFullMemory) {
  SimState st = waiting_state(20, {req(0, 0, 9, 5), req(1, 0, 9, 5)});
  EXPECT_EQ(fcfs_select(st).admit.size(), 2u);
  st.occupancy = 1;
  EXPECT_EQ(fcfs_select(st).admit.size(), 1u);
  st.occupancy = 20;
  EXPECT_TRUE(fcfs_select(st).admit.empty());
}

TEST(ProtectedBudgetTest, FloorsOnce) {
  EXPECT_EQ(protected_budget(0.21, 16492), 13028);
  EXPECT_EQ(protected_budget(0.9, 10), 1);  // (1 - 0.9) * 10 is 0.99999...
  EXPECT_EQ(protected_budget(0.0, 7), 7);
}

std::vector<InFlight> three_active() {
  return {{req(0, 0, 5, 9), 0}, {req(1, 1, 5, 9), 1}, {req(2, 2, 5, 9), 2}};
}

TEST(HandleOverflowTest, GreedyClearsAll) {
  Rng rng(1);
  PolicyConfig p{PolicyKind::kAlphaProtection, 0.2};
  std::vector<int> ev = handle_overflow(p, three_active(), 5, 10, rng);
  std::sort(ev.begin(), ev.end());
  EXPECT_EQ(ev, (std::vector<int>{0, 1, 2}));
}

TEST(HandleOverflowTest, BetaOneClearsAllInOnePass) {
  Rng rng(1);
  PolicyConfig p{PolicyKind::kAlphaBetaClearing, 0.2, 1.0};
  EXPECT_EQ(handle_overflow(p, three_active(), 5, 10, rng).size(), 3u);
}

TEST(HandleOverflowTest, BetaHalfReplaysWithSeed) {
  PolicyConfig p{PolicyKind::kAlphaBetaClearing, 0.2, 0.5};
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const auto ea = handle_overflow(p, three_active(), 5, 20, a);
    const auto eb = handle_overflow(p, three_active(), 5, 20, b);
    EXPECT_EQ(ea, eb);
    // Passes repeat until the survivors fit.
    int64_t left = 0;
    for (const InFlight& f : three_active()) {
      if (std::find(ea.begin(), ea.end(), f.request.id) == ea.end()) {
        left += f.request.prompt + 5 - f.start;
      }
    }
    EXPECT_LE(left, 20);
  }
}

TEST(HandleOverflowTest, FcfsEvictsNewestUntilFits) {
  Rng rng(1);
  PolicyConfig p{PolicyKind::kFcfs};
  // Occupancy at round 5: 10 + 9 + 8 = 27.
  EXPECT_EQ(handle_overflow(p, three_active(), 5, 19, rng), (std::vector<int>{2}));
  EXPECT_EQ(handle_overflow(p, three_active(), 5, 12, rng), (std::vector<int>{2, 1}));
}

TEST(PolicyConfigTest, Validation) {
  EXPECT_THROW((PolicyConfig{PolicyKind::kMcsf, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((PolicyConfig{PolicyKind::kAlphaBetaClearing, 0.1, 0.0}.validate()),
               std::invalid_argument);
  EXPECT_NO_THROW((PolicyConfig{PolicyKind::kAlphaBetaClearing, 0.1, 1.0}.validate()));
  EXPECT_EQ(parse_policy_kind("alpha_beta_clearing"), PolicyKind::kAlphaBetaClearing);
  EXPECT_FALSE(parse_policy_kind("sjf").has_value());
  EXPECT_EQ((PolicyConfig{PolicyKind::kAlphaBetaClearing, 0.21, 0.2}.label()),
            "alpha_beta_clearing(a=0.21,b=0.2)");
}

// Prefix maximality: after the returned prefix, the next candidate in
// prediction order does not fit.
TEST(SchedulersPropertyTest, McsfPrefixIsMaximal) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    SimState st;
    st.now = rng.uniform_int(0, 5);
    st.memory_limit = rng.uniform_int(4, 30);
    int id = 0;
    for (int64_t k = rng.uniform_int(0, 3); k > 0; --k) {
      const int64_t p = rng.uniform_int(0, st.now);
      const int64_t s = rng.uniform_int(1, 3);
      Request r{id++, p, s, 1, rng.uniform_int(std::max<int64_t>(1, st.now - p + 1),
                                               st.now - p + 6)};
      st.in_flight.push_back({r, p});
    }
    for (int64_t k = rng.uniform_int(0, 6); k > 0; --k) {
      const int64_t o = rng.uniform_int(1, 6);
      st.waiting.push_back({id++, st.now, rng.uniform_int(1, 3), o, o});
    }
    const PolicyDecision d = mcsf_select(st, st.memory_limit);
    std::vector<Request> order = st.waiting;
    std::sort(order.begin(), order.end(), [](const Request& a, const Request& b) {
      return std::tie(a.predicted, a.arrival, a.id) < std::tie(b.predicted, b.arrival, b.id);
    });
    ASSERT_LE(d.admit.size(), order.size());
    FeasibilityQuery q{st.now, st.in_flight, {}, st.memory_limit};
    for (size_t k = 0; k < d.admit.size(); ++k) {
      ASSERT_EQ(d.admit[k], order[k].id);
      q.candidates.push_back(order[k]);
    }
    if (!d.admit.empty()) EXPECT_TRUE(is_feasible(q));
    if (d.admit.size() < order.size()) {
      q.candidates.push_back(order[d.admit.size()]);
      EXPECT_FALSE(is_feasible(q));
    }
  }
}

TEST(SchedulersPropertyTest, DeterministicApartFromClearingSeed) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const Instance inst = testing::tiny_instance(rng, {8, 12, 6, 6});
    for (PolicyKind k : {PolicyKind::kMcsf, PolicyKind::kMcBenchmark,
                         PolicyKind::kAlphaProtection, PolicyKind::kAlphaBetaClearing,
                         PolicyKind::kFcfs}) {
      PolicyConfig p{k, 0.1, 0.5, 42};
      // A livelock must be just as reproducible as a finished run.
      auto outcome = [&]() -> std::vector<int64_t> {
        try {
          return run(inst, p).schedule.start;
        } catch (const LivelockError& e) {
          return {-1, e.snapshot().now};
        }
      };
      EXPECT_EQ(outcome(), outcome()) << p.label();
    }
  }
}

}  // namespace
}  // namespace kvsched
