#include "kvsched/hindsight.h"

#include <gtest/gtest.h>

#include "kvsched/engine.h"
#include "kvsched/workloads.h"
#include "test_util.h"

namespace kvsched {
namespace {

Request req(int id, int64_t a, int64_t s, int64_t o) { return {id, a, s, o, o}; }

const BruteForceCaps kCaps{6, 40, 0};

TEST(SolveIpTest, TwoRequestsStartTogether) {
  Instance inst(4, {req(0, 0, 1, 1), req(1, 0, 1, 2)});
  const SolveResult r = solve_ip(inst);
  EXPECT_TRUE(r.bound.optimal);
  EXPECT_EQ(r.bound.upper, 3);
  EXPECT_EQ(r.schedule.start, (std::vector<int64_t>{0, 0}));
  EXPECT_EQ(r.bound.lower, 3);
}

TEST(SolveIpTest, SingleRequestStartsOnArrival) {
  Instance inst(10, {req(0, 4, 3, 5)});
  const SolveResult r = solve_ip(inst);
  EXPECT_TRUE(r.bound.optimal);
  EXPECT_EQ(r.schedule.start[0], 4);
  EXPECT_EQ(r.bound.upper, 5);
}

// M=16, b=0: the long request holds 16 at round 15, so the eight shorts
// released at 14 all run in round 16: 15 + 8 * 2.
TEST(SolveIpTest, AdversarialSixteen) {
  const SolveResult r = solve_ip(gen_adversarial(16, 0));
  EXPECT_TRUE(r.bound.optimal);
  EXPECT_EQ(r.bound.upper, 31);
  EXPECT_LE(r.bound.upper, 56);
}

TEST(SolveIpTest, EmptyInstance) {
  const SolveResult r = solve_ip(Instance(5, {}));
  EXPECT_TRUE(r.bound.optimal);
  EXPECT_EQ(r.bound.upper, 0);
}

TEST(SolveIpTest, NodeBudgetGivesValidBracket) {
  GenSpec g;
  g.seed = 3;
  g.count = {14, 14};
  const Instance inst = gen_all_at_once(g);
  const SolveResult r = solve_ip(inst, {0.0, 50});
  EXPECT_TRUE(r.bound.node_limit_hit);
  EXPECT_FALSE(r.bound.optimal);
  EXPECT_LE(r.bound.lower, r.bound.upper);
  EXPECT_FALSE(validate_schedule(r.schedule, inst).has_value());
  EXPECT_EQ(tel(r.schedule, inst), r.bound.upper);
}

TEST(SolveIpTest, MemoryBudgetStopsSearch) {
  GenSpec g;
  g.seed = 3;
  g.count = {14, 14};
  const Instance inst = gen_all_at_once(g);
  const SolveResult r = solve_ip(inst, {0.0, 1'000'000, 20'000});
  EXPECT_TRUE(r.bound.node_limit_hit);
  EXPECT_LT(r.bound.nodes_explored, 1000);
  EXPECT_LE(r.bound.lower, r.bound.upper);
  EXPECT_FALSE(validate_schedule(r.schedule, inst).has_value());
}

TEST(LpRelaxationTest, SingleRequestIsTight) {
  EXPECT_EQ(lp_relaxation(Instance(10, {req(0, 2, 3, 4)})), 4);
}

TEST(LpRelaxationTest, IdenticalRequestsThatFitTogether) {
  Instance inst(8, {req(0, 0, 1, 2), req(1, 0, 1, 2)});
  EXPECT_EQ(lp_relaxation(inst), 4);
  EXPECT_EQ(solve_ip(inst).bound.upper, 4);
}

TEST(VolumeBoundTest, TwoUnitRequests) {
  Instance inst(4, {req(0, 0, 1, 1), req(1, 0, 1, 1)});
  EXPECT_EQ(volume_lp_lower_bound(inst).value, 2);
}

TEST(VolumeBoundTest, OneRequest) {
  EXPECT_EQ(volume_lp_lower_bound(Instance(2, {req(0, 0, 1, 1)})).value, 1);
}

TEST(VolumeBoundTest, Empty) {
  EXPECT_EQ(volume_lp_lower_bound(Instance(2, {})).value, 0);
}

TEST(VolumeBoundTest, RequiresSimultaneousRelease) {
  try {
    volume_lp_lower_bound(Instance(4, {req(0, 1, 1, 1)}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "volume bound requires simultaneous release");
  }
}

TEST(VolumeBoundTest, SplitsAcrossSlots) {
  // vol 2 and 5 with M=4: [2 | 2] in slot 1, 3 more in slot 2.
  Instance inst(4, {req(0, 0, 1, 1), req(1, 0, 1, 2)});
  const VolumeBound vb = volume_lp_lower_bound(inst);
  EXPECT_EQ(vb.order, (std::vector<int>{0, 1}));
  EXPECT_EQ(vb.value, Rational(1) + Rational(2 * 1 + 3 * 2, 5));
  EXPECT_EQ(vb.first_time, (std::vector<Rational>{1, 1}));
}

TEST(BruteForceTest, EmptyAndCaps) {
  EXPECT_TRUE(brute_force_opt(Instance(3, {})).start.empty());
  std::vector<Request> many;
  for (int i = 0; i < 7; ++i) many.push_back(req(i, 0, 1, 1));
  EXPECT_THROW(brute_force_opt(Instance(50, many)), std::invalid_argument);
  // Two requests that cannot overlap, forced into a one-round window.
  Instance tight(4, {req(0, 0, 2, 2), req(1, 0, 2, 2)});
  EXPECT_THROW(brute_force_opt(tight, {6, 12, 1}), std::runtime_error);
}

TEST(BruteForceTest, LexicographicTieBreak) {
  // Either order costs 1 + 2; the smaller vector starts request 0 first.
  Instance inst(2, {req(0, 0, 1, 1), req(1, 0, 1, 1)});
  EXPECT_EQ(brute_force_opt(inst).start, (std::vector<int64_t>{0, 1}));
}

TEST(SolveLpTest, SmallProgram) {
  // min x + y st x + 2y >= 4, 3x + y >= 6.
  Rational v;
  std::vector<Rational> x;
  ASSERT_TRUE(solve_lp({1, 1}, {{{1, 2}, 1, 4}, {{3, 1}, 1, 6}}, &v, &x));
  EXPECT_EQ(v, Rational(14, 5));
  EXPECT_EQ(x[0], Rational(8, 5));
  EXPECT_EQ(x[1], Rational(6, 5));
  EXPECT_FALSE(solve_lp({1}, {{{1}, -1, -1}}, &v));
}

TEST(ExportLpTest, HasObjectiveRowsAndBinaries) {
  Instance inst(4, {req(0, 0, 1, 1), req(1, 0, 1, 2)});
  const std::string lp = export_lp_format(build_ip_model(inst, 1));
  EXPECT_NE(lp.find(" once_0: + x_0_0 + x_0_1 = 1"), std::string::npos);
  EXPECT_NE(lp.find(" mem_1: + 2 x_0_0 + 2 x_1_0 <= 4"), std::string::npos);
  EXPECT_NE(lp.find("Binaries"), std::string::npos);
}

class HindsightPropertyTest : public ::testing::TestWithParam<uint64_t> {};

// volume <= lp <= ip = brute force <= any policy.
TEST_P(HindsightPropertyTest, Sandwich) {
  Rng rng(GetParam());
  const Instance inst = testing::tiny_instance(rng, {5, 8, 3, 3});
  const SolveResult ip = solve_ip(inst);
  ASSERT_TRUE(ip.bound.optimal);
  EXPECT_FALSE(validate_schedule(ip.schedule, inst).has_value());
  EXPECT_EQ(tel(ip.schedule, inst), ip.bound.upper);
  const Schedule bf = brute_force_opt(inst, kCaps);
  EXPECT_EQ(tel(bf, inst), ip.bound.upper);
  const Rational lp = lp_relaxation(inst);
  EXPECT_LE(lp, ip.bound.upper);
  bool all_zero = true;
  for (const Request& r : inst.requests()) all_zero = all_zero && r.arrival == 0;
  if (all_zero) EXPECT_LE(volume_lp_lower_bound(inst).value, lp);
  for (PolicyKind k : {PolicyKind::kMcsf, PolicyKind::kMcBenchmark, PolicyKind::kFcfs}) {
    EXPECT_GE(run(inst, {k}).metrics.tel, ip.bound.upper);
  }
}

TEST_P(HindsightPropertyTest, ArrivalShiftCovariance) {
  Rng rng(GetParam() + 1000);
  const Instance inst = testing::tiny_instance(rng, {5, 8, 3, 3});
  std::vector<Request> shifted = inst.requests();
  for (Request& r : shifted) r.arrival += 7;
  const Instance later(inst.memory_limit(), shifted);
  EXPECT_EQ(solve_ip(inst).bound.upper, solve_ip(later).bound.upper);
  const Schedule a = brute_force_opt(inst, kCaps);
  const Schedule b = brute_force_opt(later, kCaps);
  for (size_t i = 0; i < a.start.size(); ++i) EXPECT_EQ(b.start[i], a.start[i] + 7);
}

// The derived horizon never cuts off the optimum.
TEST_P(HindsightPropertyTest, LargerHorizonSameOptimum) {
  Rng rng(GetParam() + 2000);
  const Instance inst = testing::tiny_instance(rng, {5, 8, 3, 3});
  if (inst.empty()) return;
  const int64_t h = safe_horizon(inst, tel(best_list_schedule(inst), inst));
  const int64_t grown = h + (h + 3) / 4;
  EXPECT_EQ(tel(brute_force_opt(inst, {6, 60, grown}), inst),
            tel(brute_force_opt(inst, kCaps), inst));
}

TEST_P(HindsightPropertyTest, VolumeGreedyMatchesSimplex) {
  Rng rng(GetParam() + 3000);
  const int64_t m = rng.uniform_int(4, 12);
  const int64_t s = rng.uniform_int(1, 3);
  std::vector<Request> reqs;
  for (int i = 0, n = static_cast<int>(rng.uniform_int(1, 5)); i < n; ++i) {
    reqs.push_back(req(i, 0, s, rng.uniform_int(1, m - s)));
  }
  const Instance inst(m, reqs);
  const VolumeBound vb = volume_lp_lower_bound(inst);
  EXPECT_EQ(vb.value, volume_lp_by_simplex(inst));
  // First-assignment times never decrease along the output-length order.
  for (size_t i = 1; i < vb.first_time.size(); ++i) {
    EXPECT_LE(vb.first_time[i - 1], vb.first_time[i]);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, HindsightPropertyTest, ::testing::Range<uint64_t>(0, 200));

}  // namespace
}  // namespace kvsched
