#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <string>
#include <vector>

#include "kvsched/core.h"

namespace kvsched {

using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& r);

// Time-indexed model: x[i][t] = 1 iff request i starts at round t, with
// t in [a_i, horizon]. Cost of x[i][t] is t + o_i - a_i.
struct IpModel {
  int64_t horizon = 0;  // latest allowed start round
  int64_t memory_limit = 0;
  std::vector<Request> requests;  // indexed by id

  int64_t cost(int id, int64_t t) const {
    const Request& r = requests[id];
    return t + r.output - r.arrival;
  }
};

// Latest start round that some optimal schedule respects, given the TEL of
// any feasible schedule: waiting of one request cannot exceed the total
// waiting of the optimum, which is at most upper_tel - sum(o).
int64_t safe_horizon(const Instance& instance, int64_t upper_tel);

IpModel build_ip_model(const Instance& instance, int64_t horizon);

// CPLEX LP text of the integer program, for cross-checking elsewhere.
std::string export_lp_format(const IpModel& model);

struct BoundReport {
  Rational lower = 0;
  int64_t upper = 0;
  bool optimal = false;
  int64_t nodes_explored = 0;
  bool wall_limit_hit = false;
  bool node_limit_hit = false;
};

struct SolveOptions {
  double time_budget_seconds = 60.0;  // <= 0 disables the clock check
  int64_t node_budget = 2'000'000;
  // Expansions can fan out widely, so stored states are capped too. An
  // estimate from container sizes, not the allocator, to stay deterministic.
  int64_t memory_budget_bytes = int64_t{256} << 20;  // ~2.5x this in RSS
};

struct SolveResult {
  Schedule schedule;
  BoundReport bound;
};

// Best-first search over rounds. States are (set of started requests, the
// running requests and their start offsets); identical requests are merged
// into counted groups and states with the same started set are pruned when
// another one has no more accumulated cost and no more memory in use at
// every future round. Exact when bound.optimal is set; otherwise the
// incumbent and a valid lower bound are returned.
SolveResult solve_ip(const Instance& instance, const SolveOptions& options = {});

// Greedy schedules on true lengths; the best is the search's first incumbent.
Schedule best_list_schedule(const Instance& instance);

// Continuous relaxation of the time-indexed program, solved exactly.
// horizon <= 0 picks safe_horizon from the best list schedule.
Rational lp_relaxation(const Instance& instance, int64_t horizon = 0);

struct VolumeBound {
  Rational value = 0;
  std::vector<int> order;            // ids by ascending volume
  std::vector<Rational> first_time;  // first round each gets mass, by order
};

// Water-filling on cumulative capacity t*M. Requires all arrivals at 0;
// throws std::invalid_argument("volume bound requires simultaneous release").
VolumeBound volume_lp_lower_bound(const Instance& instance);

// The same relaxation solved by the generic simplex, for cross-checks.
Rational volume_lp_by_simplex(const Instance& instance);

struct BruteForceCaps {
  size_t max_requests = 6;
  int64_t max_horizon = 12;
  int64_t horizon = 0;  // latest start; <= 0 derives safe_horizon
};

// Exhaustive search; ties go to the lexicographically smallest start vector.
Schedule brute_force_opt(const Instance& instance,
                         const BruteForceCaps& caps = {});

// Dense exact simplex: minimise c.x subject to rows, x >= 0. Exposed for
// tests. Each row is (coefficients, sense, rhs) with sense -1 for <=,
// 0 for ==, +1 for >=. Returns false when infeasible.
struct LpRow {
  std::vector<Rational> coef;
  int sense = 0;
  Rational rhs = 0;
};
bool solve_lp(const std::vector<Rational>& cost, const std::vector<LpRow>& rows,
              Rational* value, std::vector<Rational>* x = nullptr);

}  // namespace kvsched
