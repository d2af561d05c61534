#include "kvsched/schedulers.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kvsched {

const char* policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kMcsf:
      return "mcsf";
    case PolicyKind::kMcBenchmark:
      return "mc_benchmark";
    case PolicyKind::kAlphaProtection:
      return "alpha_protection";
    case PolicyKind::kAlphaBetaClearing:
      return "alpha_beta_clearing";
    case PolicyKind::kFcfs:
      return "fcfs";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy_kind(const std::string& name) {
  for (PolicyKind k :
       {PolicyKind::kMcsf, PolicyKind::kMcBenchmark, PolicyKind::kAlphaProtection,
        PolicyKind::kAlphaBetaClearing, PolicyKind::kFcfs}) {
    if (name == policy_kind_name(k)) return k;
  }
  return std::nullopt;
}

void PolicyConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1)");
  }
  if (kind == PolicyKind::kAlphaBetaClearing && !(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("beta must lie in (0, 1]");
  }
}

std::string PolicyConfig::label() const {
  char buf[96];
  switch (kind) {
    case PolicyKind::kAlphaProtection:
      std::snprintf(buf, sizeof(buf), "alpha_protection(a=%g)", alpha);
      return buf;
    case PolicyKind::kAlphaBetaClearing:
      std::snprintf(buf, sizeof(buf), "alpha_beta_clearing(a=%g,b=%g)", alpha,
                    beta);
      return buf;
    case PolicyKind::kMcsf:
    case PolicyKind::kMcBenchmark:
      if (alpha > 0) {
        std::snprintf(buf, sizeof(buf), "%s(a=%g)", policy_kind_name(kind),
                      alpha);
        return buf;
      }
      [[fallthrough]];
    default:
      return policy_kind_name(kind);
  }
}

int64_t protected_budget(double alpha, int64_t memory_limit) {
  const double b = (1.0 - alpha) * static_cast<double>(memory_limit);
  return static_cast<int64_t>(std::floor(b + 1e-9));
}

namespace {

template <typename Less>
PolicyDecision prefix_select(const SimState& state, int64_t budget, Less less,
                             SelectStats* stats) {
  PolicyDecision d;
  if (state.waiting.empty()) return d;
  ProjectionBuilder proj(state.now, budget);
  for (const InFlight& f : state.in_flight) proj.add_in_flight(f);

  // Heap order gives the prefix lazily; usually only a handful of
  // candidates are examined before the first failure.
  std::vector<const Request*> heap;
  heap.reserve(state.waiting.size());
  for (const Request& r : state.waiting) heap.push_back(&r);
  auto greater = [&](const Request* a, const Request* b) { return less(*b, *a); };
  std::make_heap(heap.begin(), heap.end(), greater);
  int64_t* evals = stats ? &stats->evaluations : nullptr;
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), greater);
    const Request* r = heap.back();
    heap.pop_back();
    if (!proj.fits(*r, evals)) break;
    proj.accept(*r);
    d.admit.push_back(r->id);
  }
  return d;
}

bool by_arrival(const Request& a, const Request& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.id < b.id;
}

bool by_prediction(const Request& a, const Request& b) {
  if (a.predicted != b.predicted) return a.predicted < b.predicted;
  return by_arrival(a, b);
}

int64_t occupancy_at(const std::vector<InFlight>& active, int64_t round) {
  int64_t occ = 0;
  for (const InFlight& f : active) occ += f.request.prompt + round - f.start;
  return occ;
}

}  // namespace

PolicyDecision mcsf_select(const SimState& state, int64_t budget,
                           SelectStats* stats) {
  return prefix_select(state, budget, by_prediction, stats);
}

PolicyDecision mc_benchmark_select(const SimState& state, int64_t budget,
                                   SelectStats* stats) {
  return prefix_select(state, budget, by_arrival, stats);
}

PolicyDecision alpha_protection_select(const SimState& state, int64_t budget) {
  PolicyDecision d;
  int64_t used = state.occupancy;
  for (const Request& r : state.waiting) {  // already in arrival order
    if (used + r.prompt + 1 > budget) break;
    used += r.prompt + 1;
    d.admit.push_back(r.id);
  }
  return d;
}

PolicyDecision fcfs_select(const SimState& state) {
  return alpha_protection_select(state, state.memory_limit);
}

std::vector<int> handle_overflow(const PolicyConfig& policy,
                                 const std::vector<InFlight>& active,
                                 int64_t round, int64_t memory_limit,
                                 Rng& rng) {
  std::vector<int> evicted;
  switch (policy.kind) {
    case PolicyKind::kMcsf:
    case PolicyKind::kMcBenchmark:
    case PolicyKind::kAlphaProtection:
      for (const InFlight& f : active) evicted.push_back(f.request.id);
      break;
    case PolicyKind::kAlphaBetaClearing: {
      std::vector<InFlight> left = active;
      while (!left.empty() && occupancy_at(left, round) > memory_limit) {
        std::vector<InFlight> keep;
        for (const InFlight& f : left) {
          if (rng.bernoulli(policy.beta)) {
            evicted.push_back(f.request.id);
          } else {
            keep.push_back(f);
          }
        }
        left.swap(keep);
      }
      break;
    }
    case PolicyKind::kFcfs: {
      // Recompute-style preemption: newest arrivals go first.
      std::vector<InFlight> left = active;
      std::sort(left.begin(), left.end(),
                [](const InFlight& a, const InFlight& b) {
                  return by_arrival(a.request, b.request);
                });
      while (!left.empty() && occupancy_at(left, round) > memory_limit) {
        evicted.push_back(left.back().request.id);
        left.pop_back();
      }
      break;
    }
  }
  return evicted;
}

Policy::Policy(const PolicyConfig& config, int64_t memory_limit)
    : config_(config),
      memory_limit_(memory_limit),
      budget_(config.kind == PolicyKind::kFcfs
                  ? memory_limit
                  : protected_budget(config.alpha, memory_limit)),
      rng_(config.rng_seed) {
  config_.validate();
}

PolicyDecision Policy::select(const SimState& state, SelectStats* stats) {
  switch (config_.kind) {
    case PolicyKind::kMcsf:
      return mcsf_select(state, budget_, stats);
    case PolicyKind::kMcBenchmark:
      return mc_benchmark_select(state, budget_, stats);
    case PolicyKind::kAlphaProtection:
    case PolicyKind::kAlphaBetaClearing:
      return alpha_protection_select(state, budget_);
    case PolicyKind::kFcfs:
      return fcfs_select(state);
  }
  return {};
}

std::vector<int> Policy::on_overflow(const std::vector<InFlight>& active,
                                     int64_t round) {
  return handle_overflow(config_, active, round, memory_limit_, rng_);
}

}  // namespace kvsched
