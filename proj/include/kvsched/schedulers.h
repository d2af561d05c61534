#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kvsched/random.h"
#include "kvsched/sim_state.h"

namespace kvsched {

enum class PolicyKind {
  kMcsf,               // shortest predicted output first, forward projection
  kMcBenchmark,        // arrival order, forward projection
  kAlphaProtection,    // arrival order, myopic headroom, clear all on overflow
  kAlphaBetaClearing,  // as above, clear each request with probability beta
  kFcfs,               // arrival order, myopic, evict newest on overflow
};

const char* policy_kind_name(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(const std::string& name);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kMcsf;
  double alpha = 0.0;  // reserved fraction of memory, in [0, 1)
  double beta = 1.0;   // clearing probability, in (0, 1]
  uint64_t rng_seed = 0;

  // Throws std::invalid_argument for out-of-range parameters.
  void validate() const;
  // Short stable label, e.g. "mcsf" or "alpha_beta_clearing(a=0.21,b=0.2)".
  std::string label() const;
};

struct PolicyDecision {
  std::vector<int> admit;
};

struct SelectStats {
  int64_t evaluations = 0;  // projected_occupancy evaluations
};

// floor((1 - alpha) * memory_limit), guarded against representation error.
int64_t protected_budget(double alpha, int64_t memory_limit);

// Longest feasible prefix of the waiting set ordered by (predicted, arrival,
// id); stops at the first candidate that does not fit.
PolicyDecision mcsf_select(const SimState& state, int64_t budget,
                           SelectStats* stats = nullptr);

// Same prefix rule with candidates in (arrival, id) order.
PolicyDecision mc_benchmark_select(const SimState& state, int64_t budget,
                                   SelectStats* stats = nullptr);

// Arrival order; admits while occupancy plus (s + 1) per admitted request
// stays within `budget`. No look-ahead.
PolicyDecision alpha_protection_select(const SimState& state, int64_t budget);

// alpha_protection_select with the full memory limit as the budget.
PolicyDecision fcfs_select(const SimState& state);

// Ids to evict after occupancy at `round` exceeded `memory_limit`.
std::vector<int> handle_overflow(const PolicyConfig& policy,
                                 const std::vector<InFlight>& active,
                                 int64_t round, int64_t memory_limit, Rng& rng);

// Binds a config to a memory limit; owns the clearing RNG stream.
class Policy {
 public:
  Policy(const PolicyConfig& config, int64_t memory_limit);

  PolicyDecision select(const SimState& state, SelectStats* stats = nullptr);
  std::vector<int> on_overflow(const std::vector<InFlight>& active,
                               int64_t round);

  const PolicyConfig& config() const { return config_; }
  int64_t budget() const { return budget_; }

 private:
  PolicyConfig config_;
  int64_t memory_limit_;
  int64_t budget_;
  Rng rng_;
};

}  // namespace kvsched
