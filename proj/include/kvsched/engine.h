#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kvsched/core.h"
#include "kvsched/hindsight.h"
#include "kvsched/schedulers.h"
#include "kvsched/sim_state.h"

namespace kvsched {

struct DurationModel {
  enum class Kind { kUnit, kAffine };
  Kind kind = Kind::kUnit;
  double c0 = 1.0;  // seconds per round
  double c1 = 0.0;  // seconds per token processed in the round

  void validate() const;
  double seconds(int64_t tokens) const {
    return kind == Kind::kUnit ? 1.0 : c0 + c1 * static_cast<double>(tokens);
  }
};

enum class EventDetail { kNone, kLifecycle, kFull };

struct RunOptions {
  int64_t horizon_cap = 0;   // 0: 10 * (last arrival + total output) + 10
  int64_t stall_rounds = 0;  // 0: 10 * (longest output + 1)
  EventDetail events = EventDetail::kLifecycle;
};

struct ClearingEvent {
  int64_t round = 0;
  int64_t occupancy = 0;
  std::vector<int> evicted;
};

// One busy round. Prompt tokens count at the round start, output tokens at
// its end.
struct RoundRecord {
  int64_t round = 0;
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  int64_t prompt_tokens = 0;
  int64_t output_tokens = 0;
  int64_t occupancy = 0;  // at round + 1, before any eviction
};

struct RunReport {
  static constexpr int kSchemaVersion = 1;

  Metrics metrics;
  PolicyConfig policy;
  DurationModel duration;
  uint64_t seed = 0;
  std::vector<ClearingEvent> clearing_events;
  double wall_time = 0.0;          // simulated seconds
  double avg_latency_seconds = 0.0;
  int64_t evictions = 0;
  int64_t total_evaluations = 0;
  int64_t max_evaluations_per_round = 0;
  int64_t peak_waiting = 0;

  Schedule schedule;  // final start of every request
  std::vector<RoundRecord> rounds;
  std::vector<std::pair<double, int64_t>> arrivals;  // (seconds, s + o)
  std::vector<Event> events;

  std::string to_json() const;
  std::string events_jsonl() const;
};

class LivelockError : public std::runtime_error {
 public:
  LivelockError(const std::string& what, SimState snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const SimState& snapshot() const { return snapshot_; }

 private:
  SimState snapshot_;
};

RunReport run(const Instance& instance, const PolicyConfig& policy,
              const DurationModel& duration = {},
              const RunOptions& options = {});

struct LatencyRatio {
  int64_t policy_tel = 0;
  BoundReport bound;
  // policy_tel / optimum when the optimum is proven, else a bracket.
  bool exact = false;
  double value = 0.0;
  double lower = 0.0;  // policy_tel / incumbent
  double upper = 0.0;  // policy_tel / lower bound
};

LatencyRatio latency_ratio(const Instance& instance, const PolicyConfig& policy,
                           const SolveOptions& solve = {});

struct ThroughputPoint {
  double window_start = 0.0;
  int64_t tokens = 0;
  int64_t arrival_tokens = 0;
};

// Throws std::invalid_argument with the unit duration model.
std::vector<ThroughputPoint> throughput_series(const RunReport& report,
                                               double window_seconds);

}  // namespace kvsched
