#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kvsched {

// One prompt job. All sizes are in tokens, all times in rounds.
struct Request {
  int id = 0;
  int64_t arrival = 0;
  int64_t prompt = 1;     // s
  int64_t output = 1;     // true output length o
  int64_t predicted = 1;  // what the scheduler sees

  bool prediction_is_overestimate() const { return predicted >= output; }
  int64_t peak() const { return prompt + output; }
  // Memory-rounds consumed over the lifetime: s*o + o(o+1)/2.
  int64_t volume() const { return prompt * output + output * (output + 1) / 2; }
};

bool operator==(const Request& a, const Request& b);

// Immutable workload: memory budget plus requests ordered by (arrival, id).
class Instance {
 public:
  Instance() = default;
  // Throws std::invalid_argument on duplicate or non-dense ids, on
  // non-positive sizes, or when a prompt cannot fit its first round.
  Instance(int64_t memory_limit, std::vector<Request> requests);

  int64_t memory_limit() const { return memory_limit_; }
  const std::vector<Request>& requests() const { return requests_; }
  size_t size() const { return requests_.size(); }
  bool empty() const { return requests_.empty(); }
  const Request& by_id(int id) const { return requests_[index_[id]]; }

  int64_t total_output() const;
  int64_t last_arrival() const;

 private:
  int64_t memory_limit_ = 1;
  std::vector<Request> requests_;
  std::vector<size_t> index_;
};

// Start round per request id; kUnscheduled marks a hole.
struct Schedule {
  static constexpr int64_t kUnscheduled = -1;
  std::vector<int64_t> start;

  Schedule() = default;
  explicit Schedule(size_t n) : start(n, kUnscheduled) {}

  bool complete() const;
  int64_t completion(const Instance& instance, int id) const {
    return start[id] + instance.by_id(id).output;
  }
};

struct Metrics {
  int64_t tel = 0;
  double avg_latency = 0.0;
  int64_t makespan = 0;
  std::vector<std::pair<int64_t, int64_t>> per_round_throughput;
  std::vector<std::pair<int64_t, int64_t>> memory_timeline;
};

// Sum of (p + o - a). Throws std::invalid_argument("incomplete schedule").
int64_t tel(const Schedule& schedule, const Instance& instance);

// Same quantity by integrating the number of arrived, unfinished requests.
int64_t tel_by_integration(const Schedule& schedule, const Instance& instance);

struct Violation {
  enum class Kind { kEarlyStart, kMemory, kMissing };
  Kind kind = Kind::kMemory;
  int request = -1;       // for kEarlyStart / kMissing
  int64_t round = 0;      // for kMemory
  int64_t occupancy = 0;  // for kMemory

  std::string describe() const;
};

// First violation, or nullopt when the schedule is feasible. Start-before-
// arrival problems are reported before memory problems.
std::optional<Violation> validate_schedule(const Schedule& schedule,
                                           const Instance& instance);

// Occupancy indexed by round, 0..makespan (entry 0 is always 0).
std::vector<int64_t> occupancy_by_round(const Schedule& schedule,
                                        const Instance& instance);

}  // namespace kvsched
