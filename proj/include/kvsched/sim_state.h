#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kvsched/core.h"
#include "kvsched/kv_memory.h"

namespace kvsched {

struct Event {
  enum class Type { kArrival, kAdmit, kToken, kComplete, kEvict, kOverflow };
  Type type;
  int64_t round;
  int request;    // -1 for kOverflow
  int64_t value;  // tokens for kToken, occupancy for kOverflow, else 0
};

const char* event_name(Event::Type type);

// Per-round view handed to a policy. in_flight carries the scheduler-visible
// prediction; waiting is ordered by (arrival, id).
struct SimState {
  int64_t now = 0;
  int64_t memory_limit = 0;
  std::vector<InFlight> in_flight;
  std::vector<Request> waiting;
  int64_t occupancy = 0;
  int64_t evictions = 0;
  std::vector<Event> events;
};

}  // namespace kvsched
