#include "kvsched/core.h"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace kvsched {

bool operator==(const Request& a, const Request& b) {
  return a.id == b.id && a.arrival == b.arrival && a.prompt == b.prompt &&
         a.output == b.output && a.predicted == b.predicted;
}

Instance::Instance(int64_t memory_limit, std::vector<Request> requests)
    : memory_limit_(memory_limit), requests_(std::move(requests)) {
  if (memory_limit_ <= 0) {
    throw std::invalid_argument("memory limit must be positive");
  }
  const size_t n = requests_.size();
  std::vector<char> seen(n, 0);
  for (const Request& r : requests_) {
    if (r.id < 0 || static_cast<size_t>(r.id) >= n || seen[r.id]) {
      throw std::invalid_argument("request ids must be unique and dense 0..n-1");
    }
    seen[r.id] = 1;
    if (r.arrival < 0 || r.prompt < 1 || r.output < 1 || r.predicted < 1) {
      throw std::invalid_argument("request " + std::to_string(r.id) +
                                  " has an out-of-range field");
    }
    if (r.prompt + 1 > memory_limit_) {
      throw std::invalid_argument("request " + std::to_string(r.id) +
                                  " cannot fit its first round");
    }
  }
  std::sort(requests_.begin(), requests_.end(),
            [](const Request& a, const Request& b) {
              return a.arrival != b.arrival ? a.arrival < b.arrival
                                            : a.id < b.id;
            });
  index_.resize(n);
  for (size_t i = 0; i < n; ++i) index_[requests_[i].id] = i;
}

int64_t Instance::total_output() const {
  int64_t sum = 0;
  for (const Request& r : requests_) sum += r.output;
  return sum;
}

int64_t Instance::last_arrival() const {
  return requests_.empty() ? 0 : requests_.back().arrival;
}

bool Schedule::complete() const {
  return std::none_of(start.begin(), start.end(),
                      [](int64_t p) { return p == kUnscheduled; });
}

int64_t tel(const Schedule& schedule, const Instance& instance) {
  if (schedule.start.size() < instance.size()) {
    throw std::invalid_argument("incomplete schedule");
  }
  int64_t sum = 0;
  for (const Request& r : instance.requests()) {
    const int64_t p = schedule.start[r.id];
    if (p == Schedule::kUnscheduled) {
      throw std::invalid_argument("incomplete schedule");
    }
    sum += p + r.output - r.arrival;
  }
  return sum;
}

int64_t tel_by_integration(const Schedule& schedule, const Instance& instance) {
  // delta[t] changes the count of requests that are arrived and unfinished
  // during the unit interval [t, t+1).
  std::map<int64_t, int64_t> delta;
  for (const Request& r : instance.requests()) {
    const int64_t p = schedule.start.at(r.id);
    if (p == Schedule::kUnscheduled) {
      throw std::invalid_argument("incomplete schedule");
    }
    delta[r.arrival] += 1;
    delta[p + r.output] -= 1;
  }
  int64_t total = 0, pending = 0, prev = 0;
  for (const auto& [t, d] : delta) {
    total += pending * (t - prev);
    pending += d;
    prev = t;
  }
  return total;
}

std::string Violation::describe() const {
  switch (kind) {
    case Kind::kEarlyStart:
      return "request " + std::to_string(request) + " starts before arrival";
    case Kind::kMissing:
      return "request " + std::to_string(request) + " has no start";
    case Kind::kMemory:
      break;
  }
  return "occupancy " + std::to_string(occupancy) + " exceeds limit at round " +
         std::to_string(round);
}

namespace {

// Active set is constant between change rounds; within a segment the
// occupancy is count*t + offset, so it peaks at the segment's last round.
struct Change {
  int64_t round;
  int64_t count;
  int64_t offset;  // contributes s - p while active
};

std::vector<Change> changes_of(const Schedule& schedule,
                               const Instance& instance) {
  std::vector<Change> ch;
  ch.reserve(2 * instance.size());
  for (const Request& r : instance.requests()) {
    const int64_t p = schedule.start[r.id];
    ch.push_back({p + 1, 1, r.prompt - p});
    ch.push_back({p + r.output + 1, -1, -(r.prompt - p)});
  }
  std::sort(ch.begin(), ch.end(),
            [](const Change& a, const Change& b) { return a.round < b.round; });
  return ch;
}

}  // namespace

std::optional<Violation> validate_schedule(const Schedule& schedule,
                                           const Instance& instance) {
  for (const Request& r : instance.requests()) {
    if (static_cast<size_t>(r.id) >= schedule.start.size() ||
        schedule.start[r.id] == Schedule::kUnscheduled) {
      Violation v;
      v.kind = Violation::Kind::kMissing;
      v.request = r.id;
      return v;
    }
  }
  for (const Request& r : instance.requests()) {
    if (schedule.start[r.id] < r.arrival) {
      Violation v;
      v.kind = Violation::Kind::kEarlyStart;
      v.request = r.id;
      return v;
    }
  }
  const std::vector<Change> ch = changes_of(schedule, instance);
  const int64_t m = instance.memory_limit();
  int64_t count = 0, offset = 0;
  for (size_t i = 0; i < ch.size();) {
    const int64_t seg_begin = ch[i].round;
    for (; i < ch.size() && ch[i].round == seg_begin; ++i) {
      count += ch[i].count;
      offset += ch[i].offset;
    }
    if (count == 0 || i == ch.size()) continue;
    const int64_t seg_end = ch[i].round - 1;
    if (count * seg_end + offset > m) {
      // First round in the segment where the linear ramp crosses m.
      int64_t first = (m - offset) / count + 1;
      if ((m - offset) < 0 && (m - offset) % count != 0) first -= 1;
      first = std::max(first, seg_begin);
      Violation v;
      v.kind = Violation::Kind::kMemory;
      v.round = first;
      v.occupancy = count * first + offset;
      return v;
    }
  }
  return std::nullopt;
}

std::vector<int64_t> occupancy_by_round(const Schedule& schedule,
                                        const Instance& instance) {
  int64_t makespan = 0;
  for (const Request& r : instance.requests()) {
    makespan = std::max(makespan, schedule.start.at(r.id) + r.output);
  }
  std::vector<int64_t> occ(makespan + 1, 0);
  for (const Request& r : instance.requests()) {
    const int64_t p = schedule.start[r.id];
    for (int64_t t = p + 1; t <= p + r.output; ++t) occ[t] += r.prompt + t - p;
  }
  return occ;
}

}  // namespace kvsched
