#pragma once

#include <cstdint>
#include <vector>

#include "kvsched/core.h"

namespace kvsched {

// A running request as the scheduler sees it. Projection uses
// request.predicted; the engine keeps the true length elsewhere.
struct InFlight {
  Request request;
  int64_t start = 0;

  int64_t predicted_end() const { return start + request.predicted; }
};

struct FeasibilityQuery {
  int64_t now = 0;
  std::vector<InFlight> in_flight;
  std::vector<Request> candidates;  // tentatively started at `now`
  int64_t budget = 0;
};

// Projected memory at a future round, counting every listed request that is
// still predicted to be running. Throws std::invalid_argument when at <= now.
int64_t projected_occupancy(const FeasibilityQuery& query, int64_t at);

// Predicted completion rounds after `now`, sorted and unique.
std::vector<int64_t> checkpoint_rounds(const FeasibilityQuery& query);

// Budget check at every checkpoint. `evaluations`, when given, is increased
// by the number of projected_occupancy evaluations performed.
bool is_feasible(const FeasibilityQuery& query, int64_t* evaluations = nullptr);

// Reference version that scans every round up to the last checkpoint.
bool is_feasible_exhaustive(const FeasibilityQuery& query);

// Incremental form used by the prefix policies: holds the in-flight set plus
// the candidates accepted so far and tests one more candidate at a time.
class ProjectionBuilder {
 public:
  ProjectionBuilder(int64_t now, int64_t budget) : now_(now), budget_(budget) {}

  void add_in_flight(const InFlight& f);
  // True when in-flight work alone stays within budget at its checkpoints.
  bool base_feasible(int64_t* evaluations = nullptr) const;
  // Would the current set plus `r` (started now) stay within budget?
  bool fits(const Request& r, int64_t* evaluations = nullptr) const;
  void accept(const Request& r);

 private:
  struct Term {
    int64_t prompt;
    int64_t start;
    int64_t end;  // predicted completion round
  };
  int64_t value_at(int64_t at, const Term* extra) const;

  int64_t now_;
  int64_t budget_;
  std::vector<Term> terms_;
};

}  // namespace kvsched
