#include "kvsched/kv_memory.h"

#include <algorithm>
#include <stdexcept>

namespace kvsched {

int64_t projected_occupancy(const FeasibilityQuery& query, int64_t at) {
  if (at <= query.now) {
    throw std::invalid_argument("projection must look forward");
  }
  int64_t sum = 0;
  for (const InFlight& f : query.in_flight) {
    if (f.request.predicted >= at - f.start) {
      sum += f.request.prompt + at - f.start;
    }
  }
  for (const Request& r : query.candidates) {
    if (r.predicted >= at - query.now) sum += r.prompt + at - query.now;
  }
  return sum;
}

std::vector<int64_t> checkpoint_rounds(const FeasibilityQuery& query) {
  std::vector<int64_t> rounds;
  for (const InFlight& f : query.in_flight) {
    if (f.predicted_end() > query.now) rounds.push_back(f.predicted_end());
  }
  for (const Request& r : query.candidates) {
    rounds.push_back(query.now + r.predicted);
  }
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  return rounds;
}

bool is_feasible(const FeasibilityQuery& query, int64_t* evaluations) {
  for (int64_t t : checkpoint_rounds(query)) {
    if (evaluations) ++*evaluations;
    if (projected_occupancy(query, t) > query.budget) return false;
  }
  return true;
}

bool is_feasible_exhaustive(const FeasibilityQuery& query) {
  const std::vector<int64_t> cps = checkpoint_rounds(query);
  if (cps.empty()) return true;
  for (int64_t t = query.now + 1; t <= cps.back(); ++t) {
    if (projected_occupancy(query, t) > query.budget) return false;
  }
  return true;
}

void ProjectionBuilder::add_in_flight(const InFlight& f) {
  terms_.push_back({f.request.prompt, f.start, f.predicted_end()});
}

void ProjectionBuilder::accept(const Request& r) {
  terms_.push_back({r.prompt, now_, now_ + r.predicted});
}

int64_t ProjectionBuilder::value_at(int64_t at, const Term* extra) const {
  int64_t sum = 0;
  for (const Term& t : terms_) {
    if (t.end >= at) sum += t.prompt + at - t.start;
  }
  if (extra && extra->end >= at) sum += extra->prompt + at - extra->start;
  return sum;
}

bool ProjectionBuilder::base_feasible(int64_t* evaluations) const {
  for (const Term& t : terms_) {
    if (t.end <= now_) continue;
    if (evaluations) ++*evaluations;
    if (value_at(t.end, nullptr) > budget_) return false;
  }
  return true;
}

bool ProjectionBuilder::fits(const Request& r, int64_t* evaluations) const {
  const Term extra{r.prompt, now_, now_ + r.predicted};
  // Checkpoints past the candidate's end are re-checked too; that covers
  // the in-flight-only part of the projection.
  std::vector<int64_t> cps;
  cps.reserve(terms_.size() + 1);
  for (const Term& t : terms_) {
    if (t.end > now_) cps.push_back(t.end);
  }
  cps.push_back(extra.end);
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  for (int64_t at : cps) {
    if (evaluations) ++*evaluations;
    if (value_at(at, &extra) > budget_) return false;
  }
  return true;
}

}  // namespace kvsched
