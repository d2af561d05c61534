#include "kvsched/engine.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace kvsched {

const char* event_name(Event::Type type) {
  switch (type) {
    case Event::Type::kArrival:
      return "arrival";
    case Event::Type::kAdmit:
      return "admit";
    case Event::Type::kToken:
      return "token";
    case Event::Type::kComplete:
      return "complete";
    case Event::Type::kEvict:
      return "evict";
    case Event::Type::kOverflow:
      return "overflow";
  }
  return "unknown";
}

void DurationModel::validate() const {
  if (kind == Kind::kAffine && !(c0 > 0 && c1 >= 0)) {
    throw std::invalid_argument("affine duration needs c0 > 0 and c1 >= 0");
  }
}

namespace {

struct Active {
  Request request;  // true lengths
  int64_t start;
};

bool arrival_less(const Request& a, const Request& b) {
  return a.arrival != b.arrival ? a.arrival < b.arrival : a.id < b.id;
}

}  // namespace

RunReport run(const Instance& instance, const PolicyConfig& config,
              const DurationModel& duration, const RunOptions& options) {
  duration.validate();
  Policy policy(config, instance.memory_limit());
  const int64_t m = instance.memory_limit();
  const size_t n = instance.size();

  int64_t max_output = 0;
  for (const Request& r : instance.requests()) {
    max_output = std::max(max_output, r.output);
  }
  const int64_t cap = options.horizon_cap > 0
                          ? options.horizon_cap
                          : 10 * (instance.last_arrival() +
                                  instance.total_output()) + 10;
  const int64_t stall_limit =
      options.stall_rounds > 0 ? options.stall_rounds : 10 * (max_output + 1);
  const bool lifecycle = options.events != EventDetail::kNone;
  const bool tokens = options.events == EventDetail::kFull;

  RunReport rep;
  rep.policy = config;
  rep.duration = duration;
  rep.seed = config.rng_seed;
  rep.schedule = Schedule(n);

  SimState st;
  st.memory_limit = m;
  std::vector<Active> active;
  size_t next = 0;  // next request in arrival order
  size_t done = 0;
  double clock = 0.0;
  int64_t last_completion_round = 0;
  const double idle_round = duration.seconds(0);
  std::vector<double> round_start;  // seconds at the start of each round
  const auto& reqs = instance.requests();
  std::vector<int64_t> completion(n, 0);

  auto snapshot = [&]() {
    SimState s = st;
    s.in_flight.clear();
    for (const Active& a : active) s.in_flight.push_back({a.request, a.start});
    return s;
  };
  auto mark_round = [&](int64_t r, double sec) {
    if (static_cast<int64_t>(round_start.size()) <= r) {
      round_start.resize(r + 1, sec);
    }
    round_start[r] = sec;
  };

  while (done < n) {
    if (st.now > cap) {
      throw LivelockError("livelock suspected: horizon cap " +
                              std::to_string(cap) + " reached",
                          snapshot());
    }
    if (!active.empty() || !st.waiting.empty()) {
      if (st.now - last_completion_round > stall_limit) {
        throw LivelockError("livelock suspected: no completion for " +
                                std::to_string(stall_limit) + " rounds",
                            snapshot());
      }
    }
    // Idle and nothing waiting: fast-forward the clock to the next arrival.
    if (active.empty() && st.waiting.empty() && next < n &&
        reqs[next].arrival > st.now) {
      const int64_t gap = reqs[next].arrival - st.now;
      for (int64_t r = st.now; r < reqs[next].arrival; ++r) {
        mark_round(r, clock + idle_round * static_cast<double>(r - st.now));
      }
      clock += idle_round * static_cast<double>(gap);
      st.now = reqs[next].arrival;
      last_completion_round = st.now;
    }
    mark_round(st.now, clock);

    // (1) arrivals
    while (next < n && reqs[next].arrival <= st.now) {
      Request r = reqs[next++];
      // A prediction above M - s would make the request inadmissible forever.
      r.predicted = std::min(r.predicted, m - r.prompt);
      st.waiting.push_back(r);
      rep.arrivals.emplace_back(clock, r.prompt + r.output);
      if (lifecycle) {
        st.events.push_back({Event::Type::kArrival, st.now, r.id, 0});
      }
    }
    rep.peak_waiting =
        std::max<int64_t>(rep.peak_waiting, static_cast<int64_t>(st.waiting.size()));

    // (2) admission, on the scheduler-visible view
    st.in_flight.clear();
    st.occupancy = 0;
    for (const Active& a : active) {
      Request seen = a.request;
      seen.predicted = std::max(seen.predicted, st.now - a.start + 1);
      st.in_flight.push_back({seen, a.start});
      st.occupancy += a.request.prompt + st.now - a.start;
    }
    SelectStats stats;
    const PolicyDecision decision = policy.select(st, &stats);
    rep.total_evaluations += stats.evaluations;
    rep.max_evaluations_per_round =
        std::max(rep.max_evaluations_per_round, stats.evaluations);
    int64_t prompt_tokens = 0;
    if (!decision.admit.empty()) {
      std::vector<char> chosen(n, 0);
      for (int id : decision.admit) chosen[id] = 1;
      std::vector<Request> still;
      still.reserve(st.waiting.size());
      for (const Request& r : st.waiting) {
        if (chosen[r.id]) {
          active.push_back({r, st.now});
          prompt_tokens += r.prompt;
          if (lifecycle) {
            st.events.push_back({Event::Type::kAdmit, st.now, r.id, 0});
          }
        } else {
          still.push_back(r);
        }
      }
      st.waiting.swap(still);
    }

    // (3) process the batch: every active request emits one token.
    const int64_t batch = static_cast<int64_t>(active.size());
    const int64_t end_round = st.now + 1;
    int64_t occ = 0;
    for (const Active& a : active) occ += a.request.prompt + end_round - a.start;
    const double secs = duration.seconds(prompt_tokens + batch);
    if (batch > 0) {
      rep.rounds.push_back(
          {st.now, clock, clock + secs, prompt_tokens, batch, occ});
      rep.metrics.per_round_throughput.emplace_back(st.now,
                                                    prompt_tokens + batch);
      rep.metrics.memory_timeline.emplace_back(end_round, occ);
      if (tokens) {
        for (const Active& a : active) {
          st.events.push_back({Event::Type::kToken, st.now, a.request.id,
                               end_round - a.start});
        }
      }
    }

    // (4) overflow is judged on the peak of the round, i.e. before the
    // requests finishing this round hand their memory back.
    if (occ > m) {
      std::vector<InFlight> view;
      for (const Active& a : active) view.push_back({a.request, a.start});
      const std::vector<int> evicted = policy.on_overflow(view, end_round);
      ClearingEvent ce{end_round, occ, evicted};
      if (lifecycle) {
        st.events.push_back({Event::Type::kOverflow, end_round, -1, occ});
      }
      std::vector<char> gone(n, 0);
      for (int id : evicted) gone[id] = 1;
      std::vector<Active> keep;
      for (const Active& a : active) {
        if (gone[a.request.id]) {
          st.waiting.push_back(a.request);
          if (lifecycle) {
            st.events.push_back({Event::Type::kEvict, end_round, a.request.id, 0});
          }
        } else {
          keep.push_back(a);
        }
      }
      active.swap(keep);
      // Evicted requests keep their arrival, so restore (arrival, id) order.
      std::sort(st.waiting.begin(), st.waiting.end(), arrival_less);
      st.evictions += static_cast<int64_t>(evicted.size());
      rep.clearing_events.push_back(std::move(ce));
      spdlog::debug("round {}: occupancy {} > {}, evicted {}", end_round, occ,
                    m, evicted.size());
    }

    // (5) completions release memory.
    std::vector<Active> keep;
    keep.reserve(active.size());
    for (const Active& a : active) {
      if (a.start + a.request.output == end_round) {
        rep.schedule.start[a.request.id] = a.start;
        completion[a.request.id] = end_round;
        ++done;
        last_completion_round = end_round;
        if (lifecycle) {
          st.events.push_back({Event::Type::kComplete, end_round, a.request.id, 0});
        }
      } else {
        keep.push_back(a);
      }
    }
    active.swap(keep);

    // (6) clock
    clock += secs;
    st.now = end_round;
  }
  mark_round(st.now, clock);

  rep.wall_time = clock;
  rep.evictions = st.evictions;
  rep.events = std::move(st.events);
  rep.metrics.tel = n ? tel(rep.schedule, instance) : 0;
  rep.metrics.avg_latency =
      n ? static_cast<double>(rep.metrics.tel) / static_cast<double>(n) : 0.0;
  int64_t makespan = 0;
  double latency_seconds = 0.0;
  for (const Request& r : reqs) {
    makespan = std::max(makespan, completion[r.id]);
    latency_seconds += round_start[completion[r.id]] - round_start[r.arrival];
  }
  rep.metrics.makespan = makespan;
  rep.avg_latency_seconds = n ? latency_seconds / static_cast<double>(n) : 0.0;
  return rep;
}

LatencyRatio latency_ratio(const Instance& instance, const PolicyConfig& policy,
                           const SolveOptions& solve) {
  LatencyRatio lr;
  lr.policy_tel = run(instance, policy, {}, {0, 0, EventDetail::kNone}).metrics.tel;
  const SolveResult sr = solve_ip(instance, solve);
  lr.bound = sr.bound;
  const double tel_d = static_cast<double>(lr.policy_tel);
  if (instance.empty()) {
    lr.exact = true;
    lr.value = lr.lower = lr.upper = 1.0;
    return lr;
  }
  lr.lower = tel_d / static_cast<double>(sr.bound.upper);
  lr.upper = tel_d / to_double(sr.bound.lower);
  lr.exact = sr.bound.optimal;
  lr.value = lr.exact ? lr.lower : lr.upper;
  return lr;
}

std::vector<ThroughputPoint> throughput_series(const RunReport& report,
                                               double window_seconds) {
  if (report.duration.kind == DurationModel::Kind::kUnit) {
    throw std::invalid_argument(
        "throughput requires a wall-clock duration model");
  }
  if (!(window_seconds > 0)) {
    throw std::invalid_argument("window must be positive");
  }
  std::vector<ThroughputPoint> out;
  if (report.rounds.empty() && report.arrivals.empty()) return out;
  auto bucket = [&](double sec) {
    const auto b = static_cast<size_t>(std::floor(sec / window_seconds + 1e-9));
    if (out.size() <= b) {
      const size_t old = out.size();
      out.resize(b + 1);
      for (size_t i = old; i < out.size(); ++i) {
        out[i].window_start = static_cast<double>(i) * window_seconds;
      }
    }
    return b;
  };
  for (const RoundRecord& r : report.rounds) {
    out[bucket(r.start_seconds)].tokens += r.prompt_tokens;
    out[bucket(r.end_seconds)].tokens += r.output_tokens;
  }
  for (const auto& [sec, tok] : report.arrivals) {
    out[bucket(sec)].arrival_tokens += tok;
  }
  return out;
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "kvsched.run_report";
  j["schema_version"] = kSchemaVersion;
  j["policy"] = {{"kind", policy_kind_name(policy.kind)},
                 {"label", policy.label()},
                 {"alpha", policy.alpha},
                 {"beta", policy.beta},
                 {"rng_seed", policy.rng_seed}};
  j["duration"] = {
      {"kind", duration.kind == DurationModel::Kind::kUnit ? "unit" : "affine"},
      {"c0", duration.c0},
      {"c1", duration.c1}};
  j["seed"] = seed;
  j["metrics"] = {{"tel", metrics.tel},
                  {"avg_latency", metrics.avg_latency},
                  {"avg_latency_seconds", avg_latency_seconds},
                  {"makespan", metrics.makespan}};
  j["wall_time"] = wall_time;
  j["evictions"] = evictions;
  j["evaluations"] = {{"total", total_evaluations},
                      {"max_per_round", max_evaluations_per_round}};
  auto& ce = j["clearing_events"] = nlohmann::ordered_json::array();
  for (const ClearingEvent& c : clearing_events) {
    ce.push_back({{"round", c.round}, {"occupancy", c.occupancy},
                  {"evicted", c.evicted}});
  }
  j["start"] = schedule.start;
  auto& mt = j["memory_timeline"] = nlohmann::ordered_json::array();
  for (const auto& [r, o] : metrics.memory_timeline) mt.push_back({r, o});
  auto& tp = j["per_round_throughput"] = nlohmann::ordered_json::array();
  for (const auto& [r, t] : metrics.per_round_throughput) tp.push_back({r, t});
  return j.dump();
}

std::string RunReport::events_jsonl() const {
  std::string out;
  out += nlohmann::ordered_json{{"schema", "kvsched.events"},
                                {"schema_version", kSchemaVersion}}
             .dump();
  out += '\n';
  for (const Event& e : events) {
    nlohmann::ordered_json j{{"type", event_name(e.type)}, {"round", e.round}};
    if (e.request >= 0) j["request"] = e.request;
    if (e.type == Event::Type::kToken) j["tokens"] = e.value;
    if (e.type == Event::Type::kOverflow) j["occupancy"] = e.value;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace kvsched
