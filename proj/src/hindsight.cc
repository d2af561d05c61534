#include "kvsched/hindsight.h"

#include <algorithm>
#include <chrono>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "kvsched/engine.h"

namespace kvsched {

double to_double(const Rational& r) {
  return static_cast<double>(r);
}

int64_t safe_horizon(const Instance& instance, int64_t upper_tel) {
  return instance.last_arrival() +
         std::max<int64_t>(0, upper_tel - instance.total_output());
}

IpModel build_ip_model(const Instance& instance, int64_t horizon) {
  IpModel m;
  m.horizon = horizon;
  m.memory_limit = instance.memory_limit();
  m.requests.resize(instance.size());
  for (const Request& r : instance.requests()) m.requests[r.id] = r;
  return m;
}

std::string export_lp_format(const IpModel& model) {
  std::ostringstream os;
  auto var = [](int i, int64_t t) {
    return "x_" + std::to_string(i) + "_" + std::to_string(t);
  };
  os << "\\ time-indexed start model, latest start " << model.horizon << "\n";
  os << "Minimize\n obj:";
  for (const Request& r : model.requests) {
    for (int64_t t = r.arrival; t <= model.horizon; ++t) {
      os << " + " << model.cost(r.id, t) << " " << var(r.id, t);
    }
  }
  os << "\nSubject To\n";
  for (const Request& r : model.requests) {
    os << " once_" << r.id << ":";
    for (int64_t t = r.arrival; t <= model.horizon; ++t) {
      os << " + " << var(r.id, t);
    }
    os << " = 1\n";
  }
  int64_t last = 0;
  for (const Request& r : model.requests) {
    last = std::max(last, model.horizon + r.output);
  }
  for (int64_t tau = 1; tau <= last; ++tau) {
    std::ostringstream row;
    bool any = false;
    for (const Request& r : model.requests) {
      const int64_t lo = std::max(r.arrival, tau - r.output);
      const int64_t hi = std::min(model.horizon, tau - 1);
      for (int64_t k = lo; k <= hi; ++k) {
        row << " + " << (r.prompt + tau - k) << " " << var(r.id, k);
        any = true;
      }
    }
    if (any) {
      os << " mem_" << tau << ":" << row.str() << " <= " << model.memory_limit
         << "\n";
    }
  }
  os << "Binaries\n";
  for (const Request& r : model.requests) {
    for (int64_t t = r.arrival; t <= model.horizon; ++t) {
      os << " " << var(r.id, t) << "\n";
    }
  }
  os << "End\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Greedy list schedules

namespace {

void require_fittable(const Instance& instance) {
  for (const Request& r : instance.requests()) {
    if (r.peak() > instance.memory_limit()) {
      throw std::invalid_argument("horizon too small: request " +
                                  std::to_string(r.id) +
                                  " cannot run even alone");
    }
  }
}

// Usage by absolute round, grown on demand.
class Profile {
 public:
  explicit Profile(int64_t limit) : limit_(limit) {}

  bool fits(const Request& r, int64_t start) const {
    for (int64_t k = 1; k <= r.output; ++k) {
      if (at(start + k) + r.prompt + k > limit_) return false;
    }
    return true;
  }
  void add(const Request& r, int64_t start) {
    if (static_cast<int64_t>(use_.size()) <= start + r.output) {
      use_.resize(start + r.output + 1, 0);
    }
    for (int64_t k = 1; k <= r.output; ++k) use_[start + k] += r.prompt + k;
  }
  int64_t at(int64_t t) const {
    return t < static_cast<int64_t>(use_.size()) ? use_[t] : 0;
  }

 private:
  int64_t limit_;
  std::vector<int64_t> use_;
};

Schedule list_schedule(const Instance& instance,
                       const std::function<bool(const Request&,
                                                const Request&)>& less,
                       bool stop_at_first) {
  Schedule s(instance.size());
  Profile prof(instance.memory_limit());
  std::vector<Request> pending(instance.requests());
  std::sort(pending.begin(), pending.end(), less);
  int64_t t = 0;
  size_t left = pending.size();
  while (left > 0) {
    int64_t next_arrival = std::numeric_limits<int64_t>::max();
    for (Request& r : pending) {
      if (r.id < 0) continue;
      if (r.arrival > t) {
        next_arrival = std::min(next_arrival, r.arrival);
        continue;
      }
      if (prof.fits(r, t)) {
        prof.add(r, t);
        s.start[r.id] = t;
        r.id = -1 - r.id;  // mark placed
        --left;
      } else if (stop_at_first) {
        break;
      }
    }
    ++t;
    if (left > 0 && next_arrival != std::numeric_limits<int64_t>::max() &&
        prof.at(t) == 0 && prof.at(t + 1) == 0) {
      // Nothing running; skip idle rounds only when nobody is waiting.
      bool waiting = false;
      for (const Request& r : pending) {
        if (r.id >= 0 && r.arrival <= t) waiting = true;
      }
      if (!waiting) t = std::max(t, next_arrival);
    }
  }
  return s;
}

}  // namespace

Schedule best_list_schedule(const Instance& instance) {
  require_fittable(instance);
  if (instance.empty()) return Schedule(0);
  using Less = std::function<bool(const Request&, const Request&)>;
  const std::vector<Less> orders = {
      [](const Request& a, const Request& b) {
        return std::tie(a.output, a.arrival, a.id) <
               std::tie(b.output, b.arrival, b.id);
      },
      [](const Request& a, const Request& b) {
        return std::tie(a.arrival, a.id) < std::tie(b.arrival, b.id);
      },
      [](const Request& a, const Request& b) {
        const int64_t va = a.volume(), vb = b.volume();
        return std::tie(va, a.arrival, a.id) < std::tie(vb, b.arrival, b.id);
      },
      [](const Request& a, const Request& b) {
        const int64_t pa = a.peak(), pb = b.peak();
        return std::tie(pa, a.arrival, a.id) < std::tie(pb, b.arrival, b.id);
      },
  };
  Schedule best;
  int64_t best_tel = std::numeric_limits<int64_t>::max();
  for (const Less& less : orders) {
    for (bool stop : {true, false}) {
      Schedule s = list_schedule(instance, less, stop);
      const int64_t v = tel(s, instance);
      if (v < best_tel) {
        best_tel = v;
        best = std::move(s);
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exact dense simplex (Bland's rule)

namespace {

// Tableau rows a[i] with rhs b[i] and basis[i]. Minimises c over columns
// allowed[j]. Returns false if unbounded.
bool run_simplex(std::vector<std::vector<Rational>>& a, std::vector<Rational>& b,
                 std::vector<int>& basis, const std::vector<Rational>& c,
                 const std::vector<char>& allowed) {
  const size_t m = a.size();
  const size_t n = c.size();
  while (true) {
    int enter = -1;
    for (size_t j = 0; j < n && enter < 0; ++j) {
      if (!allowed[j]) continue;
      Rational r = c[j];
      for (size_t i = 0; i < m; ++i) {
        if (a[i][j] != 0) r -= c[basis[i]] * a[i][j];
      }
      if (r < 0) enter = static_cast<int>(j);
    }
    if (enter < 0) return true;
    int leave = -1;
    Rational best;
    for (size_t i = 0; i < m; ++i) {
      if (a[i][enter] <= 0) continue;
      Rational ratio = b[i] / a[i][enter];
      if (leave < 0 || ratio < best ||
          (ratio == best && basis[i] < basis[leave])) {
        leave = static_cast<int>(i);
        best = ratio;
      }
    }
    if (leave < 0) return false;
    const Rational piv = a[leave][enter];
    for (auto& v : a[leave]) v /= piv;
    b[leave] /= piv;
    for (size_t i = 0; i < m; ++i) {
      if (static_cast<int>(i) == leave || a[i][enter] == 0) continue;
      const Rational f = a[i][enter];
      for (size_t j = 0; j < n; ++j) {
        if (a[leave][j] != 0) a[i][j] -= f * a[leave][j];
      }
      b[i] -= f * b[leave];
    }
    basis[leave] = enter;
  }
}

}  // namespace

bool solve_lp(const std::vector<Rational>& cost, const std::vector<LpRow>& rows,
              Rational* value, std::vector<Rational>* x) {
  const size_t nv = cost.size();
  const size_t m = rows.size();
  size_t slack_count = 0;
  for (const LpRow& r : rows) slack_count += (r.sense != 0);
  const size_t n_total = nv + slack_count + m;  // last m are artificials
  std::vector<std::vector<Rational>> a(m, std::vector<Rational>(n_total, 0));
  std::vector<Rational> b(m);
  std::vector<int> basis(m);
  size_t slack = nv;
  for (size_t i = 0; i < m; ++i) {
    const LpRow& r = rows[i];
    for (size_t j = 0; j < nv && j < r.coef.size(); ++j) a[i][j] = r.coef[j];
    b[i] = r.rhs;
    if (r.sense != 0) a[i][slack++] = r.sense < 0 ? 1 : -1;
    if (b[i] < 0) {
      for (auto& v : a[i]) v = -v;
      b[i] = -b[i];
    }
    a[i][nv + slack_count + i] = 1;
    basis[i] = static_cast<int>(nv + slack_count + i);
  }
  // Phase 1: drive artificials to zero.
  std::vector<Rational> c1(n_total, 0);
  for (size_t i = 0; i < m; ++i) c1[nv + slack_count + i] = 1;
  std::vector<char> all(n_total, 1);
  run_simplex(a, b, basis, c1, all);
  Rational infeas = 0;
  for (size_t i = 0; i < m; ++i) {
    if (basis[i] >= static_cast<int>(nv + slack_count)) infeas += b[i];
  }
  if (infeas > 0) return false;
  // Pivot remaining zero-level artificials out where possible.
  for (size_t i = 0; i < m; ++i) {
    if (basis[i] < static_cast<int>(nv + slack_count)) continue;
    for (size_t j = 0; j < nv + slack_count; ++j) {
      if (a[i][j] == 0) continue;
      const Rational piv = a[i][j];
      for (auto& v : a[i]) v /= piv;
      b[i] /= piv;
      for (size_t k = 0; k < m; ++k) {
        if (k == i || a[k][j] == 0) continue;
        const Rational f = a[k][j];
        for (size_t q = 0; q < n_total; ++q) a[k][q] -= f * a[i][q];
        b[k] -= f * b[i];
      }
      basis[i] = static_cast<int>(j);
      break;
    }
  }
  std::vector<Rational> c2(n_total, 0);
  for (size_t j = 0; j < nv; ++j) c2[j] = cost[j];
  std::vector<char> allowed(n_total, 1);
  for (size_t i = 0; i < m; ++i) allowed[nv + slack_count + i] = 0;
  if (!run_simplex(a, b, basis, c2, allowed)) {
    throw std::runtime_error("linear program is unbounded");
  }
  Rational v = 0;
  std::vector<Rational> sol(nv, 0);
  for (size_t i = 0; i < m; ++i) {
    if (basis[i] < static_cast<int>(nv)) sol[basis[i]] = b[i];
  }
  for (size_t j = 0; j < nv; ++j) v += cost[j] * sol[j];
  *value = v;
  if (x) *x = std::move(sol);
  return true;
}

Rational lp_relaxation(const Instance& instance, int64_t horizon) {
  if (instance.empty()) return 0;
  if (horizon <= 0) {
    horizon = safe_horizon(instance, tel(best_list_schedule(instance), instance));
  }
  const IpModel model = build_ip_model(instance, horizon);
  // Column index per (id, start).
  std::vector<int64_t> first_col(model.requests.size());
  std::vector<Rational> cost;
  for (const Request& r : model.requests) {
    first_col[r.id] = static_cast<int64_t>(cost.size());
    for (int64_t t = r.arrival; t <= horizon; ++t) cost.push_back(model.cost(r.id, t));
  }
  std::vector<LpRow> rows;
  for (const Request& r : model.requests) {
    LpRow row;
    row.coef.assign(cost.size(), 0);
    for (int64_t t = r.arrival; t <= horizon; ++t) {
      row.coef[first_col[r.id] + t - r.arrival] = 1;
    }
    row.sense = 0;
    row.rhs = 1;
    rows.push_back(std::move(row));
  }
  int64_t last = 0;
  for (const Request& r : model.requests) last = std::max(last, horizon + r.output);
  for (int64_t tau = 1; tau <= last; ++tau) {
    LpRow row;
    row.coef.assign(cost.size(), 0);
    bool any = false;
    for (const Request& r : model.requests) {
      const int64_t lo = std::max(r.arrival, tau - r.output);
      const int64_t hi = std::min(horizon, tau - 1);
      for (int64_t k = lo; k <= hi; ++k) {
        row.coef[first_col[r.id] + k - r.arrival] = r.prompt + tau - k;
        any = true;
      }
    }
    if (!any) continue;
    row.sense = -1;
    row.rhs = model.memory_limit;
    rows.push_back(std::move(row));
  }
  Rational value;
  if (!solve_lp(cost, rows, &value)) {
    throw std::runtime_error("horizon too small");
  }
  return value;
}

VolumeBound volume_lp_lower_bound(const Instance& instance) {
  for (const Request& r : instance.requests()) {
    if (r.arrival != 0) {
      throw std::invalid_argument("volume bound requires simultaneous release");
    }
  }
  VolumeBound vb;
  for (const Request& r : instance.requests()) vb.order.push_back(r.id);
  std::stable_sort(vb.order.begin(), vb.order.end(), [&](int x, int y) {
    return instance.by_id(x).volume() < instance.by_id(y).volume();
  });
  const int64_t m = instance.memory_limit();
  int64_t slot = 1;
  int64_t room = m;  // capacity left in the current slot
  for (int id : vb.order) {
    const int64_t vol = instance.by_id(id).volume();
    int64_t left = vol;
    Rational mass = 0;
    bool first = true;
    while (left > 0) {
      if (room == 0) {
        ++slot;
        room = m;
      }
      const int64_t take = std::min(left, room);
      if (first) {
        vb.first_time.push_back(Rational(slot));
        first = false;
      }
      mass += Rational(slot) * Rational(take) / Rational(vol);
      left -= take;
      room -= take;
    }
    vb.value += mass;
  }
  return vb;
}

Rational volume_lp_by_simplex(const Instance& instance) {
  for (const Request& r : instance.requests()) {
    if (r.arrival != 0) {
      throw std::invalid_argument("volume bound requires simultaneous release");
    }
  }
  const size_t n = instance.size();
  if (n == 0) return 0;
  const int64_t m = instance.memory_limit();
  int64_t total = 0;
  for (const Request& r : instance.requests()) total += r.volume();
  const int64_t slots = (total + m - 1) / m + 1;
  auto col = [&](size_t i, int64_t t) { return i * slots + (t - 1); };
  std::vector<Rational> cost(n * slots);
  for (size_t i = 0; i < n; ++i) {
    for (int64_t t = 1; t <= slots; ++t) cost[col(i, t)] = t;
  }
  std::vector<LpRow> rows;
  for (size_t i = 0; i < n; ++i) {
    LpRow row;
    row.coef.assign(cost.size(), 0);
    for (int64_t t = 1; t <= slots; ++t) row.coef[col(i, t)] = 1;
    row.rhs = 1;
    rows.push_back(std::move(row));
  }
  for (int64_t t = 1; t <= slots; ++t) {
    LpRow row;
    row.coef.assign(cost.size(), 0);
    for (size_t i = 0; i < n; ++i) {
      const int64_t vol = instance.requests()[i].volume();
      for (int64_t u = 1; u <= t; ++u) row.coef[col(i, u)] = vol;
    }
    row.sense = -1;
    row.rhs = t * m;
    rows.push_back(std::move(row));
  }
  Rational value;
  if (!solve_lp(cost, rows, &value)) throw std::runtime_error("infeasible");
  return value;
}

// ---------------------------------------------------------------------------
// Brute force

Schedule brute_force_opt(const Instance& instance, const BruteForceCaps& caps) {
  if (instance.size() > caps.max_requests) {
    throw std::invalid_argument("brute force limited to " +
                                std::to_string(caps.max_requests) + " requests");
  }
  if (instance.empty()) return Schedule(0);
  int64_t horizon = caps.horizon;
  if (horizon <= 0) {
    require_fittable(instance);
    horizon = safe_horizon(instance, tel(best_list_schedule(instance), instance));
  }
  if (horizon > caps.max_horizon) {
    throw std::invalid_argument("brute force horizon " + std::to_string(horizon) +
                                " exceeds cap " +
                                std::to_string(caps.max_horizon));
  }
  // Requests by id so the start vector is enumerated lexicographically.
  std::vector<Request> reqs(instance.size());
  for (const Request& r : instance.requests()) reqs[r.id] = r;
  int64_t rest_output = instance.total_output();
  std::vector<int64_t> use(horizon + 2 + [&] {
    int64_t mo = 0;
    for (const Request& r : reqs) mo = std::max(mo, r.output);
    return mo;
  }(), 0);
  const int64_t m = instance.memory_limit();
  Schedule cur(reqs.size()), best;
  int64_t best_tel = std::numeric_limits<int64_t>::max();

  std::function<void(size_t, int64_t, int64_t)> dfs = [&](size_t i, int64_t acc,
                                                          int64_t rest) {
    if (acc + rest >= best_tel) return;
    if (i == reqs.size()) {
      best_tel = acc;
      best = cur;
      return;
    }
    const Request& r = reqs[i];
    for (int64_t p = r.arrival; p <= horizon; ++p) {
      const int64_t cost = p + r.output - r.arrival;
      if (acc + cost + (rest - r.output) >= best_tel) break;
      bool ok = true;
      for (int64_t k = 1; k <= r.output && ok; ++k) {
        ok = use[p + k] + r.prompt + k <= m;
      }
      if (!ok) continue;
      for (int64_t k = 1; k <= r.output; ++k) use[p + k] += r.prompt + k;
      cur.start[r.id] = p;
      dfs(i + 1, acc + cost, rest - r.output);
      for (int64_t k = 1; k <= r.output; ++k) use[p + k] -= r.prompt + k;
    }
    cur.start[r.id] = Schedule::kUnscheduled;
  };
  dfs(0, 0, rest_output);
  if (best_tel == std::numeric_limits<int64_t>::max()) {
    throw std::runtime_error("horizon too small");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Best-first search

namespace {

struct Group {
  int64_t arrival, prompt, output;
  std::vector<int> ids;  // ascending; started in this order
};

struct Running {
  uint32_t group;
  int64_t start;
  bool operator<(const Running& o) const {
    return start != o.start ? start < o.start : group < o.group;
  }
  bool operator==(const Running& o) const {
    return group == o.group && start == o.start;
  }
};

struct Node {
  int32_t parent;
  uint32_t key;
  int64_t t;  // round at which this node decides
  int64_t g;  // output of started requests plus waiting accrued before t
  bool dead = false;
  std::vector<Running> running;
  std::vector<std::pair<uint32_t, uint32_t>> decision;  // made at parent.t
};

struct KeyHash {
  size_t operator()(const std::vector<uint32_t>& v) const {
    uint64_t h = 1469598103934665603ULL;
    for (uint32_t x : v) {
      h ^= x;
      h *= 1099511628211ULL;
    }
    return static_cast<size_t>(h);
  }
};

struct FrontEntry {
  std::vector<int32_t> profile;  // usage at t+1, t+2, ...
  int64_t g;
  int32_t node;
  bool dead;
};

class Search {
 public:
  Search(const Instance& instance, const SolveOptions& options)
      : instance_(instance), options_(options), m_(instance.memory_limit()) {
    std::map<std::tuple<int64_t, int64_t, int64_t>, std::vector<int>> by_kind;
    for (const Request& r : instance.requests()) {
      by_kind[{r.arrival, r.output, r.prompt}].push_back(r.id);
    }
    for (auto& [k, ids] : by_kind) {
      std::sort(ids.begin(), ids.end());
      groups_.push_back({std::get<0>(k), std::get<2>(k), std::get<1>(k), ids});
      max_output_ = std::max(max_output_, std::get<1>(k));
      last_arrival_ = std::max(last_arrival_, std::get<0>(k));
    }
  }

  SolveResult solve() {
    const auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    res.schedule = best_list_schedule(instance_);
    upper_ = tel(res.schedule, instance_);
    // MC-SF with exact lengths too, so the incumbent never trails it.
    std::vector<Request> exact = instance_.requests();
    for (Request& r : exact) r.predicted = r.output;
    RunReport rep = run(Instance(instance_.memory_limit(), std::move(exact)),
                        PolicyConfig{PolicyKind::kMcsf}, {},
                        {0, 0, EventDetail::kNone});
    if (rep.metrics.tel < upper_) {
      upper_ = rep.metrics.tel;
      res.schedule = std::move(rep.schedule);
    }
    int64_t best_goal = -1;

    Node root;
    root.parent = -1;
    root.t = groups_.empty() ? 0 : groups_.front().arrival;
    for (const Group& gr : groups_) root.t = std::min(root.t, gr.arrival);
    root.g = 0;
    std::vector<uint32_t> counts(groups_.size(), 0);
    root.key = intern(counts, root.t);
    store(std::move(root));
    open_.push({heuristic(counts, root.t, root.running) + root.g, 0, 0});

    int64_t expanded = 0;
    bool wall = false, node_limit = false;
    int64_t lower = upper_;
    while (!open_.empty()) {
      const Open top = open_.top();
      if (top.f >= upper_) break;
      if (expanded >= options_.node_budget ||
          bytes_ >= options_.memory_budget_bytes) {
        node_limit = true;
        lower = top.f;
        break;
      }
      if ((expanded & 1023) == 0 && options_.time_budget_seconds > 0) {
        const double el = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        if (el > options_.time_budget_seconds) {
          wall = true;
          lower = top.f;
          break;
        }
      }
      open_.pop();
      if (nodes_[top.node].dead) continue;
      ++expanded;
      const int64_t goal = expand(top.node);
      if (goal >= 0) best_goal = goal;
      if (truncated_) {
        // Children not generated are bounded below by the parent's f.
        node_limit = true;
        lower = std::min(top.f, open_.empty() ? top.f : open_.top().f);
        break;
      }
    }
    if (!truncated_ && (open_.empty() || open_.top().f >= upper_)) lower = upper_;
    if (best_goal >= 0) res.schedule = reconstruct(best_goal);
    res.bound.upper = upper_;
    res.bound.lower = std::min(lower, upper_);
    res.bound.optimal = !wall && !node_limit;
    res.bound.nodes_explored = expanded;
    res.bound.wall_limit_hit = wall;
    res.bound.node_limit_hit = node_limit;
    return res;
  }

 private:
  struct Open {
    int64_t f;
    int64_t neg_g;
    int32_t node;
    bool operator<(const Open& o) const {
      // std::priority_queue is a max-heap; invert for smallest f, then
      // deepest g, then oldest node.
      if (f != o.f) return f > o.f;
      if (neg_g != o.neg_g) return neg_g > o.neg_g;
      return node > o.node;
    }
  };

  bool arrivals_pending(int64_t t) const { return t < last_arrival_; }

  uint32_t intern(const std::vector<uint32_t>& counts, int64_t t) {
    std::vector<uint32_t> key = counts;
    if (arrivals_pending(t)) {
      key.push_back(static_cast<uint32_t>(t >> 32) | 0x80000000u);
      key.push_back(static_cast<uint32_t>(t));
    }
    auto [it, inserted] = key_ids_.try_emplace(std::move(key), keys_.size());
    if (inserted) {
      keys_.push_back(counts);
      fronts_.emplace_back();
    }
    return it->second;
  }

  std::vector<int32_t> profile_of(const std::vector<Running>& running,
                                  int64_t t) const {
    int64_t len = 0;
    for (const Running& r : running) {
      len = std::max(len, r.start + groups_[r.group].output - t);
    }
    std::vector<int32_t> p(std::max<int64_t>(len, 0), 0);
    for (const Running& r : running) {
      const Group& g = groups_[r.group];
      for (int64_t k = 1; k <= r.start + g.output - t; ++k) {
        p[k - 1] += static_cast<int32_t>(g.prompt + t + k - r.start);
      }
    }
    return p;
  }

  // Admissible completion bound for everything not yet started, measured
  // as remaining cost beyond what g already holds.
  int64_t heuristic(const std::vector<uint32_t>& counts, int64_t t,
                    const std::vector<Running>& running) {
    vols_.clear();
    ends_.clear();
    int64_t base = 0;
    for (size_t k = 0; k < groups_.size(); ++k) {
      const Group& g = groups_[k];
      const int64_t left = static_cast<int64_t>(g.ids.size()) - counts[k];
      if (left <= 0) continue;
      const int64_t from = std::max(t, g.arrival);
      const int64_t vol = g.prompt * g.output + g.output * (g.output + 1) / 2;
      for (int64_t c = 0; c < left; ++c) {
        vols_.push_back(vol);
        ends_.push_back(from + g.output);
      }
      base += left * from;
    }
    if (vols_.empty()) return 0;
    std::sort(vols_.begin(), vols_.end());
    std::sort(ends_.begin(), ends_.end());
    const std::vector<int32_t> prof = profile_of(running, t);
    int64_t total = 0, need = 0, have = 0, tau = t;
    for (size_t i = 0; i < vols_.size(); ++i) {
      need += vols_[i];
      while (have < need) {
        const int64_t k = tau - t;  // capacity of round tau + 1
        have += m_ - (k < static_cast<int64_t>(prof.size()) ? prof[k] : 0);
        ++tau;
      }
      total += std::max(tau, ends_[i]);
    }
    return total - base;
  }

  // True when (profile, g) is dominated; otherwise records it.
  bool dominated(uint32_t key, const std::vector<int32_t>& prof, int64_t g,
                 int32_t node) {
    auto& front = fronts_[key];
    auto le = [](const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
      if (a.size() > b.size()) {
        for (size_t i = b.size(); i < a.size(); ++i) {
          if (a[i] > 0) return false;
        }
      }
      const size_t n = std::min(a.size(), b.size());
      for (size_t i = 0; i < n; ++i) {
        if (a[i] > b[i]) return false;
      }
      return true;
    };
    for (const FrontEntry& e : front) {
      if (!e.dead && e.g <= g && le(e.profile, prof)) return true;
    }
    size_t w = 0;
    for (size_t i = 0; i < front.size(); ++i) {
      FrontEntry& e = front[i];
      if (!e.dead && g <= e.g && le(prof, e.profile)) {
        e.dead = true;
        nodes_[e.node].dead = true;
      }
      if (e.dead) continue;
      if (w != i) front[w] = std::move(e);
      ++w;
    }
    front.resize(w);
    bytes_ += static_cast<int64_t>(sizeof(FrontEntry) + prof.size() * sizeof(int32_t));
    front.push_back({prof, g, node, false});
    return false;
  }

  // Returns the node id of an improved complete schedule, or -1.
  int64_t expand(int32_t id) {
    const int64_t t = nodes_[id].t;
    const std::vector<uint32_t> counts = keys_[nodes_[id].key];
    const std::vector<Running> running = nodes_[id].running;
    const int64_t g0 = nodes_[id].g;

    std::vector<uint32_t> avail(groups_.size(), 0);
    std::vector<uint32_t> cand;
    for (size_t k = 0; k < groups_.size(); ++k) {
      if (groups_[k].arrival <= t && counts[k] < groups_[k].ids.size()) {
        avail[k] = static_cast<uint32_t>(groups_[k].ids.size()) - counts[k];
        cand.push_back(static_cast<uint32_t>(k));
      }
    }
    // Idle machine with nobody waiting: jump to the next arrival.
    if (cand.empty() && running.empty()) {
      int64_t next = std::numeric_limits<int64_t>::max();
      for (const Group& g : groups_) {
        if (g.arrival > t) next = std::min(next, g.arrival);
      }
      if (next == std::numeric_limits<int64_t>::max()) return -1;
      Node child;
      child.parent = id;
      child.t = next;
      child.g = g0;
      child.key = intern(counts, next);
      const int32_t cid = static_cast<int32_t>(nodes_.size());
      if (dominated(child.key, {}, child.g, cid)) return -1;
      store(std::move(child));
      open_.push({g0 + heuristic(counts, next, {}), -g0, cid});
      return -1;
    }

    // Usage at rounds t+1.. from jobs already running.
    std::vector<int64_t> use(max_output_ + 2, 0);
    {
      const std::vector<int32_t> p = profile_of(running, t);
      for (size_t k = 0; k < p.size(); ++k) use[k + 1] = p[k];
    }
    std::vector<uint32_t> take(groups_.size(), 0);
    int64_t found = -1;

    std::function<void(size_t)> rec = [&](size_t ci) {
      if (truncated_) return;
      if (ci == cand.size()) {
        if (bytes_ >= options_.memory_budget_bytes) {
          truncated_ = true;
          return;
        }
        found = std::max(found, emit(id, t, counts, running, take, g0));
        return;
      }
      const uint32_t k = cand[ci];
      const Group& g = groups_[k];
      rec(ci + 1);
      uint32_t added = 0;
      while (added < avail[k]) {
        bool ok = true;
        for (int64_t r = 1; r <= g.output && ok; ++r) {
          ok = use[r] + g.prompt + r <= m_;
        }
        if (!ok) break;
        for (int64_t r = 1; r <= g.output; ++r) use[r] += g.prompt + r;
        ++added;
        take[k] = added;
        rec(ci + 1);
      }
      for (int64_t r = 1; r <= g.output; ++r) use[r] -= added * (g.prompt + r);
      take[k] = 0;
    };
    rec(0);
    return found;
  }

  int64_t emit(int32_t parent, int64_t t, const std::vector<uint32_t>& counts,
               const std::vector<Running>& running,
               const std::vector<uint32_t>& take, int64_t g0) {
    Node child;
    child.parent = parent;
    child.t = t + 1;
    int64_t g = g0;
    std::vector<uint32_t> next = counts;
    bool all = true;
    for (size_t k = 0; k < groups_.size(); ++k) {
      if (take[k]) {
        next[k] += take[k];
        g += static_cast<int64_t>(take[k]) * groups_[k].output;
        child.decision.push_back({static_cast<uint32_t>(k), take[k]});
      }
      const int64_t waiting =
          groups_[k].arrival <= t ? groups_[k].ids.size() - next[k] : 0;
      g += waiting;
      if (next[k] < groups_[k].ids.size()) all = false;
    }
    child.g = g;
    if (g >= upper_) return -1;
    for (const Running& r : running) {
      if (r.start + groups_[r.group].output > t + 1) child.running.push_back(r);
    }
    for (size_t k = 0; k < groups_.size(); ++k) {
      if (take[k] && groups_[k].output > 1) {
        for (uint32_t c = 0; c < take[k]; ++c) {
          child.running.push_back({static_cast<uint32_t>(k), t});
        }
      }
    }
    std::sort(child.running.begin(), child.running.end());
    const int32_t cid = static_cast<int32_t>(nodes_.size());
    if (all) {
      upper_ = g;
      child.key = intern(next, t + 1);
      store(std::move(child));
      return cid;
    }
    const int64_t h = heuristic(next, t + 1, child.running);
    if (g + h >= upper_) return -1;
    child.key = intern(next, t + 1);
    if (dominated(child.key, profile_of(child.running, t + 1), g, cid)) {
      return -1;
    }
    store(std::move(child));
    open_.push({g + h, -g, cid});
    return -1;
  }

  Schedule reconstruct(int64_t goal) const {
    std::vector<std::tuple<int64_t, uint32_t, uint32_t>> starts;
    for (int64_t id = goal; nodes_[id].parent >= 0; id = nodes_[id].parent) {
      const int64_t t = nodes_[nodes_[id].parent].t;
      for (auto [k, c] : nodes_[id].decision) starts.emplace_back(t, k, c);
    }
    std::sort(starts.begin(), starts.end());
    Schedule s(instance_.size());
    std::vector<uint32_t> used(groups_.size(), 0);
    for (auto [t, k, c] : starts) {
      for (uint32_t i = 0; i < c; ++i) s.start[groups_[k].ids[used[k]++]] = t;
    }
    return s;
  }

  const Instance& instance_;
  SolveOptions options_;
  int64_t m_;
  std::vector<Group> groups_;
  int64_t max_output_ = 0;
  int64_t last_arrival_ = 0;
  int64_t upper_ = 0;

  std::vector<Node> nodes_;
  int64_t bytes_ = 0;  // rough footprint of nodes, fronts and the open list
  bool truncated_ = false;  // an expansion stopped early on the byte budget

  void store(Node&& n) {
    bytes_ += static_cast<int64_t>(sizeof(Node) + sizeof(Open) +
                                   n.running.size() * sizeof(Running) +
                                   n.decision.size() * sizeof(n.decision[0]));
    nodes_.push_back(std::move(n));
  }
  std::priority_queue<Open> open_;
  std::unordered_map<std::vector<uint32_t>, uint32_t, KeyHash> key_ids_;
  std::vector<std::vector<uint32_t>> keys_;
  std::vector<std::vector<FrontEntry>> fronts_;
  std::vector<int64_t> vols_, ends_;
};

}  // namespace

SolveResult solve_ip(const Instance& instance, const SolveOptions& options) {
  if (instance.empty()) {
    SolveResult r;
    r.bound.optimal = true;
    return r;
  }
  require_fittable(instance);
  return Search(instance, options).solve();
}

}  // namespace kvsched
