#include "kvsched/experiment.h"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>
#include <toml.hpp>

#include "kvsched/io.h"
#include "kvsched/random.h"

namespace kvsched {

// ---------------------------------------------------------------------------
// Config parsing

namespace {

int64_t line_of(const toml::node& n) {
  return static_cast<int64_t>(n.source().begin.line);
}

// Wraps one TOML table; every key must be consumed or the table is rejected.
class Table {
 public:
  Table(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  const toml::node* get(const std::string& key) {
    used_.insert(key);
    return t_.get(key);
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  bool read(const std::string& key, T* out) {
    const toml::node* n = get(key);
    if (!n) return false;
    if constexpr (std::is_same_v<T, bool>) {
      if (!n->is_boolean()) fail(*n, key, "a boolean");
      *out = n->as_boolean()->get();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!n->is_string()) fail(*n, key, "a string");
      *out = n->as_string()->get();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (n->is_integer()) {
        *out = static_cast<T>(n->as_integer()->get());
      } else if (n->is_floating_point()) {
        *out = static_cast<T>(n->as_floating_point()->get());
      } else {
        fail(*n, key, "a number");
      }
    } else {
      if (!n->is_integer()) fail(*n, key, "an integer");
      const int64_t v = n->as_integer()->get();
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) throw ConfigError(name(key) + " must be >= 0", line_of(*n));
      }
      *out = static_cast<T>(v);
    }
    return true;
  }

  bool read_int_range(const std::string& key, IntRange* out) {
    const toml::node* n = get(key);
    if (!n) return false;
    const toml::array* a = n->as_array();
    if (!a || a->size() != 2 || !(*a)[0].is_integer() || !(*a)[1].is_integer()) {
      fail(*n, key, "a two-element integer array [lo, hi]");
    }
    out->lo = (*a)[0].as_integer()->get();
    out->hi = (*a)[1].as_integer()->get();
    if (out->hi < out->lo) {
      throw ConfigError(name(key) + " is empty (hi < lo)", line_of(*n));
    }
    return true;
  }

  bool read_real_range(const std::string& key, RealRange* out) {
    const toml::node* n = get(key);
    if (!n) return false;
    const toml::array* a = n->as_array();
    auto num = [](const toml::node& x, double* v) {
      if (x.is_integer()) {
        *v = static_cast<double>(x.as_integer()->get());
      } else if (x.is_floating_point()) {
        *v = x.as_floating_point()->get();
      } else {
        return false;
      }
      return true;
    };
    if (!a || a->size() != 2 || !num((*a)[0], &out->lo) ||
        !num((*a)[1], &out->hi)) {
      fail(*n, key, "a two-element numeric array [lo, hi]");
    }
    if (out->hi < out->lo) {
      throw ConfigError(name(key) + " is empty (hi < lo)", line_of(*n));
    }
    return true;
  }

  // Rejects any key that was never asked for.
  void finish() const {
    for (const auto& [k, v] : t_) {
      const std::string key(k.str());
      if (!used_.count(key)) {
        throw ConfigError("unknown key '" + name(key) + "'", line_of(v));
      }
    }
  }

  [[noreturn]] void fail(const toml::node& n, const std::string& key,
                         const char* want) const {
    throw ConfigError(name(key) + " must be " + want, line_of(n));
  }

  const toml::table& raw() const { return t_; }

 private:
  const toml::table& t_;
  std::string path_;
  std::set<std::string> used_;
};

const toml::table& as_table(const toml::node* n, const std::string& name) {
  if (!n->is_table()) {
    throw ConfigError(name + " must be a table", line_of(*n));
  }
  return *n->as_table();
}

GenModel parse_model(const std::string& s, int64_t line) {
  for (GenModel m : {GenModel::kAllAtOnce, GenModel::kPoisson,
                     GenModel::kAdversarial, GenModel::kTrace}) {
    if (s == gen_model_name(m)) return m;
  }
  throw ConfigError("generator.model '" + s +
                        "' is not one of all_at_once, poisson, adversarial, trace",
                    line);
}

void parse_generator(Table& g, ExperimentConfig& c, const std::string& base_dir,
                     std::map<std::string, int64_t>& lines) {
  std::string model;
  if (!g.read("model", &model)) {
    throw ConfigError("generator.model is required", line_of(g.raw()));
  }
  c.generator.model = parse_model(model, line_of(*g.get("model")));
  lines["generator"] = line_of(g.raw());
  g.read_int_range("memory", &c.generator.memory);
  g.read_int_range("prompt", &c.generator.prompt);
  g.read_int_range("output", &c.generator.output);
  g.read_int_range("count", &c.generator.count);
  if (const toml::node* n = g.get("count")) lines["count"] = line_of(*n);
  g.read_int_range("horizon", &c.generator.horizon);
  g.read_real_range("lambda", &c.generator.lambda);
  g.read("epsilon", &c.generator.epsilon);
  std::string noise;
  if (g.read("noise", &noise)) {
    if (noise == "two_sided") {
      c.generator.noise = NoiseMode::kTwoSided;
    } else if (noise == "overestimate") {
      c.generator.noise = NoiseMode::kOverestimate;
    } else {
      throw ConfigError("generator.noise must be two_sided or overestimate",
                        line_of(*g.get("noise")));
    }
  }
  if (const toml::node* n = g.get("adversarial_memory")) {
    const toml::array* a = n->as_array();
    if (!a || a->empty()) {
      g.fail(*n, "adversarial_memory", "a non-empty integer array");
    }
    for (const toml::node& x : *a) {
      if (!x.is_integer()) g.fail(*n, "adversarial_memory", "an integer array");
      c.adversarial_memory.push_back(x.as_integer()->get());
    }
    lines["adversarial_memory"] = line_of(*n);
  }
  if (const toml::node* n = g.get("trace")) {
    Table t(as_table(n, "generator.trace"), "generator.trace");
    TraceSource& src = c.trace;
    if (t.read("path", &src.path)) {
      const std::filesystem::path p(src.path);
      if (p.is_relative()) src.path = (std::filesystem::path(base_dir) / p).string();
    }
    t.read("requests", &src.requests);
    t.read("lambda_per_second", &src.lambda_per_second);
    t.read("rounds_per_second", &src.rounds_per_second);
    if (const toml::node* cn = t.get("corpus")) {
      Table k(as_table(cn, "generator.trace.corpus"), "generator.trace.corpus");
      k.read("size", &src.corpus.size);
      k.read("seed", &src.corpus.seed);
      k.read("prompt_mean", &src.corpus.prompt_mean);
      k.read("prompt_median", &src.corpus.prompt_median);
      k.read("output_mean", &src.corpus.output_mean);
      k.read("output_median", &src.corpus.output_median);
      k.read("max_tokens", &src.corpus.max_tokens);
      k.finish();
    }
    if (!(src.lambda_per_second > 0) || !(src.rounds_per_second > 0)) {
      throw ConfigError("generator.trace rates must be positive", line_of(*n));
    }
    if (src.requests < 1) {
      throw ConfigError("generator.trace.requests must be >= 1", line_of(*n));
    }
    lines["trace"] = line_of(*n);
    t.finish();
  }
  g.finish();
}

PolicyConfig parse_policy(Table& p) {
  PolicyConfig pc;
  std::string kind;
  if (!p.read("kind", &kind)) {
    throw ConfigError("policy.kind is required", line_of(p.raw()));
  }
  const auto k = parse_policy_kind(kind);
  if (!k) {
    throw ConfigError("policy.kind '" + kind + "' is not a known policy",
                      line_of(*p.get("kind")));
  }
  pc.kind = *k;
  p.read("alpha", &pc.alpha);
  p.read("beta", &pc.beta);
  p.finish();
  try {
    pc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy: ") + e.what(), line_of(p.raw()));
  }
  return pc;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty", 0);
  if (trials < 1) throw ConfigError("trials must be >= 1", 0);
  if (policies.empty()) throw ConfigError("at least one [[policy]] is required", 0);
  for (const PolicyConfig& p : policies) {
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("policy: ") + e.what(), 0);
    }
  }
  try {
    duration.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("duration: ") + e.what(), 0);
  }
  switch (generator.model) {
    case GenModel::kAllAtOnce:
    case GenModel::kPoisson:
      try {
        generator.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("generator: ") + e.what(), 0);
      }
      break;
    case GenModel::kAdversarial:
      if (adversarial_memory.empty()) {
        throw ConfigError("adversarial model needs generator.adversarial_memory", 0);
      }
      for (int64_t m : adversarial_memory) {
        const auto r = static_cast<int64_t>(std::llround(std::sqrt(double(m))));
        if (m < 4 || r * r != m) {
          throw ConfigError("adversarial_memory entries must be perfect squares >= 4",
                            0);
        }
      }
      break;
    case GenModel::kTrace:
      if (generator.memory.lo < 2) {
        throw ConfigError("generator.memory must be >= 2", 0);
      }
      if (generator.epsilon < 0 ||
          (generator.noise == NoiseMode::kTwoSided && generator.epsilon >= 1)) {
        throw ConfigError("generator.epsilon out of range for the noise mode", 0);
      }
      break;
  }
  if (compute_hindsight) {
    constexpr int64_t kMaxExact = 80;
    if (generator.model == GenModel::kAllAtOnce && generator.count.hi > kMaxExact) {
      throw ConfigError("compute_hindsight refuses generator.count above 80", 0);
    }
    if (generator.model == GenModel::kTrace &&
        static_cast<int64_t>(trace.requests) > kMaxExact) {
      throw ConfigError("compute_hindsight refuses more than 80 trace requests", 0);
    }
  }
  if (output.throughput) {
    if (duration.kind != DurationModel::Kind::kAffine) {
      throw ConfigError("output.throughput requires duration.kind = \"affine\"", 0);
    }
    if (!(output.throughput_window > 0)) {
      throw ConfigError("output.throughput_window must be positive", 0);
    }
  }
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name,
                              const std::string& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string(e.description()),
                      static_cast<int64_t>(e.source().begin.line));
  }
  ExperimentConfig c;
  std::map<std::string, int64_t> lines;
  Table t(root, "");
  if (!t.read("name", &c.name)) throw ConfigError("name is required", 1);
  if (t.read("trials", &c.trials)) lines["trials"] = line_of(*t.get("trials"));
  t.read("seed", &c.seed);
  if (t.read("compute_hindsight", &c.compute_hindsight)) {
    lines["compute_hindsight"] = line_of(*t.get("compute_hindsight"));
  }
  t.read("output_dir", &c.output_dir);

  const toml::node* g = t.get("generator");
  if (!g) throw ConfigError("[generator] table is required", 1);
  {
    Table gt(as_table(g, "generator"), "generator");
    parse_generator(gt, c, base_dir, lines);
  }

  const toml::node* p = t.get("policy");
  if (!p) throw ConfigError("at least one [[policy]] is required", 1);
  const toml::array* pa = p->as_array();
  if (!pa) throw ConfigError("policy must be an array of tables ([[policy]])", line_of(*p));
  for (const toml::node& e : *pa) {
    Table pt(as_table(&e, "policy"), "policy");
    c.policies.push_back(parse_policy(pt));
  }

  if (const toml::node* d = t.get("duration")) {
    Table dt(as_table(d, "duration"), "duration");
    std::string kind;
    if (dt.read("kind", &kind)) {
      if (kind == "unit") {
        c.duration.kind = DurationModel::Kind::kUnit;
      } else if (kind == "affine") {
        c.duration.kind = DurationModel::Kind::kAffine;
      } else {
        throw ConfigError("duration.kind must be unit or affine",
                          line_of(*dt.get("kind")));
      }
    }
    const bool has_c0 = dt.read("c0", &c.duration.c0);
    const bool has_c1 = dt.read("c1", &c.duration.c1);
    if (c.duration.kind == DurationModel::Kind::kAffine && !(has_c0 && has_c1)) {
      throw ConfigError("affine duration requires c0 and c1", line_of(*d));
    }
    dt.finish();
    lines["duration"] = line_of(*d);
  }
  if (const toml::node* s = t.get("solver")) {
    Table st(as_table(s, "solver"), "solver");
    st.read("node_budget", &c.solver.node_budget);
    st.read("time_budget_seconds", &c.solver.time_budget_seconds);
    st.finish();
    if (c.solver.node_budget < 1) {
      throw ConfigError("solver.node_budget must be >= 1", line_of(*s));
    }
  }
  if (const toml::node* o = t.get("output")) {
    Table ot(as_table(o, "output"), "output");
    ot.read("memory_timeline", &c.output.memory_timeline);
    ot.read("throughput", &c.output.throughput);
    ot.read("throughput_window", &c.output.throughput_window);
    ot.finish();
    lines["output"] = line_of(*o);
  }
  t.finish();

  // Cross-field checks, pinned to the most relevant line.
  try {
    c.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    int64_t line = lines["generator"];
    if (msg.find("trials") != std::string::npos) line = lines["trials"];
    if (msg.find("compute_hindsight") != std::string::npos) {
      line = lines["compute_hindsight"];
    }
    if (msg.find("adversarial") != std::string::npos && lines["adversarial_memory"]) {
      line = lines["adversarial_memory"];
    }
    if (msg.find("duration") != std::string::npos && lines["duration"]) {
      line = lines["duration"];
    }
    if (msg.find("output.") != std::string::npos && lines["output"]) {
      line = lines["output"];
    }
    throw ConfigError(msg, line);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), 0);
  }
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_config(text, path, dir.empty() ? "." : dir);
}

// ---------------------------------------------------------------------------
// Trials

uint64_t trial_seed(uint64_t base_seed, int64_t trial) {
  return Rng::mix(base_seed, static_cast<uint64_t>(trial));
}

const char* hindsight_status_name(HindsightStatus status) {
  switch (status) {
    case HindsightStatus::kNone:
      return "none";
    case HindsightStatus::kOptimal:
      return "optimal";
    case HindsightStatus::kBounded:
      return "bounded";
    case HindsightStatus::kTooLarge:
      return "too_large";
  }
  return "none";
}

namespace {

constexpr RunOptions kQuiet{0, 0, EventDetail::kNone};

// The long request's start round under `policy`, from a run on it alone.
int64_t probe_start(int64_t memory_limit, const PolicyConfig& policy) {
  Instance probe(memory_limit, {{0, 0, 1, memory_limit - 1, memory_limit - 1}});
  return run(probe, policy, {}, kQuiet).schedule.start[0];
}

}  // namespace

Instance trial_instance(const ExperimentConfig& config, int64_t trial,
                        const PolicyConfig* policy) {
  const uint64_t seed = trial_seed(config.seed, trial);
  GenSpec g = config.generator;
  g.seed = seed;
  switch (g.model) {
    case GenModel::kAllAtOnce:
      return gen_all_at_once(g);
    case GenModel::kPoisson:
      return gen_poisson(g);
    case GenModel::kAdversarial: {
      const auto& ms = config.adversarial_memory;
      const int64_t m = ms[static_cast<size_t>(trial) % ms.size()];
      const int64_t b = probe_start(m, policy ? *policy : PolicyConfig{});
      return gen_adversarial(m, b);
    }
    case GenModel::kTrace: {
      const TraceSource& src = config.trace;
      const TraceSampling pick = TraceSampling::random_k(src.requests, seed);
      const std::vector<TraceRecord> rows =
          src.path.empty() ? sample_trace(gen_corpus(src.corpus), pick)
                           : load_trace(src.path, pick).records;
      Rng rng(Rng::mix(seed, 3));
      const int64_t m = rng.uniform_int(g.memory.lo, g.memory.hi);
      Instance inst = trace_to_instance(rows, src.lambda_per_second,
                                        src.rounds_per_second, Rng::mix(seed, 2), m);
      if (g.epsilon > 0) {
        inst = apply_prediction_noise(inst, g.epsilon, g.noise, Rng::mix(seed, 1));
      }
      return inst;
    }
  }
  throw std::logic_error("unknown generator model");
}

TrialOutput run_trial(const ExperimentConfig& config, int64_t trial) {
  TrialOutput out;
  const uint64_t seed = trial_seed(config.seed, trial);
  const bool adversarial = config.generator.model == GenModel::kAdversarial;
  std::optional<Instance> shared;
  if (!adversarial) shared = trial_instance(config, trial);

  // Hindsight bounds per distinct instance; adversarial instances depend on
  // the probe's b, so cache by it.
  std::map<int64_t, BoundReport> bounds;
  std::map<int64_t, std::string> bound_errors;
  auto hindsight = [&](const Instance& inst, int64_t key) -> const BoundReport* {
    if (!config.compute_hindsight) return nullptr;
    if (config.generator.model == GenModel::kPoisson && inst.size() > 80) {
      return nullptr;
    }
    if (!bounds.count(key) && !bound_errors.count(key)) {
      try {
        bounds[key] = solve_ip(inst, config.solver).bound;
      } catch (const std::exception& e) {
        bound_errors[key] = e.what();
      }
    }
    auto it = bounds.find(key);
    return it == bounds.end() ? nullptr : &it->second;
  };

  for (size_t k = 0; k < config.policies.size(); ++k) {
    PolicyConfig pc = config.policies[k];
    pc.rng_seed = Rng::mix(seed, 100 + k);
    const Instance inst = adversarial ? trial_instance(config, trial, &pc) : *shared;
    const int64_t key = adversarial ? inst.requests().back().arrival : 0;

    ResultRow row;
    row.trial = trial;
    row.instance_seed = seed;
    row.policy = pc.label();
    row.n = static_cast<int64_t>(inst.size());
    row.memory_limit = inst.memory_limit();
    try {
      const RunReport rep = run(inst, pc, config.duration, kQuiet);
      row.tel = rep.metrics.tel;
      row.avg_latency = rep.metrics.avg_latency;
      row.avg_latency_seconds = rep.avg_latency_seconds;
      row.evictions = rep.evictions;
      row.clearing_events = static_cast<int64_t>(rep.clearing_events.size());
      row.wall_time = rep.wall_time;
      if (config.output.memory_timeline) {
        for (const auto& [r, o] : rep.metrics.memory_timeline) {
          out.timeline.push_back({trial, row.policy, r, o});
        }
      }
      if (config.output.throughput) {
        for (const ThroughputPoint& p :
             throughput_series(rep, config.output.throughput_window)) {
          out.throughput.push_back({trial, row.policy, p});
        }
      }
    } catch (const LivelockError& e) {
      row.error = e.what();
      spdlog::warn("trial {} {}: {}", trial, row.policy, e.what());
    }
    if (config.compute_hindsight) {
      const BoundReport* b = hindsight(inst, key);
      if (!b) {
        row.hindsight = HindsightStatus::kTooLarge;
        if (bound_errors.count(key)) row.error += bound_errors[key];
      } else {
        row.hindsight =
            b->optimal ? HindsightStatus::kOptimal : HindsightStatus::kBounded;
        row.opt_upper = b->upper;
        row.opt_lower = to_double(b->lower);
        if (row.error.empty() && row.n > 0) {
          row.ratio = static_cast<double>(row.tel) / static_cast<double>(b->upper);
          row.ratio_upper = static_cast<double>(row.tel) / row.opt_lower;
        } else if (row.error.empty()) {
          row.ratio = row.ratio_upper = 1.0;
        }
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

TrialOutput run_experiment(const ExperimentConfig& config, int jobs,
                           const std::vector<int64_t>& only_trials) {
  std::vector<int64_t> trials = only_trials;
  if (trials.empty()) {
    for (int64_t i = 0; i < config.trials; ++i) trials.push_back(i);
  }
  std::vector<TrialOutput> parts(trials.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= trials.size()) return;
      try {
        parts[i] = run_trial(config, trials[i]);
        spdlog::debug("trial {} done", trials[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(trials.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  TrialOutput all;
  for (TrialOutput& p : parts) {
    std::move(p.rows.begin(), p.rows.end(), std::back_inserter(all.rows));
    std::move(p.timeline.begin(), p.timeline.end(), std::back_inserter(all.timeline));
    std::move(p.throughput.begin(), p.throughput.end(),
              std::back_inserter(all.throughput));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

constexpr const char* kResultsHeader =
    "trial,instance_seed,policy,n,memory_limit,tel,avg_latency,"
    "avg_latency_seconds,hindsight,opt_upper,opt_lower,ratio,ratio_upper,"
    "evictions,clearing_events,wall_time,error";

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_quotes) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        in_quotes = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

HindsightStatus parse_status(const std::string& s) {
  for (HindsightStatus h : {HindsightStatus::kNone, HindsightStatus::kOptimal,
                            HindsightStatus::kBounded, HindsightStatus::kTooLarge}) {
    if (s == hindsight_status_name(h)) return h;
  }
  throw std::runtime_error("results.csv: unknown hindsight status " + s);
}

struct Stats {
  int64_t count = 0;
  double mean = 0, std = 0, min = 0, max = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.count = static_cast<int64_t>(v.size());
  if (v.empty()) return s;
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

nlohmann::ordered_json stats_json(const std::vector<double>& v) {
  const Stats s = stats_of(v);
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std},
          {"min", s.min},     {"max", s.max}};
}

}  // namespace

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const ResultRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                       r.trial, r.instance_seed, quote(r.policy), r.n,
                       r.memory_limit, r.tel, r.avg_latency,
                       r.avg_latency_seconds, hindsight_status_name(r.hindsight),
                       r.opt_upper, r.opt_lower, r.ratio, r.ratio_upper,
                       r.evictions, r.clearing_events, r.wall_time,
                       quote(r.error));
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw std::runtime_error("results.csv: unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 17) throw std::runtime_error("results.csv: bad row " + line);
    ResultRow r;
    r.trial = std::stoll(f[0]);
    r.instance_seed = std::stoull(f[1]);
    r.policy = f[2];
    r.n = std::stoll(f[3]);
    r.memory_limit = std::stoll(f[4]);
    r.tel = std::stoll(f[5]);
    r.avg_latency = std::strtod(f[6].c_str(), nullptr);
    r.avg_latency_seconds = std::strtod(f[7].c_str(), nullptr);
    r.hindsight = parse_status(f[8]);
    r.opt_upper = std::stoll(f[9]);
    r.opt_lower = std::strtod(f[10].c_str(), nullptr);
    r.ratio = std::strtod(f[11].c_str(), nullptr);
    r.ratio_upper = std::strtod(f[12].c_str(), nullptr);
    r.evictions = std::stoll(f[13]);
    r.clearing_events = std::stoll(f[14]);
    r.wall_time = std::strtod(f[15].c_str(), nullptr);
    r.error = f[16];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string summary_json(const ExperimentConfig& config,
                         const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ResultRow*>> by_policy;
  for (const ResultRow& r : rows) {
    if (!by_policy.count(r.policy)) order.push_back(r.policy);
    by_policy[r.policy].push_back(&r);
  }
  nlohmann::ordered_json j;
  j["schema"] = "kvsched.summary";
  j["schema_version"] = 1;
  j["name"] = config.name;
  j["seed"] = config.seed;
  j["rows"] = rows.size();
  auto& pol = j["policies"] = nlohmann::ordered_json::array();
  for (const std::string& name : order) {
    std::vector<double> tel, lat, lat_s, ratio, ratio_up, wall;
    int64_t errors = 0, evictions = 0, clearing = 0, proven = 0, bounded = 0,
            exact = 0;
    for (const ResultRow* r : by_policy[name]) {
      if (!r->error.empty()) {
        ++errors;
        continue;
      }
      tel.push_back(static_cast<double>(r->tel));
      lat.push_back(r->avg_latency);
      lat_s.push_back(r->avg_latency_seconds);
      wall.push_back(r->wall_time);
      evictions += r->evictions;
      clearing += r->clearing_events;
      if (r->hindsight == HindsightStatus::kOptimal ||
          r->hindsight == HindsightStatus::kBounded) {
        ratio.push_back(r->ratio);
        ratio_up.push_back(r->ratio_upper);
        if (r->hindsight == HindsightStatus::kOptimal) {
          ++proven;
          if (r->tel == r->opt_upper) ++exact;
        } else {
          ++bounded;
        }
      }
    }
    nlohmann::ordered_json p;
    p["policy"] = name;
    p["trials"] = by_policy[name].size();
    p["errors"] = errors;
    p["tel"] = stats_json(tel);
    p["avg_latency"] = stats_json(lat);
    p["avg_latency_seconds"] = stats_json(lat_s);
    p["wall_time"] = stats_json(wall);
    p["evictions"] = evictions;
    p["clearing_events"] = clearing;
    if (!ratio.empty()) {
      p["hindsight"] = {{"proven", proven},
                        {"bounded", bounded},
                        {"exactly_optimal", exact},
                        {"ratio", stats_json(ratio)},
                        {"ratio_upper", stats_json(ratio_up)}};
    }
    pol.push_back(std::move(p));
  }
  return j.dump(2) + "\n";
}

std::string timeline_csv(const std::vector<TimelinePoint>& points) {
  std::string out = "trial,policy,round,occupancy\n";
  for (const TimelinePoint& p : points) {
    out += fmt::format("{},{},{},{}\n", p.trial, quote(p.policy), p.round,
                       p.occupancy);
  }
  return out;
}

std::string throughput_csv(const std::vector<ThroughputRow>& rows) {
  std::string out = "trial,policy,window_start,tokens,arrival_tokens\n";
  for (const ThroughputRow& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", r.trial, quote(r.policy),
                       r.point.window_start, r.point.tokens,
                       r.point.arrival_tokens);
  }
  return out;
}

void write_artifacts(const ExperimentConfig& config, const TrialOutput& out,
                     const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_file((d / "results.csv").string(), results_csv(out.rows));
  write_file((d / "summary.json").string(), summary_json(config, out.rows));
  if (config.output.memory_timeline) {
    write_file((d / "memory_timeline.csv").string(), timeline_csv(out.timeline));
  }
  if (config.output.throughput) {
    write_file((d / "throughput.csv").string(), throughput_csv(out.throughput));
  }
}

}  // namespace kvsched
