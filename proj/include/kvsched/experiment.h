#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kvsched/engine.h"
#include "kvsched/hindsight.h"
#include "kvsched/schedulers.h"
#include "kvsched/workloads.h"

namespace kvsched {

// Thrown for any config problem; `line` is 0 when no position applies.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int64_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int64_t line() const { return line_; }

 private:
  int64_t line_;
};

// Where trace-model requests come from: a JSONL file, or a synthetic corpus.
struct TraceSource {
  std::string path;  // empty: use corpus
  CorpusSpec corpus;
  size_t requests = 1000;  // rows sampled per trial
  double lambda_per_second = 50.0;
  double rounds_per_second = 10.0;
};

struct OutputOptions {
  bool memory_timeline = false;
  bool throughput = false;
  double throughput_window = 1.0;  // seconds
};

struct ExperimentConfig {
  std::string name;
  GenSpec generator;
  std::vector<int64_t> adversarial_memory;  // M per trial, cycled
  TraceSource trace;
  std::vector<PolicyConfig> policies;
  int64_t trials = 1;
  uint64_t seed = 0;
  bool compute_hindsight = false;
  SolveOptions solver{0.0, 2'000'000};
  DurationModel duration;
  std::string output_dir = "out";
  OutputOptions output;

  // Cross-field checks; throws ConfigError.
  void validate() const;
};

// Parses TOML text. Unknown keys, wrong types and out-of-range values are
// reported with the offending line. `base_dir` resolves relative trace paths.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name = "config",
                              const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// Instance seed for trial i; policy seeds derive from it.
uint64_t trial_seed(uint64_t base_seed, int64_t trial);

enum class HindsightStatus { kNone, kOptimal, kBounded, kTooLarge };
const char* hindsight_status_name(HindsightStatus status);

struct ResultRow {
  int64_t trial = 0;
  uint64_t instance_seed = 0;
  std::string policy;
  int64_t n = 0;
  int64_t memory_limit = 0;
  int64_t tel = 0;
  double avg_latency = 0.0;
  double avg_latency_seconds = 0.0;
  HindsightStatus hindsight = HindsightStatus::kNone;
  int64_t opt_upper = 0;
  double opt_lower = 0.0;
  double ratio = 0.0;        // tel / opt_upper; exact when optimal
  double ratio_upper = 0.0;  // tel / opt_lower
  int64_t evictions = 0;
  int64_t clearing_events = 0;
  double wall_time = 0.0;  // simulated seconds
  std::string error;       // livelock or solver failure; metrics then zero
};

struct TimelinePoint {
  int64_t trial;
  std::string policy;
  int64_t round;
  int64_t occupancy;
};

struct ThroughputRow {
  int64_t trial;
  std::string policy;
  ThroughputPoint point;
};

struct TrialOutput {
  std::vector<ResultRow> rows;
  std::vector<TimelinePoint> timeline;
  std::vector<ThroughputRow> throughput;
};

// Builds the instance for one trial. For the adversarial model, `policy`
// selects the probe run that fixes b.
Instance trial_instance(const ExperimentConfig& config, int64_t trial,
                        const PolicyConfig* policy = nullptr);

TrialOutput run_trial(const ExperimentConfig& config, int64_t trial);

// Runs every trial on `jobs` worker threads; output is in trial order.
TrialOutput run_experiment(const ExperimentConfig& config, int jobs,
                           const std::vector<int64_t>& only_trials = {});

std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);
// Per-policy statistics; a pure function of the rows, so recomputing it from
// a parsed results.csv gives the same document.
std::string summary_json(const ExperimentConfig& config,
                         const std::vector<ResultRow>& rows);
std::string timeline_csv(const std::vector<TimelinePoint>& points);
std::string throughput_csv(const std::vector<ThroughputRow>& rows);

// Writes results.csv, summary.json and the optional series into `dir`.
void write_artifacts(const ExperimentConfig& config, const TrialOutput& out,
                     const std::string& dir);

}  // namespace kvsched
