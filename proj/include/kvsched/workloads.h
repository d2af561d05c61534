#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kvsched/core.h"

namespace kvsched {

struct IntRange {
  int64_t lo = 0;
  int64_t hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

enum class GenModel { kAllAtOnce, kPoisson, kAdversarial, kTrace };
enum class NoiseMode { kTwoSided, kOverestimate };

const char* gen_model_name(GenModel model);

// Sampling rules for the synthetic arrival models. Draw order per instance:
// M, then n (or T and lambda), then per request s followed by o.
struct GenSpec {
  GenModel model = GenModel::kAllAtOnce;
  uint64_t seed = 0;
  IntRange memory{30, 50};
  IntRange prompt{1, 5};
  IntRange output{1, 0};  // hi <= 0 means "up to M - s"
  IntRange count{40, 60};
  IntRange horizon{40, 60};
  RealRange lambda{0.5, 1.5};
  double epsilon = 0.0;  // prediction noise; 0 gives exact predictions
  NoiseMode noise = NoiseMode::kOverestimate;

  // Throws std::invalid_argument on empty or contradictory ranges.
  void validate() const;
};

// All requests at round 0.
Instance gen_all_at_once(const GenSpec& spec);

// Poisson(lambda) arrivals in each round 1..T.
Instance gen_poisson(const GenSpec& spec);

// One long request at 0 and M/2 unit requests arriving just before it
// finishes, given the round `b` at which the policy starts the long one.
Instance gen_adversarial(int64_t memory_limit, int64_t b);

// Release round of the short requests in gen_adversarial.
int64_t adversarial_release(int64_t memory_limit, int64_t b);

struct TraceRecord {
  int id = 0;
  bool has_arrival = false;
  double arrival_seconds = 0.0;
  int64_t prompt_tokens = 1;
  int64_t output_tokens = 1;
};

struct TraceSampling {
  size_t k = 0;  // 0 keeps every row
  uint64_t seed = 0;

  static TraceSampling all() { return {}; }
  static TraceSampling random_k(size_t k, uint64_t seed) { return {k, seed}; }
};

struct TraceLoad {
  std::vector<TraceRecord> records;
  int64_t skipped = 0;  // rows with a zero token count
};

// Partial Fisher-Yates pick of k rows, returned in their original order.
std::vector<TraceRecord> sample_trace(std::vector<TraceRecord> records,
                                      const TraceSampling& sampling);

// JSONL rows {"id", "arrival"?, "prompt_tokens", "output_tokens"}. Throws
// std::runtime_error naming the line on malformed input.
TraceLoad load_trace(const std::string& path, const TraceSampling& sampling);
TraceLoad read_trace(std::istream& in, const TraceSampling& sampling);
void write_trace(const std::vector<TraceRecord>& records, std::ostream& out);

// Poisson arrival times in seconds, mapped to rounds; ids follow arrival
// order. Outputs longer than M - s are cut to fit.
Instance trace_to_instance(const std::vector<TraceRecord>& records,
                           double lambda_per_second, double rounds_per_second,
                           uint64_t seed, int64_t memory_limit);

// Log-normal prompt and output lengths fitted to a mean and a median.
struct CorpusSpec {
  size_t size = 10000;
  uint64_t seed = 0;
  double prompt_mean = 40.62;
  double prompt_median = 11.0;
  double output_mean = 85.32;
  double output_median = 45.0;
  int64_t max_tokens = 2048;  // per field
};

std::vector<TraceRecord> gen_corpus(const CorpusSpec& spec);

// Replaces predictions with noisy ones; true lengths are untouched.
// two_sided: uniform integer on [ceil((1-e)o), floor((1+e)o)], at least 1.
// overestimate: uniform integer on [o, floor((1+e)o)].
Instance apply_prediction_noise(const Instance& instance, double epsilon,
                                NoiseMode mode, uint64_t seed);

}  // namespace kvsched
