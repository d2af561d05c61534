#include "kvsched/workloads.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "kvsched/random.h"

namespace kvsched {

const char* gen_model_name(GenModel model) {
  switch (model) {
    case GenModel::kAllAtOnce:
      return "all_at_once";
    case GenModel::kPoisson:
      return "poisson";
    case GenModel::kAdversarial:
      return "adversarial";
    case GenModel::kTrace:
      return "trace";
  }
  return "unknown";
}

void GenSpec::validate() const {
  auto check = [](const IntRange& r, const char* name, int64_t min_lo) {
    if (r.lo < min_lo || r.hi < r.lo) {
      throw std::invalid_argument(std::string("range ") + name + " is empty or below " +
                                  std::to_string(min_lo));
    }
  };
  check(memory, "memory", 2);
  check(prompt, "prompt", 1);
  if (output.hi > 0) check(output, "output", 1);
  if (model == GenModel::kAllAtOnce) check(count, "count", 0);
  if (model == GenModel::kPoisson) {
    check(horizon, "horizon", 1);
    if (!(lambda.lo >= 0 && lambda.hi >= lambda.lo)) {
      throw std::invalid_argument("range lambda is empty or negative");
    }
  }
  if (prompt.hi >= memory.lo) {
    throw std::invalid_argument(
        "prompt range must stay below the smallest memory limit");
  }
  if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
  if (noise == NoiseMode::kTwoSided && epsilon >= 1) {
    throw std::invalid_argument("two-sided noise needs epsilon < 1");
  }
}

namespace {

Request draw_request(Rng& rng, const GenSpec& spec, int64_t m, int id,
                     int64_t arrival) {
  Request r;
  r.id = id;
  r.arrival = arrival;
  r.prompt = rng.uniform_int(spec.prompt.lo, spec.prompt.hi);
  const int64_t hi = spec.output.hi > 0 ? std::min(spec.output.hi, m - r.prompt)
                                        : m - r.prompt;
  const int64_t lo = std::min(spec.output.lo, hi);
  r.output = rng.uniform_int(std::max<int64_t>(1, lo), hi);
  r.predicted = r.output;
  return r;
}

Instance with_noise(Instance inst, const GenSpec& spec) {
  if (spec.epsilon <= 0) return inst;
  return apply_prediction_noise(inst, spec.epsilon, spec.noise,
                                Rng::mix(spec.seed, 1));
}

}  // namespace

Instance gen_all_at_once(const GenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int64_t m = rng.uniform_int(spec.memory.lo, spec.memory.hi);
  const int64_t n = rng.uniform_int(spec.count.lo, spec.count.hi);
  std::vector<Request> reqs;
  for (int64_t i = 0; i < n; ++i) {
    reqs.push_back(draw_request(rng, spec, m, static_cast<int>(i), 0));
  }
  return with_noise(Instance(m, std::move(reqs)), spec);
}

Instance gen_poisson(const GenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int64_t m = rng.uniform_int(spec.memory.lo, spec.memory.hi);
  const int64_t horizon = rng.uniform_int(spec.horizon.lo, spec.horizon.hi);
  const double lambda = rng.uniform_real(spec.lambda.lo, spec.lambda.hi);
  std::vector<Request> reqs;
  for (int64_t t = 1; t <= horizon; ++t) {
    const int64_t k = rng.poisson(lambda);
    for (int64_t j = 0; j < k; ++j) {
      reqs.push_back(
          draw_request(rng, spec, m, static_cast<int>(reqs.size()), t));
    }
  }
  return with_noise(Instance(m, std::move(reqs)), spec);
}

int64_t adversarial_release(int64_t memory_limit, int64_t b) {
  const auto root = static_cast<int64_t>(std::llround(std::sqrt(
      static_cast<double>(memory_limit))));
  // b + M - sqrt(M)/2, rounded down.
  return b + memory_limit - root / 2;
}

Instance gen_adversarial(int64_t memory_limit, int64_t b) {
  if (memory_limit < 4) {
    throw std::invalid_argument("adversarial instance needs M >= 4");
  }
  const auto root = static_cast<int64_t>(
      std::llround(std::sqrt(static_cast<double>(memory_limit))));
  if (root * root != memory_limit) {
    throw std::invalid_argument("adversarial instance needs a perfect square M");
  }
  if (b < 0) throw std::invalid_argument("b must be >= 0");
  std::vector<Request> reqs;
  reqs.push_back({0, 0, 1, memory_limit - 1, memory_limit - 1});
  const int64_t release = adversarial_release(memory_limit, b);
  for (int i = 1; i <= memory_limit / 2; ++i) {
    reqs.push_back({i, release, 1, 1, 1});
  }
  return Instance(memory_limit, std::move(reqs));
}

std::vector<TraceRecord> sample_trace(std::vector<TraceRecord> records,
                                      const TraceSampling& sampling) {
  if (sampling.k == 0 || sampling.k >= records.size()) return records;
  std::vector<size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(sampling.seed);
  for (size_t i = 0; i < sampling.k; ++i) {
    const auto j = static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(i), static_cast<int64_t>(idx.size()) - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(sampling.k);
  std::sort(idx.begin(), idx.end());
  std::vector<TraceRecord> picked;
  picked.reserve(idx.size());
  for (size_t i : idx) picked.push_back(records[i]);
  return picked;
}

TraceLoad read_trace(std::istream& in, const TraceSampling& sampling) {
  TraceLoad out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TraceRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.id = j.at("id").get<int>();
      rec.prompt_tokens = j.at("prompt_tokens").get<int64_t>();
      rec.output_tokens = j.at("output_tokens").get<int64_t>();
      if (j.contains("arrival") && !j["arrival"].is_null()) {
        rec.has_arrival = true;
        rec.arrival_seconds = j["arrival"].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("trace line " + std::to_string(lineno) + ": " +
                               e.what());
    }
    if (rec.prompt_tokens < 0 || rec.output_tokens < 0) {
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": negative token count");
    }
    if (rec.prompt_tokens == 0 || rec.output_tokens == 0) {
      ++out.skipped;
      continue;
    }
    out.records.push_back(rec);
  }
  if (out.skipped > 0) {
    spdlog::warn("trace: skipped {} rows with zero tokens", out.skipped);
  }
  out.records = sample_trace(std::move(out.records), sampling);
  return out;
}

TraceLoad load_trace(const std::string& path, const TraceSampling& sampling) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return read_trace(in, sampling);
}

void write_trace(const std::vector<TraceRecord>& records, std::ostream& out) {
  for (const TraceRecord& r : records) {
    nlohmann::ordered_json j{{"id", r.id}};
    if (r.has_arrival) j["arrival"] = r.arrival_seconds;
    j["prompt_tokens"] = r.prompt_tokens;
    j["output_tokens"] = r.output_tokens;
    out << j.dump() << '\n';
  }
}

Instance trace_to_instance(const std::vector<TraceRecord>& records,
                           double lambda_per_second, double rounds_per_second,
                           uint64_t seed, int64_t memory_limit) {
  if (!(lambda_per_second > 0) || !(rounds_per_second > 0)) {
    throw std::invalid_argument("rates must be positive");
  }
  Rng rng(seed);
  double sec = 0.0;
  std::vector<Request> reqs;
  int64_t truncated = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    sec += rng.exponential(lambda_per_second);
    Request r;
    r.id = static_cast<int>(i);
    r.arrival = static_cast<int64_t>(std::floor(sec * rounds_per_second));
    r.prompt = records[i].prompt_tokens;
    r.output = records[i].output_tokens;
    if (r.prompt + 1 > memory_limit) {
      throw std::invalid_argument("trace prompt does not fit the memory limit");
    }
    if (r.prompt + r.output > memory_limit) {
      r.output = memory_limit - r.prompt;
      ++truncated;
    }
    r.predicted = r.output;
    reqs.push_back(r);
  }
  if (truncated > 0) {
    spdlog::warn("trace: cut {} outputs to fit memory {}", truncated,
                 memory_limit);
  }
  return Instance(memory_limit, std::move(reqs));
}

std::vector<TraceRecord> gen_corpus(const CorpusSpec& spec) {
  // A log-normal with median m and mean u has mu = ln m and
  // sigma^2 = 2 ln(u / m).
  auto params = [](double mean, double median) {
    if (!(mean > median && median > 0)) {
      throw std::invalid_argument("log-normal fit needs mean > median > 0");
    }
    return std::pair{std::log(median), std::sqrt(2.0 * std::log(mean / median))};
  };
  const auto [pm, ps] = params(spec.prompt_mean, spec.prompt_median);
  const auto [om, os] = params(spec.output_mean, spec.output_median);
  Rng rng(spec.seed);
  auto draw = [&](double mu, double sigma) {
    const double x = std::exp(mu + sigma * rng.normal());
    return std::clamp<int64_t>(std::llround(x), 1, spec.max_tokens);
  };
  std::vector<TraceRecord> out;
  out.reserve(spec.size);
  for (size_t i = 0; i < spec.size; ++i) {
    TraceRecord r;
    r.id = static_cast<int>(i);
    r.prompt_tokens = draw(pm, ps);
    r.output_tokens = draw(om, os);
    out.push_back(r);
  }
  return out;
}

Instance apply_prediction_noise(const Instance& instance, double epsilon,
                                NoiseMode mode, uint64_t seed) {
  if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
  if (mode == NoiseMode::kTwoSided && epsilon >= 1) {
    throw std::invalid_argument("two-sided noise needs epsilon < 1");
  }
  Rng rng(seed);
  std::vector<Request> reqs = instance.requests();
  std::sort(reqs.begin(), reqs.end(),
            [](const Request& a, const Request& b) { return a.id < b.id; });
  constexpr double kSlack = 1e-9;
  for (Request& r : reqs) {
    const double o = static_cast<double>(r.output);
    const auto hi = static_cast<int64_t>(std::floor((1 + epsilon) * o + kSlack));
    int64_t lo = r.output;
    if (mode == NoiseMode::kTwoSided) {
      lo = std::max<int64_t>(
          1, static_cast<int64_t>(std::ceil((1 - epsilon) * o - kSlack)));
    }
    r.predicted = rng.uniform_int(lo, std::max(lo, hi));
  }
  return Instance(instance.memory_limit(), std::move(reqs));
}

}  // namespace kvsched
