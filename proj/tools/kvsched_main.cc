// kvsched: experiment runner and instance tooling.
//
//   kvsched run --config configs/am1_paper.toml [--seed N] [--jobs N] [--out DIR]
//   kvsched gen --model poisson --seed 7 [--out instance.json]
//   kvsched validate --instance i.json --schedule s.json
//   kvsched solve --instance i.json [--node-budget N] [--out schedule.json]
//
// Exit codes: 0 ok, 1 schedule violation or runtime failure, 2 bad input.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "kvsched/experiment.h"
#include "kvsched/hindsight.h"
#include "kvsched/io.h"
#include "kvsched/workloads.h"

namespace {

constexpr int kBadInput = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("kvsched");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("KVSCHED_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honour real ones.
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    }
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    kvsched::write_file(path, text);
  }
}

struct RunArgs {
  std::string config;
  std::optional<uint64_t> seed;
  int jobs = 0;
  std::string out;
  std::vector<int64_t> trials;
};

int cmd_run(const RunArgs& a) {
  kvsched::ExperimentConfig cfg;
  try {
    cfg = kvsched::load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    for (int64_t t : a.trials) {
      if (t < 0 || t >= cfg.trials) {
        throw kvsched::ConfigError("--trial " + std::to_string(t) +
                                       " is outside [0, trials)", 0);
      }
    }
  } catch (const kvsched::ConfigError& e) {
    std::cerr << a.config << ": " << e.what() << "\n";
    return kBadInput;
  }
  int jobs = a.jobs;
  if (jobs <= 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  const std::string dir = a.out.empty() ? cfg.output_dir : a.out;
  spdlog::info("{}: {} trials x {} policies on {} workers -> {}", cfg.name,
               a.trials.empty() ? cfg.trials : int64_t(a.trials.size()),
               cfg.policies.size(), jobs, dir);
  const kvsched::TrialOutput out = kvsched::run_experiment(cfg, jobs, a.trials);
  kvsched::write_artifacts(cfg, out, dir);
  int64_t bounded = 0;
  for (const auto& r : out.rows) {
    if (r.hindsight == kvsched::HindsightStatus::kBounded) ++bounded;
  }
  if (bounded > 0) {
    spdlog::warn("{} rows carry solver bounds instead of a proven optimum",
                 bounded);
  }
  std::cout << "wrote " << out.rows.size() << " rows to " << dir << "\n";
  return 0;
}

struct GenArgs {
  std::string config;
  int64_t trial = 0;
  std::string model = "all_at_once";
  std::optional<uint64_t> seed;
  std::vector<int64_t> memory, prompt, output, count, horizon;
  std::vector<double> lambda;
  double epsilon = 0.0;
  std::string noise = "overestimate";
  int64_t b = 0;
  std::string out;
};

kvsched::IntRange to_range(const std::vector<int64_t>& v, kvsched::IntRange d) {
  if (v.empty()) return d;
  return {v[0], v.size() > 1 ? v[1] : v[0]};
}

int cmd_gen(const GenArgs& a) {
  try {
    if (!a.config.empty()) {
      kvsched::ExperimentConfig cfg = kvsched::load_config(a.config);
      cfg.seed = *a.seed;
      emit(a.out, kvsched::instance_to_json(kvsched::trial_instance(cfg, a.trial)));
      return 0;
    }
    kvsched::GenSpec g;
    g.seed = *a.seed;
    g.memory = to_range(a.memory, g.memory);
    g.prompt = to_range(a.prompt, g.prompt);
    g.output = to_range(a.output, g.output);
    g.count = to_range(a.count, g.count);
    g.horizon = to_range(a.horizon, g.horizon);
    if (!a.lambda.empty()) {
      g.lambda = {a.lambda[0], a.lambda.size() > 1 ? a.lambda[1] : a.lambda[0]};
    }
    g.epsilon = a.epsilon;
    g.noise = a.noise == "two_sided" ? kvsched::NoiseMode::kTwoSided
                                     : kvsched::NoiseMode::kOverestimate;
    kvsched::Instance inst;
    if (a.model == "all_at_once") {
      inst = kvsched::gen_all_at_once(g);
    } else if (a.model == "poisson") {
      g.model = kvsched::GenModel::kPoisson;
      inst = kvsched::gen_poisson(g);
    } else if (a.model == "adversarial") {
      inst = kvsched::gen_adversarial(g.memory.lo, a.b);
    } else {
      std::cerr << "gen: unknown model " << a.model << "\n";
      return kBadInput;
    }
    emit(a.out, kvsched::instance_to_json(inst));
  } catch (const kvsched::ConfigError& e) {
    std::cerr << a.config << ": " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "gen: " << e.what() << "\n";
    return kBadInput;
  }
  return 0;
}

int cmd_validate(const std::string& instance_path, const std::string& schedule_path) {
  kvsched::Instance inst;
  kvsched::Schedule sched;
  try {
    inst = kvsched::instance_from_json(kvsched::read_file(instance_path));
    sched = kvsched::schedule_from_json(kvsched::read_file(schedule_path));
  } catch (const std::exception& e) {
    std::cerr << "validate: " << e.what() << "\n";
    return kBadInput;
  }
  if (sched.start.size() != inst.size()) {
    std::cerr << "validate: schedule has " << sched.start.size()
              << " entries for " << inst.size() << " requests\n";
    return kBadInput;
  }
  if (const auto v = kvsched::validate_schedule(sched, inst)) {
    std::cout << "violation: " << v->describe() << "\n";
    return 1;
  }
  std::cout << "ok: tel " << kvsched::tel(sched, inst) << "\n";
  return 0;
}

int cmd_solve(const std::string& instance_path, int64_t node_budget,
              double time_budget, bool with_lp, const std::string& out) {
  kvsched::Instance inst;
  try {
    inst = kvsched::instance_from_json(kvsched::read_file(instance_path));
  } catch (const std::exception& e) {
    std::cerr << "solve: " << e.what() << "\n";
    return kBadInput;
  }
  kvsched::SolveOptions opts{time_budget, node_budget};
  const kvsched::SolveResult r = kvsched::solve_ip(inst, opts);
  nlohmann::ordered_json j{
      {"optimal", r.bound.optimal},
      {"upper", r.bound.upper},
      {"lower", r.bound.lower.str()},
      {"nodes_explored", r.bound.nodes_explored},
      {"node_limit_hit", r.bound.node_limit_hit},
      {"wall_limit_hit", r.bound.wall_limit_hit},
  };
  if (with_lp) j["lp_relaxation"] = kvsched::lp_relaxation(inst).str();
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) kvsched::write_file(out, kvsched::schedule_to_json(r.schedule));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"KV-cache constrained batch scheduling: simulate, generate, solve"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("--config", run_args.config, "TOML experiment file")->required();
  run->add_option("--seed", run_args.seed, "override the base seed");
  run->add_option("--jobs", run_args.jobs, "worker threads (default: cores)");
  run->add_option("--out", run_args.out, "output directory");
  run->add_option("--trial", run_args.trials, "run only these trial indices");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate an instance as JSON");
  gen->add_option("--seed", gen_args.seed, "generator seed")->required();
  gen->add_option("--config", gen_args.config, "take the generator from a config");
  gen->add_option("--trial", gen_args.trial, "trial index with --config");
  gen->add_option("--model", gen_args.model, "all_at_once | poisson | adversarial");
  gen->add_option("--memory", gen_args.memory, "M range: lo [hi]")->expected(1, 2);
  gen->add_option("--prompt", gen_args.prompt, "s range")->expected(1, 2);
  gen->add_option("--output", gen_args.output, "o range")->expected(1, 2);
  gen->add_option("--count", gen_args.count, "n range")->expected(1, 2);
  gen->add_option("--horizon", gen_args.horizon, "T range")->expected(1, 2);
  gen->add_option("--lambda", gen_args.lambda, "rate range")->expected(1, 2);
  gen->add_option("--epsilon", gen_args.epsilon, "prediction noise");
  gen->add_option("--noise", gen_args.noise, "two_sided | overestimate");
  gen->add_option("--b", gen_args.b, "adversarial: start round of the long request");
  gen->add_option("--out", gen_args.out, "file (default stdout)");

  std::string instance_path, schedule_path, solve_out;
  auto* validate = app.add_subcommand("validate", "check a schedule");
  validate->add_option("--instance", instance_path)->required();
  validate->add_option("--schedule", schedule_path)->required();

  int64_t node_budget = 2'000'000;
  double time_budget = 60.0;
  auto* solve = app.add_subcommand("solve", "hindsight optimum of an instance");
  solve->add_option("--instance", instance_path)->required();
  solve->add_option("--node-budget", node_budget);
  solve->add_option("--time-budget", time_budget, "seconds, <= 0 disables");
  solve->add_option("--out", solve_out, "write the best schedule here");
  bool with_lp = false;
  solve->add_flag("--lp", with_lp, "also report the LP relaxation (slow)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*gen) return cmd_gen(gen_args);
    if (*validate) return cmd_validate(instance_path, schedule_path);
    if (*solve) return cmd_solve(instance_path, node_budget, time_budget, with_lp, solve_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
