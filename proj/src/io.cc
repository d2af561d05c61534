#include "kvsched/io.h"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace kvsched {

namespace {
constexpr int kSchemaVersion = 1;

void check_schema(const nlohmann::json& j, const char* name) {
  if (j.value("schema", std::string(name)) != name) {
    throw std::runtime_error(std::string("expected schema ") + name);
  }
  if (j.value("schema_version", kSchemaVersion) != kSchemaVersion) {
    throw std::runtime_error("unsupported schema_version");
  }
}
}  // namespace

std::string instance_to_json(const Instance& instance) {
  nlohmann::ordered_json j;
  j["schema"] = "kvsched.instance";
  j["schema_version"] = kSchemaVersion;
  j["memory_limit"] = instance.memory_limit();
  auto& reqs = j["requests"] = nlohmann::ordered_json::array();
  for (const Request& r : instance.requests()) {
    reqs.push_back({{"id", r.id},
                    {"arrival", r.arrival},
                    {"prompt", r.prompt},
                    {"output", r.output},
                    {"predicted", r.predicted}});
  }
  return j.dump(1);
}

Instance instance_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    check_schema(j, "kvsched.instance");
    std::vector<Request> reqs;
    for (const auto& r : j.at("requests")) {
      Request q;
      q.id = r.at("id").get<int>();
      q.arrival = r.at("arrival").get<int64_t>();
      q.prompt = r.at("prompt").get<int64_t>();
      q.output = r.at("output").get<int64_t>();
      q.predicted = r.value("predicted", q.output);
      reqs.push_back(q);
    }
    return Instance(j.at("memory_limit").get<int64_t>(), std::move(reqs));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("instance json: ") + e.what());
  }
}

std::string schedule_to_json(const Schedule& schedule) {
  nlohmann::ordered_json j;
  j["schema"] = "kvsched.schedule";
  j["schema_version"] = kSchemaVersion;
  j["start"] = schedule.start;
  return j.dump();
}

Schedule schedule_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    check_schema(j, "kvsched.schedule");
    Schedule s;
    s.start = j.at("start").get<std::vector<int64_t>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("schedule json: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace kvsched
