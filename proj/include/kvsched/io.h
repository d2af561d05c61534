#pragma once

#include <string>

#include "kvsched/core.h"

namespace kvsched {

// Instance snapshot:
//   {"schema": "kvsched.instance", "schema_version": 1, "memory_limit": M,
//    "requests": [{"id", "arrival", "prompt", "output", "predicted"}, ...]}
// "predicted" defaults to "output" when absent.
std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);

// {"schema": "kvsched.schedule", "schema_version": 1, "start": [p_0, ...]}
std::string schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace kvsched
