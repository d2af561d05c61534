#include "kvsched/io.h"

#include <gtest/gtest.h>

#include "kvsched/workloads.h"

namespace kvsched {
namespace {

TEST(InstanceJsonTest, RoundTrip) {
  GenSpec g;
  g.model = GenModel::kPoisson;
  g.seed = 12;
  g.epsilon = 0.3;
  const Instance inst = gen_poisson(g);
  const Instance back = instance_from_json(instance_to_json(inst));
  EXPECT_EQ(back.memory_limit(), inst.memory_limit());
  EXPECT_EQ(back.requests(), inst.requests());
}

TEST(InstanceJsonTest, PredictionDefaultsToOutput) {
  const Instance inst = instance_from_json(
      R"({"schema":"kvsched.instance","schema_version":1,"memory_limit":9,
          "requests":[{"id":0,"arrival":2,"prompt":3,"output":4}]})");
  EXPECT_EQ(inst.by_id(0).predicted, 4);
}

TEST(InstanceJsonTest, RejectsOtherSchemasAndBadFields) {
  EXPECT_THROW(instance_from_json(R"({"schema":"kvsched.schedule","start":[]})"),
               std::runtime_error);
  EXPECT_THROW(instance_from_json(R"({"schema":"kvsched.instance","schema_version":2,
                                      "memory_limit":9,"requests":[]})"),
               std::runtime_error);
  EXPECT_THROW(instance_from_json(R"({"memory_limit":9,"requests":[{"id":0}]})"),
               std::runtime_error);
  EXPECT_THROW(instance_from_json(R"({"memory_limit":2,"requests":[
                   {"id":0,"arrival":0,"prompt":2,"output":1}]})"),
               std::invalid_argument);
}

TEST(ScheduleJsonTest, RoundTrip) {
  Schedule s;
  s.start = {0, 4, 2};
  EXPECT_EQ(schedule_from_json(schedule_to_json(s)).start, s.start);
}

}  // namespace
}  // namespace kvsched
