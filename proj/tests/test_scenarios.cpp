#include <indistack/scenarios.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace indistack;
using indistack::testing::QuadraticValue;
using indistack::testing::vec;

TEST(ScenarioConstants, PointAvoidInsideCostIs60AndGoalGain5)
{
  const auto s = builtin("s51");
  EXPECT_EQ(s.num_robots, 1);
  const auto& avoid = s.task("avoid");
  EXPECT_EQ(avoid.cost.kind, CostKind::avoid_regions);
  EXPECT_DOUBLE_EQ(avoid.cost.gain, 60.0);
  const auto& go = s.task("goto");
  EXPECT_EQ(go.cost.kind, CostKind::go_to_point);
  EXPECT_DOUBLE_EQ(go.cost.gain, 5.0);
  EXPECT_DOUBLE_EQ(go.cost.target(0), -2.0);
  EXPECT_DOUBLE_EQ(go.cost.target(1), 0.0);
  EXPECT_DOUBLE_EQ(s.lambdas.at("goto").at("avoid"), 1e4);
  EXPECT_EQ(s.stack, (std::vector<std::string>{"avoid", "goto"}));
  EXPECT_EQ(s.trials, 10);
}

TEST(ScenarioConstants, FormationAvoidUses35SideThreeQuartersGainOneAndAHalf)
{
  const auto s = builtin("s52");
  EXPECT_EQ(s.num_robots, 3);
  ASSERT_EQ(s.regions.size(), 1u);
  EXPECT_DOUBLE_EQ(s.regions[0].xmax - s.regions[0].xmin, 1.0);
  EXPECT_DOUBLE_EQ(s.regions[0].ymax - s.regions[0].ymin, 1.0);
  const auto& avoid = s.task("avoid");
  EXPECT_DOUBLE_EQ(avoid.cost.gain, 35.0);
  EXPECT_TRUE(avoid.single_robot);
  const auto& form = s.task("formation");
  EXPECT_EQ(form.cost.kind, CostKind::formation);
  EXPECT_DOUBLE_EQ(form.cost.side, 0.75);
  EXPECT_DOUBLE_EQ(form.cost.gain, 1.5);
  EXPECT_DOUBLE_EQ(s.lambdas.at("formation").at("avoid"), 5e4);
  EXPECT_DOUBLE_EQ(s.success.at("formation"), 0.4);
  EXPECT_EQ(s.trials, 50);
  EXPECT_EQ(s.train_seeds.size(), 2u);
  EXPECT_EQ(s.sampler.kind, SamplerKind::box);
  EXPECT_DOUBLE_EQ(s.sampler.area.hi(0) - s.sampler.area.lo(0), 2.0);
  EXPECT_DOUBLE_EQ(s.sampler.area.hi(1) - s.sampler.area.lo(1), 2.0);
}

TEST(ScenarioConstants, TransportUses25Gain12AndThresholds075And18)
{
  const auto s = builtin("s53");
  EXPECT_EQ(s.num_robots, 3);
  EXPECT_EQ(s.regions.size(), 3u);
  EXPECT_DOUBLE_EQ(s.task("avoid").cost.gain, 25.0);
  const auto& go = s.task("goto");
  EXPECT_DOUBLE_EQ(go.cost.gain, 12.0);
  EXPECT_DOUBLE_EQ(go.cost.target.norm(), 0.0);
  EXPECT_DOUBLE_EQ(s.task("formation").cost.side, 0.75);
  EXPECT_DOUBLE_EQ(s.task("formation").cost.gain, 1.5);
  EXPECT_DOUBLE_EQ(s.lambdas.at("formation").at("avoid"), 5e4);
  EXPECT_DOUBLE_EQ(s.lambdas.at("goto").at("avoid"), 1.0);
  EXPECT_DOUBLE_EQ(s.success.at("formation"), 0.75);
  EXPECT_DOUBLE_EQ(s.success.at("goto"), 1.8);
  EXPECT_EQ(s.stack, (std::vector<std::string>{"avoid", "goto", "formation"}));
  EXPECT_EQ(s.trials, 50);
  EXPECT_EQ(s.sampler.kind, SamplerKind::cluster);
}

TEST(ScenarioConstants, EpisodesLast2000Steps)
{
  for (const char* name : {"s51", "s52", "s53"}) {
    const auto s = builtin(name);
    EXPECT_DOUBLE_EQ(s.dt, 0.01) << name;
    EXPECT_EQ(s.steps(), 2000) << name;
  }
}

TEST(Scenarios, UnknownNameIsAConfigError)
{
  EXPECT_THROW(builtin("s54"), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Scenarios, SamplingIsDeterministicAndPrefixStable)
{
  const auto s = builtin("s52");
  const auto a = sample_initial_states(s, 20, 4);
  const auto b = sample_initial_states(s, 20, 4);
  const auto c = sample_initial_states(s, 5, 4);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(a[i], c[i]);
  EXPECT_NE(a[0], sample_initial_states(s, 1, 5)[0]);
  for (const auto& x : a) {
    ASSERT_EQ(x.size(), 6);
    EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Scenarios, ZeroCountIsAnError)
{
  EXPECT_THROW(sample_initial_states(builtin("s53"), 0, 1), ConfigError);
}

TEST(Scenarios, ClusterCentresAvoidRegions)
{
  // The cluster centre is the mean of the robots minus the noise; rebuild it
  // from a zero-noise copy of the sampler.
  auto s = builtin("s53");
  s.sampler.stddev = 0.0;
  for (const auto& x : sample_initial_states(s, 500, 9)) {
    EXPECT_EQ(x(0), x(2));
    EXPECT_EQ(x(1), x(5));
    for (const auto& r : s.regions) EXPECT_FALSE(r.contains(x(0), x(1)));
  }
}

TEST(Scenarios, FullyCoveredAreaFailsSampling)
{
  auto s = builtin("s53");
  s.regions = {Rect{-3, -3, 3, 3}};
  EXPECT_THROW(sample_initial_states(s, 1, 1), ConfigError);
}

TEST(Scenarios, JsonRoundTrip)
{
  for (const char* name : {"s51", "s52", "s53"}) {
    const auto s = builtin(name);
    const nlohmann::json j = scenario_to_json(s);
    const auto back = scenario_from_json(j);
    EXPECT_EQ(scenario_to_json(back).dump(), j.dump()) << name;
  }
}

TEST(Scenarios, LoadsScenarioFiles)
{
  const auto path = std::filesystem::temp_directory_path() / "indistack_scenario_test.json";
  {
    std::ofstream out(path);
    out << scenario_to_json(builtin("s52")).dump(2);
  }
  const auto s = load_scenario(path.string());
  EXPECT_EQ(s.name, "s52");
  EXPECT_DOUBLE_EQ(s.task("avoid").cost.gain, 35.0);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_scenario(path.string()), ConfigError);
  std::filesystem::remove(path);
}

TEST(Scenarios, InvalidConfigsAreRejected)
{
  auto s = builtin("s51");
  s.trials = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = builtin("s51");
  s.stack.push_back("missing");
  EXPECT_THROW(s.validate(), ConfigError);
  s = builtin("s51");
  s.success["goto"] = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = builtin("s52");
  s.tasks[1].train.region = Box::cube(2, -1, 1);
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Scenarios, UnreachableGoalGivesZeroSuccess)
{
  // The goal sits inside the forbidden region, so reaching it violates
  // avoidance.
  auto s = builtin("s51");
  s.duration = 2.0;
  for (auto& t : s.tasks) {
    if (t.name == "goto") t.cost.target = vec({0.0, 0.0});
  }
  PriorityStack stack;
  StackTask go;
  go.value = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), Vector::Zero(2));
  go.spec.name = "goto";
  stack.tasks.push_back(go);
  const EvalResult r = evaluate(s, stack, 4, 1, "greedy", 1);
  EXPECT_EQ(r.success_rate, 0.0);
  ASSERT_EQ(r.trials.size(), 4u);
  for (const auto& t : r.trials) {
    EXPECT_FALSE(t.success);
    EXPECT_NE(t.reason.find("entered a region"), std::string::npos) << t.reason;
  }
}

TEST(Scenarios, ReachableGoalSucceedsAndEvaluationIsDeterministic)
{
  auto s = builtin("s51");
  s.duration = 5.0;
  PriorityStack stack;
  StackTask go;
  // Straight-line attraction to the goal from starts on the same side.
  go.value = std::make_shared<QuadraticValue>(Matrix::Identity(2, 2), vec({4.0, 0.0}), 4.0);
  go.spec.name = "goto";
  stack.tasks.push_back(go);
  s.stack = {"goto"};
  s.sampler.area = Box{vec({-2.5, -0.3}), vec({-1.5, 0.3})};
  const EvalResult a = evaluate(s, stack, 5, 3, "quad", 1);
  const EvalResult b = evaluate(s, stack, 5, 3, "quad", 2);
  EXPECT_EQ(a.success_rate, 1.0);
  for (std::size_t i = 0; i < a.trials.size(); ++i) EXPECT_EQ(a.trials[i].final_q, b.trials[i].final_q);
}
