#pragma once

/// @file
/// @brief Multi-robot experiment definitions: geometry, costs, training
/// settings, initial-state samplers, closed-loop evaluation and the JSON
/// scenario format.

#include "common.hpp"
#include "dynamics.hpp"
#include "model_io.hpp"
#include "parallel.hpp"
#include "stack_controller.hpp"
#include "tasks.hpp"
#include "trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace indistack {

struct TaskDef
{
  std::string name;
  /// Cost over the state the task is trained on (one robot when
  /// single_robot, the whole team otherwise).
  StateCost cost;
  /// Trained on one robot's state and lifted to `robots` afterwards.
  bool single_robot = false;
  /// Robots (0-based) the task applies to; empty means all robots.
  std::vector<int> robots;
  TrainConfig train;
};

enum class SamplerKind
{
  box,
  cluster,
};

struct SamplerSpec
{
  SamplerKind kind = SamplerKind::box;
  /// Per-robot planar box: every robot is drawn independently from it
  /// (box) or the cluster center is drawn from it (cluster).
  Box area = Box::cube(2, -1.0, 1.0);
  double stddev = 0.25;
};

struct ScenarioConfig
{
  std::string name;
  int num_robots = 1;
  double dt = 0.01;
  double duration = 20.0;
  std::vector<Rect> regions;
  std::vector<TaskDef> tasks;
  /// Penalty weights of the independence-trained variants:
  /// lambdas[task][prior task] = lambda.
  std::map<std::string, std::map<std::string, double>> lambdas;
  /// Priority order, highest first.
  std::vector<std::string> stack;
  /// Success thresholds q_task(x_final) < value for non-avoidance tasks.
  std::map<std::string, double> success;
  SamplerSpec sampler;
  int trials = 50;
  std::vector<std::uint64_t> train_seeds = {1};
  std::uint64_t eval_seed = 1;
  double kappa = 1e3;
  /// Named controller variants: method -> (task -> model file stem).
  std::map<std::string, std::map<std::string, std::string>> methods;

  const TaskDef& task(const std::string& task_name) const
  {
    for (const auto& t : tasks) {
      if (t.name == task_name) return t;
    }
    throw ConfigError("scenario '" + name + "': unknown task '" + task_name + "'");
  }

  bool has_task(const std::string& task_name) const
  {
    for (const auto& t : tasks) {
      if (t.name == task_name) return true;
    }
    return false;
  }

  ControlAffineSystem team() const { return ControlAffineSystem::single_integrator_team(num_robots); }

  /// System a task is trained on.
  ControlAffineSystem training_system(const TaskDef& def) const
  {
    return ControlAffineSystem::single_integrator_team(def.single_robot ? 1 : num_robots);
  }

  /// Robots a task applies to in the team.
  std::vector<int> task_robots(const TaskDef& def) const
  {
    if (!def.robots.empty()) return def.robots;
    std::vector<int> all(static_cast<std::size_t>(num_robots));
    for (int i = 0; i < num_robots; ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }

  /// The task's state cost evaluated on the team state.
  StateCost team_cost(const TaskDef& def) const
  {
    StateCost c = def.cost;
    c.robots = task_robots(def);
    return c;
  }

  void validate() const
  {
    if (num_robots < 1) throw ConfigError("scenario: num_robots must be positive");
    if (!(dt > 0.0) || !(duration > 0.0)) throw ConfigError("scenario: dt and duration must be positive");
    if (trials < 1) throw ConfigError("scenario: trials must be at least 1");
    if (!(kappa > 0.0)) throw ConfigError("scenario: kappa must be positive");
    for (const auto& r : regions) {
      if (!r.valid()) throw ConfigError("scenario: degenerate region");
    }
    for (const auto& t : tasks) {
      t.train.validate();
      const auto expected = (t.single_robot ? 1 : num_robots) * 2;
      if (t.train.region.dim() != expected) {
        throw ConfigError("scenario: training box of task '" + t.name + "' must have dimension " +
                          std::to_string(expected));
      }
      for (int r : t.robots) {
        if (r < 0 || r >= num_robots) throw ConfigError("scenario: task '" + t.name + "' robot out of range");
      }
    }
    for (const auto& s : stack) task(s);
    for (const auto& [t, thr] : success) {
      task(t);
      if (!(thr > 0.0)) throw ConfigError("scenario: success thresholds must be positive");
    }
    for (const auto& [t, priors] : lambdas) {
      task(t);
      for (const auto& [p, l] : priors) {
        task(p);
        if (!(l > 0.0)) throw ConfigError("scenario: penalty weights must be positive");
      }
    }
    sampler.area.validate();
    if (sampler.area.dim() != 2) throw ConfigError("scenario: sampler area must be planar");
    if (!(sampler.stddev >= 0.0)) throw ConfigError("scenario: sampler stddev must be nonnegative");
  }

  int steps() const { return static_cast<int>(std::lround(duration / dt)); }
};

namespace detail {

inline TrainConfig desk_training(int state_dim, double half_width, int iterations, std::vector<int> hidden)
{
  TrainConfig c;
  c.region = Box::cube(state_dim, -half_width, half_width);
  c.iterations = iterations;
  c.hidden = std::move(hidden);
  return c;
}

/// Formation training: 50-step rollouts with lambda = 1 returns, half of
/// each dataset drawn as robot clusters so the net sees near-formation
/// states, and a penalty deadzone so avoid-net ripples away from the
/// regions do not freeze the team.
inline TrainConfig formation_training(double half_width)
{
  TrainConfig c = desk_training(6, half_width, 300, {64, 64});
  c.horizon = 50;
  c.td_lambda = 1.0;
  c.epochs = 20;
  c.cluster_fraction = 0.5;
  c.cluster_stddev = 0.4;
  c.penalty_deadzone = 0.5;
  return c;
}

} // namespace detail

/// The three built-in experiments. Region placement for s51 and s53 is not
/// pinned down by the original experiment descriptions; the squares below
/// are fixed assumptions.
inline ScenarioConfig builtin(const std::string& name)
{
  ScenarioConfig s;
  s.name = name;
  if (name == "s51") {
    s.num_robots = 1;
    s.regions = {Rect::centered(0.0, 0.0, 1.0)};
    TaskDef avoid{"avoid", StateCost::avoid(s.regions, 60.0), false, {}, detail::desk_training(2, 3.0, 150, {64, 64})};
    Vector goal(2);
    goal << -2.0, 0.0;
    TaskDef go{"goto", StateCost::go_to(goal, 5.0), false, {}, detail::desk_training(2, 3.0, 300, {64, 64})};
    // Rollouts must not leave the box near the goal.
    go.train.region = Box{(Vector(2) << -5.0, -3.0).finished(), (Vector(2) << 3.5, 3.0).finished()};
    go.train.gamma = 0.999;
    go.train.horizon = 50;
    go.train.td_lambda = 1.0;
    go.train.epochs = 20;
    go.train.penalty_deadzone = 0.5;
    s.tasks = {avoid, go};
    s.lambdas["goto"]["avoid"] = 1e4;
    s.stack = {"avoid", "goto"};
    // Within 0.2 of the goal: 5 * distance < 1.
    s.success["goto"] = 1.0;
    s.sampler.kind = SamplerKind::box;
    s.sampler.area = Box{(Vector(2) << 1.5, -0.3).finished(), (Vector(2) << 2.5, 0.3).finished()};
    s.trials = 10;
    s.train_seeds = {1};
    s.methods["base"] = {{"goto", "goto_base"}};
    s.methods["ind"] = {{"goto", "goto_ind"}};
  } else if (name == "s52") {
    s.num_robots = 3;
    s.regions = {Rect::centered(0.0, 0.0, 1.0)};
    TaskDef avoid{"avoid", StateCost::avoid(s.regions, 35.0), true, {}, detail::desk_training(2, 2.5, 150, {64, 64})};
    TaskDef form{"formation", StateCost::formation_shape(0.75, 1.5), false, {}, detail::formation_training(1.5)};
    s.tasks = {avoid, form};
    s.lambdas["formation"]["avoid"] = 5e4;
    s.stack = {"avoid", "formation"};
    s.success["formation"] = 0.4;
    s.sampler.kind = SamplerKind::box;
    s.sampler.area = Box::cube(2, -1.0, 1.0);
    s.trials = 50;
    s.train_seeds = {1, 2};
    s.methods["cfvi"] = {{"formation", "formation_base"}};
    s.methods["ours"] = {{"formation", "formation_ind"}};
  } else if (name == "s53") {
    s.num_robots = 3;
    s.regions = {Rect::centered(-1.0, 1.0, 0.6), Rect::centered(1.0, 0.6, 0.6), Rect::centered(0.2, -1.1, 0.6)};
    TaskDef avoid{"avoid", StateCost::avoid(s.regions, 25.0), true, {}, detail::desk_training(2, 2.5, 150, {64, 64})};
    TaskDef form{"formation", StateCost::formation_shape(0.75, 1.5), false, {}, detail::formation_training(2.0)};
    TaskDef go{"goto", StateCost::go_to(Vector::Zero(2), 12.0), true, {0}, detail::desk_training(2, 2.5, 150, {64, 64})};
    s.tasks = {avoid, go, form};
    s.lambdas["formation"]["avoid"] = 5e4;
    s.lambdas["goto"]["avoid"] = 1.0;
    s.stack = {"avoid", "goto", "formation"};
    s.success["formation"] = 0.75;
    s.success["goto"] = 1.8;
    s.sampler.kind = SamplerKind::cluster;
    s.sampler.area = Box::cube(2, -2.0, 2.0);
    s.sampler.stddev = 0.25;
    s.trials = 50;
    s.train_seeds = {1, 2, 3};
    s.methods["cfvi_cfvi"] = {{"formation", "formation_base"}, {"goto", "goto_base"}};
    s.methods["cfvi_ours"] = {{"formation", "formation_base"}, {"goto", "goto_ind"}};
    s.methods["ours_cfvi"] = {{"formation", "formation_ind"}, {"goto", "goto_base"}};
    s.methods["ours_ours"] = {{"formation", "formation_ind"}, {"goto", "goto_ind"}};
  } else {
    throw ConfigError("unknown built-in scenario '" + name + "' (expected s51, s52 or s53)");
  }
  for (auto& t : s.tasks) {
    t.cost.robot_dim = 2;
    t.train.dt = s.dt;
    t.train.bootstrap_floor = 0.0;
    if (t.cost.kind != CostKind::formation) t.train.final_learning_rate = 1e-5;
  }
  s.validate();
  return s;
}

/// `count` initial team states. State i is drawn from a generator seeded
/// with derive_seed(seed, initial_states, i), so every list is a prefix of
/// any longer list with the same seed.
inline std::vector<Vector> sample_initial_states(const ScenarioConfig& cfg, int count, std::uint64_t seed)
{
  if (count < 1) throw ConfigError("sample_initial_states: count must be at least 1");
  const Box& area = cfg.sampler.area;
  std::vector<Vector> states;
  states.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, seed_stream::initial_states, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> ux(area.lo(0), area.hi(0));
    std::uniform_real_distribution<double> uy(area.lo(1), area.hi(1));
    Vector x(2 * cfg.num_robots);
    if (cfg.sampler.kind == SamplerKind::box) {
      for (int r = 0; r < cfg.num_robots; ++r) {
        x(2 * r) = ux(rng);
        x(2 * r + 1) = uy(rng);
      }
    } else {
      double cx = 0.0;
      double cy = 0.0;
      int attempts = 0;
      for (;;) {
        if (++attempts > 100000) throw ConfigError("sample_initial_states: regions cover the sampling area");
        cx = ux(rng);
        cy = uy(rng);
        bool inside = false;
        for (const auto& r : cfg.regions) inside = inside || r.contains(cx, cy);
        if (!inside) break;
      }
      std::normal_distribution<double> noise(0.0, cfg.sampler.stddev);
      for (int r = 0; r < cfg.num_robots; ++r) {
        x(2 * r) = cx + noise(rng);
        x(2 * r + 1) = cy + noise(rng);
      }
    }
    states.push_back(std::move(x));
  }
  return states;
}

/// A trained model together with the description stored in its metadata.
struct LoadedModel
{
  std::shared_ptr<const ValueNet> net;
  nlohmann::json metadata;
  std::string path;
};

/// Priors recorded in a model's metadata: (task, lambda, model path).
struct PriorRef
{
  std::string task;
  double lambda = 0.0;
  std::string model;
};

inline std::vector<PriorRef> model_priors(const nlohmann::json& metadata)
{
  std::vector<PriorRef> out;
  if (!metadata.contains("independent_to")) return out;
  for (const auto& p : metadata.at("independent_to")) {
    out.push_back({p.at("task").get<std::string>(), p.at("lambda").get<double>(), p.at("model").get<std::string>()});
  }
  return out;
}

inline LoadedModel load_model_entry(const std::string& path)
{
  ModelFile f = load_model(path);
  return {std::make_shared<const ValueNet>(std::move(f.net)), std::move(f.metadata), path};
}

/// Resolves a path stored in a model's metadata relative to that model.
inline std::string resolve_relative(const std::string& stored, const std::string& owner_path)
{
  namespace fs = std::filesystem;
  const fs::path p(stored);
  if (p.is_absolute()) return stored;
  const fs::path beside = fs::path(owner_path).parent_path() / p.filename();
  if (fs::exists(beside)) return beside.string();
  return stored;
}

/// Lifts a trained network of task `def` to the team state.
inline std::shared_ptr<const ValueFunction> team_value(const ScenarioConfig& cfg, const TaskDef& def,
                                                       std::shared_ptr<const ValueNet> net)
{
  const auto team = cfg.team();
  if (def.single_robot) {
    if (net->input_dim() != team.robot_dim()) {
      throw ShapeError("model for task '" + def.name + "' has input dimension " + std::to_string(net->input_dim()) +
                       ", expected " + std::to_string(team.robot_dim()));
    }
    return lift_task(std::move(net), cfg.task_robots(def), team);
  }
  if (net->input_dim() != team.state_dim()) {
    throw ShapeError("model for task '" + def.name + "' has input dimension " + std::to_string(net->input_dim()) +
                     ", expected " + std::to_string(team.state_dim()));
  }
  return net;
}

/// Input metric of task `def` expressed on the team state, rebuilt from the
/// priors a model was trained against. Single-robot tasks get one penalty per
/// assigned robot (a block-diagonal metric); team tasks get one penalty per
/// prior with the prior lifted to its own robots.
inline InputMetric team_metric(const ScenarioConfig& cfg, const TaskDef& def, const LoadedModel& model)
{
  InputMetric metric;
  const double clamp = model.metadata.value("penalty_clamp", def.train.penalty_clamp);
  const double deadzone = model.metadata.value("penalty_deadzone", def.train.penalty_deadzone);
  const auto team = cfg.team();
  for (const auto& prior : model_priors(model.metadata)) {
    const TaskDef& pdef = cfg.task(prior.task);
    const auto pmodel = load_model_entry(resolve_relative(prior.model, model.path));
    if (def.single_robot) {
      if (!pdef.single_robot) throw ConfigError("a single-robot task cannot be trained against a team task");
      for (int r : cfg.task_robots(def)) {
        metric.penalties.push_back({lift_task(pmodel.net, {r}, team), prior.lambda, clamp, deadzone});
      }
    } else {
      metric.penalties.push_back({team_value(cfg, pdef, pmodel.net), prior.lambda, clamp, deadzone});
    }
  }
  return metric;
}

/// Builds a priority stack from model files. `model_for` maps each stack
/// task to a model path.
inline PriorityStack load_stack(const ScenarioConfig& cfg, const std::vector<std::string>& order,
                                const std::map<std::string, std::string>& model_for)
{
  PriorityStack stack;
  stack.kappa = cfg.kappa;
  for (const auto& name : order) {
    const TaskDef& def = cfg.task(name);
    const auto it = model_for.find(name);
    if (it == model_for.end()) throw ConfigError("no model given for stack task '" + name + "'");
    const LoadedModel model = load_model_entry(it->second);
    TaskSpec spec;
    spec.name = name;
    spec.state_cost = cfg.team_cost(def);
    spec.input_metric = team_metric(cfg, def, model);
    spec.assigned_robots = cfg.task_robots(def);
    stack.tasks.push_back({team_value(cfg, def, model.net), std::move(spec)});
  }
  return stack;
}

/// Training settings of a task with the scenario's step size and `seed`.
inline TrainConfig training_config(const ScenarioConfig& cfg, const std::string& task, std::uint64_t seed)
{
  TrainConfig c = cfg.task(task).train;
  c.dt = cfg.dt;
  c.seed = seed;
  return c;
}

struct PriorModel
{
  LoadedModel model;
  double lambda = 0.0;
};

struct TrainedModel
{
  ValueNet net;
  nlohmann::json metadata;
};

/// Trains `task` on its own state space, penalized against `priors` (empty
/// for the baseline). Priors of a single-robot task must be single-robot
/// models; priors of a team task are lifted to the team.
inline TrainedModel train_task(const ScenarioConfig& cfg, const std::string& task, const TrainConfig& train,
                               const std::vector<PriorModel>& priors, const MetricsCallback& on_iteration = {})
{
  const TaskDef& def = cfg.task(task);
  const auto sys = cfg.training_system(def);
  TaskSpec spec;
  spec.name = task;
  spec.state_cost = def.cost;
  std::vector<PriorTask> prior_tasks;
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& p : priors) {
    const std::string ptask = p.model.metadata.value("task", std::string());
    if (ptask.empty()) throw ConfigError("prior model '" + p.model.path + "' does not record its task");
    const TaskDef& pdef = cfg.task(ptask);
    std::shared_ptr<const ValueFunction> value;
    if (def.single_robot) {
      if (!pdef.single_robot) throw ConfigError("a single-robot task cannot be trained against a team task");
      value = p.model.net;
    } else {
      value = team_value(cfg, pdef, p.model.net);
    }
    if (value->input_dim() != sys.state_dim()) {
      throw ShapeError("prior model '" + p.model.path + "' does not match the state of task '" + task + "'");
    }
    prior_tasks.push_back({value, p.lambda});
    refs.push_back({{"task", ptask}, {"lambda", p.lambda}, {"model", p.model.path}});
  }
  TrainedModel out{train_independent(spec, prior_tasks, sys, train, on_iteration), nlohmann::json::object()};
  out.metadata = {{"scenario", cfg.name},
                  {"task", task},
                  {"single_robot", def.single_robot},
                  {"seed", train.seed},
                  {"iterations", train.iterations},
                  {"penalty_clamp", train.penalty_clamp},
                  {"penalty_deadzone", train.penalty_deadzone}};
  if (!refs.empty()) out.metadata["independent_to"] = refs;
  return out;
}

struct TrajectoryRow
{
  double t = 0.0;
  Vector x;
  Vector u;
  Vector delta;
  Vector values;
  QPStatus status = QPStatus::optimal;
};

/// Closed-loop rollout of the stack controller; rows hold the state at each
/// time and the input applied from it. The final row carries the terminal
/// state with zero input.
inline std::vector<TrajectoryRow> simulate(const PriorityStack& stack, const ControlAffineSystem& sys, Vector x,
                                           double dt, int steps)
{
  std::vector<TrajectoryRow> rows;
  rows.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k < steps; ++k) {
    ControlStep step = control_step(stack, sys, x, dt);
    rows.push_back({k * dt, x, step.u, step.solution.delta, step.values, step.solution.status});
    x = std::move(step.next_state);
  }
  const StackQP last = build_qp(stack, sys, x);
  rows.push_back({steps * dt, x, Vector::Zero(sys.input_dim()), Vector::Zero(stack.size()), last.values,
                  QPStatus::optimal});
  return rows;
}

struct TrialRecord
{
  int trial = 0;
  bool success = false;
  std::vector<double> final_q; ///< per stack task, team cost at the final state
  std::string reason;          ///< empty on success
};

struct EvalResult
{
  std::string method;
  double success_rate = 0.0;
  std::vector<TrialRecord> trials;
};

/// Closed-loop success check for one trial. Avoidance tasks must end at
/// zero cost and no robot may enter a region after it has been outside all
/// regions; every other task with a threshold must end below it.
inline TrialRecord run_trial(const ScenarioConfig& cfg, const PriorityStack& stack, const Vector& x0, int trial)
{
  const auto sys = cfg.team();
  TrialRecord rec;
  rec.trial = trial;
  std::vector<const TaskDef*> avoid_tasks;
  for (const auto& name : cfg.stack) {
    const TaskDef& def = cfg.task(name);
    if (def.cost.kind == CostKind::avoid_regions) avoid_tasks.push_back(&def);
  }
  auto inside = [&](const Vector& x, int robot) {
    for (const TaskDef* def : avoid_tasks) {
      const auto robots = cfg.task_robots(*def);
      if (std::find(robots.begin(), robots.end(), robot) == robots.end()) continue;
      for (const auto& r : def->cost.regions) {
        if (r.contains(x(2 * robot), x(2 * robot + 1))) return true;
      }
    }
    return false;
  };
  std::vector<bool> cleared(static_cast<std::size_t>(cfg.num_robots), false);
  Vector x = x0;
  const int steps = cfg.steps();
  for (int k = 0; k <= steps; ++k) {
    for (int r = 0; r < cfg.num_robots; ++r) {
      const bool in = inside(x, r);
      if (!in) cleared[static_cast<std::size_t>(r)] = true;
      if (in && cleared[static_cast<std::size_t>(r)] && rec.reason.empty()) {
        rec.reason = "robot " + std::to_string(r) + " entered a region at t=" + std::to_string(k * cfg.dt);
      }
    }
    if (k == steps) break;
    ControlStep step = control_step(stack, sys, x, cfg.dt);
    if (step.solution.status == QPStatus::infeasible && rec.reason.empty()) {
      rec.reason = "controller QP infeasible at t=" + std::to_string(k * cfg.dt);
    }
    if (!step.next_state.allFinite()) {
      if (rec.reason.empty()) rec.reason = "non-finite state at t=" + std::to_string(k * cfg.dt);
      break;
    }
    x = std::move(step.next_state);
  }
  for (const auto& name : cfg.stack) {
    const TaskDef& def = cfg.task(name);
    const double q = eval_state_cost(cfg.team_cost(def), x);
    rec.final_q.push_back(q);
    if (!rec.reason.empty()) continue;
    if (def.cost.kind == CostKind::avoid_regions) {
      if (q > 0.0) rec.reason = "task '" + name + "' not complete at the final state";
    } else if (const auto it = cfg.success.find(name); it != cfg.success.end() && !(q < it->second)) {
      rec.reason = "task '" + name + "' above its threshold at the final state";
    }
  }
  rec.success = rec.reason.empty();
  return rec;
}

/// Success rate of `stack` over `trials` initial states drawn with `seed`.
inline EvalResult evaluate(const ScenarioConfig& cfg, const PriorityStack& stack, int trials, std::uint64_t seed,
                           const std::string& method = "", int threads = 0)
{
  const auto starts = sample_initial_states(cfg, trials, seed);
  EvalResult result;
  result.method = method;
  result.trials.resize(starts.size());
  parallel_chunks(starts.size(), 1, resolve_threads(threads), [&](std::size_t i, std::size_t, std::size_t) {
    try {
      result.trials[i] = run_trial(cfg, stack, starts[i], static_cast<int>(i));
    } catch (const Error& e) {
      TrialRecord rec;
      rec.trial = static_cast<int>(i);
      rec.reason = std::string("solver failure: ") + e.what();
      result.trials[i] = rec;
    }
  });
  int ok = 0;
  for (const auto& t : result.trials) ok += t.success ? 1 : 0;
  result.success_rate = static_cast<double>(ok) / static_cast<double>(trials);
  return result;
}

// ---------------------------------------------------------------------------
// JSON scenario files

inline nlohmann::json box_to_json(const Box& b)
{
  return {{"lo", std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size())},
          {"hi", std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size())}};
}

inline Vector vector_from_json(const nlohmann::json& j)
{
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Box box_from_json(const nlohmann::json& j)
{
  return Box{vector_from_json(j.at("lo")), vector_from_json(j.at("hi"))};
}

inline nlohmann::json train_to_json(const TrainConfig& c)
{
  nlohmann::json j = {{"dataset_size", c.dataset_size}, {"box", box_to_json(c.region)}, {"iterations", c.iterations},
          {"horizon", c.horizon},           {"td_lambda", c.td_lambda},     {"gamma", c.gamma},
          {"dt", c.dt},                     {"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},             {"hidden", c.hidden},           {"activation", to_string(c.activation)},
          {"penalty_clamp", c.penalty_clamp}, {"penalty_deadzone", c.penalty_deadzone},
          {"cluster_fraction", c.cluster_fraction},
          {"cluster_stddev", c.cluster_stddev}};
  if (c.bootstrap_floor) j["bootstrap_floor"] = *c.bootstrap_floor;
  if (c.final_learning_rate) j["final_learning_rate"] = *c.final_learning_rate;
  return j;
}

inline TrainConfig train_from_json(const nlohmann::json& j, TrainConfig c)
{
  c.dataset_size = j.value("dataset_size", c.dataset_size);
  if (j.contains("box")) c.region = box_from_json(j.at("box"));
  c.iterations = j.value("iterations", c.iterations);
  c.horizon = j.value("horizon", c.horizon);
  c.td_lambda = j.value("td_lambda", c.td_lambda);
  c.gamma = j.value("gamma", c.gamma);
  c.dt = j.value("dt", c.dt);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.hidden = j.value("hidden", c.hidden);
  if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
  c.penalty_clamp = j.value("penalty_clamp", c.penalty_clamp);
  c.penalty_deadzone = j.value("penalty_deadzone", c.penalty_deadzone);
  c.cluster_fraction = j.value("cluster_fraction", c.cluster_fraction);
  c.cluster_stddev = j.value("cluster_stddev", c.cluster_stddev);
  if (j.contains("final_learning_rate")) {
    if (j.at("final_learning_rate").is_null()) {
      c.final_learning_rate.reset();
    } else {
      c.final_learning_rate = j.at("final_learning_rate").get<double>();
    }
  }
  if (j.contains("bootstrap_floor")) {
    if (j.at("bootstrap_floor").is_null()) {
      c.bootstrap_floor.reset();
    } else {
      c.bootstrap_floor = j.at("bootstrap_floor").get<double>();
    }
  }
  return c;
}

inline nlohmann::json rect_to_json(const Rect& r)
{
  return {{"xmin", r.xmin}, {"ymin", r.ymin}, {"xmax", r.xmax}, {"ymax", r.ymax}};
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& s)
{
  nlohmann::json j;
  j["name"] = s.name;
  j["system"] = {{"num_robots", s.num_robots}, {"robot_dim", 2}, {"dt", s.dt}, {"duration", s.duration}};
  j["regions"] = nlohmann::json::array();
  for (const auto& r : s.regions) j["regions"].push_back(rect_to_json(r));
  j["tasks"] = nlohmann::json::object();
  for (const auto& t : s.tasks) {
    nlohmann::json tj;
    tj["kind"] = to_string(t.cost.kind);
    tj["gain"] = t.cost.gain;
    if (t.cost.kind == CostKind::go_to_point) {
      tj["target"] = std::vector<double>(t.cost.target.data(), t.cost.target.data() + t.cost.target.size());
    }
    if (t.cost.kind == CostKind::formation) tj["side"] = t.cost.side;
    tj["single_robot"] = t.single_robot;
    if (!t.robots.empty()) tj["robots"] = t.robots;
    tj["train"] = train_to_json(t.train);
    j["tasks"][t.name] = tj;
  }
  j["lambdas"] = s.lambdas;
  j["stack"] = s.stack;
  j["success"] = s.success;
  j["sampler"] = box_to_json(s.sampler.area);
  j["sampler"]["kind"] = s.sampler.kind == SamplerKind::box ? "box" : "cluster";
  j["sampler"]["stddev"] = s.sampler.stddev;
  j["trials"] = s.trials;
  j["seeds"] = {{"train", s.train_seeds}, {"eval", s.eval_seed}};
  j["kappa"] = s.kappa;
  j["methods"] = s.methods;
  return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j)
{
  try {
    ScenarioConfig s;
    s.name = j.value("name", std::string("custom"));
    const auto& sys = j.at("system");
    s.num_robots = sys.at("num_robots").get<int>();
    if (sys.value("robot_dim", 2) != 2) throw ConfigError("scenario: only planar robots (robot_dim 2) are supported");
    s.dt = sys.value("dt", s.dt);
    s.duration = sys.value("duration", s.duration);
    for (const auto& r : j.value("regions", nlohmann::json::array())) {
      s.regions.push_back({r.at("xmin").get<double>(), r.at("ymin").get<double>(), r.at("xmax").get<double>(),
                           r.at("ymax").get<double>()});
    }
    for (const auto& [name, tj] : j.at("tasks").items()) {
      TaskDef t;
      t.name = name;
      const CostKind kind = parse_cost_kind(tj.at("kind").get<std::string>());
      const double gain = tj.at("gain").get<double>();
      switch (kind) {
        case CostKind::avoid_regions: t.cost = StateCost::avoid(s.regions, gain); break;
        case CostKind::go_to_point: t.cost = StateCost::go_to(vector_from_json(tj.at("target")), gain); break;
        case CostKind::formation: t.cost = StateCost::formation_shape(tj.at("side").get<double>(), gain); break;
        case CostKind::custom: throw ConfigError("scenario: custom costs cannot be defined in a file");
      }
      t.single_robot = tj.value("single_robot", false);
      t.robots = tj.value("robots", std::vector<int>{});
      TrainConfig defaults;
      defaults.dt = s.dt;
      defaults.region = Box::cube((t.single_robot ? 1 : s.num_robots) * 2, -3.0, 3.0);
      t.train = train_from_json(tj.value("train", nlohmann::json::object()), defaults);
      s.tasks.push_back(std::move(t));
    }
    s.lambdas = j.value("lambdas", s.lambdas);
    s.stack = j.at("stack").get<std::vector<std::string>>();
    s.success = j.value("success", s.success);
    if (j.contains("sampler")) {
      const auto& sj = j.at("sampler");
      const auto kind = sj.value("kind", std::string("box"));
      if (kind == "box") {
        s.sampler.kind = SamplerKind::box;
      } else if (kind == "cluster") {
        s.sampler.kind = SamplerKind::cluster;
      } else {
        throw ConfigError("scenario: unknown sampler kind '" + kind + "'");
      }
      s.sampler.area = box_from_json(sj);
      s.sampler.stddev = sj.value("stddev", s.sampler.stddev);
    }
    s.trials = j.value("trials", s.trials);
    if (j.contains("seeds")) {
      s.train_seeds = j.at("seeds").value("train", s.train_seeds);
      s.eval_seed = j.at("seeds").value("eval", s.eval_seed);
    }
    s.kappa = j.value("kappa", s.kappa);
    s.methods = j.value("methods", s.methods);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: malformed JSON structure: ") + e.what());
  }
}

/// A built-in name (s51, s52, s53) or a path to a scenario JSON file.
inline ScenarioConfig load_scenario(const std::string& name_or_path)
{
  if (name_or_path == "s51" || name_or_path == "s52" || name_or_path == "s53") return builtin(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("cannot open scenario file '" + name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario file '" + name_or_path + "': " + e.what());
  }
  return scenario_from_json(j);
}

} // namespace indistack
