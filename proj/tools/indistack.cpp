// Command-line front end: train, simulate, eval, check-independence, heatmap.

#include <indistack/artifacts.hpp>
#include <indistack/independence.hpp>
#include <indistack/scenarios.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace indistack;

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what)
{
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + what + " '" + s + "' as a number");
  }
}

std::string scenario_hash(const ScenarioConfig& cfg) { return hex64(fnv1a64(scenario_to_json(cfg).dump())); }

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

struct Timer
{
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

RunManifest start_manifest(const std::string& command, int argc, char** argv, const ScenarioConfig& cfg)
{
  RunManifest m;
  m.command = command;
  m.arguments.assign(argv + 1, argv + argc);
  m.scenario_hash = scenario_hash(cfg);
  m.tool_version = INDISTACK_VERSION;
  return m;
}

std::string model_path(const std::string& dir, const std::string& stem)
{
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json") return (fs::path(dir) / stem).string();
  return (fs::path(dir) / (stem + ".json")).string();
}

/// Stack entries are task names or task:file pairs; files are relative to
/// the models directory.
std::map<std::string, std::string> stack_files(const ScenarioConfig& cfg, const std::string& dir,
                                               const std::vector<std::string>& entries, const std::string& method,
                                               std::vector<std::string>& order)
{
  std::map<std::string, std::string> stems;
  if (!method.empty()) {
    const auto it = cfg.methods.find(method);
    if (it == cfg.methods.end()) throw ConfigError("scenario '" + cfg.name + "' has no method '" + method + "'");
    stems = it->second;
  }
  std::map<std::string, std::string> files;
  order.clear();
  for (const auto& e : entries) {
    const auto colon = e.find(':');
    const std::string task = e.substr(0, colon);
    cfg.task(task);
    order.push_back(task);
    if (colon != std::string::npos) {
      files[task] = model_path(dir, e.substr(colon + 1));
    } else {
      const auto it = stems.find(task);
      files[task] = model_path(dir, it == stems.end() ? task : it->second);
    }
  }
  return files;
}

void check_models_exist(const std::map<std::string, std::string>& files)
{
  for (const auto& [task, path] : files) {
    if (!fs::exists(path)) throw ConfigError("model file for task '" + task + "' not found: " + path);
  }
}

// ---------------------------------------------------------------------------

struct TrainArgs
{
  std::string scenario;
  std::string task;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string independent_to;
  std::string lambda;
  std::string metrics;
  std::optional<int> iterations;
  bool timing = false;
  int threads = 0;
};

int cmd_train(const TrainArgs& a, int argc, char** argv)
{
  const Timer timer;
  const ScenarioConfig cfg = load_scenario(a.scenario);
  const TaskDef& def = cfg.task(a.task);
  TrainConfig train = training_config(cfg, a.task, a.seed.value_or(cfg.train_seeds.front()));
  if (a.iterations) train.iterations = *a.iterations;
  train.threads = a.threads;

  std::vector<PriorModel> priors;
  const auto prior_files = split(a.independent_to, ',');
  const auto lambdas = split(a.lambda, ',');
  if (!lambdas.empty() && lambdas.size() != 1 && lambdas.size() != prior_files.size()) {
    throw ConfigError("--lambda needs one value or one value per --independent-to model");
  }
  RunManifest manifest = start_manifest("train", argc, argv, cfg);
  for (std::size_t i = 0; i < prior_files.size(); ++i) {
    if (!fs::exists(prior_files[i])) throw ConfigError("prior model not found: " + prior_files[i]);
    LoadedModel m = load_model_entry(prior_files[i]);
    manifest.add_model(prior_files[i]);
    double lambda = 0.0;
    if (!lambdas.empty()) {
      lambda = parse_double(lambdas.size() == 1 ? lambdas[0] : lambdas[i], "--lambda");
    } else {
      const std::string ptask = m.metadata.value("task", std::string());
      const auto t = cfg.lambdas.find(a.task);
      if (t == cfg.lambdas.end() || !t->second.count(ptask)) {
        throw ConfigError("no penalty weight for task '" + a.task + "' against '" + ptask + "'; pass --lambda");
      }
      lambda = t->second.at(ptask);
    }
    if (!(lambda > 0.0)) throw ConfigError("--lambda must be positive");
    priors.push_back({std::move(m), lambda});
  }

  const std::string metrics_path =
    a.metrics.empty() ? (fs::path(a.out).replace_extension("").string() + ".metrics.csv") : a.metrics;
  std::ofstream metrics(metrics_path);
  if (!metrics) throw ConfigError("cannot write metrics file '" + metrics_path + "'");
  metrics << "iteration,mean_target,loss,wall_ms\n";
  const auto on_iteration = [&](const IterationMetrics& m) {
    metrics << m.iteration << ',' << format_number(m.mean_target) << ',' << format_number(m.loss) << ','
            << (a.timing ? format_number(m.wall_ms) : std::string("NA")) << '\n';
    metrics.flush();
  };

  std::cerr << "training " << a.task << " (" << (def.single_robot ? "single robot" : "team") << ", "
            << train.iterations << " iterations, seed " << train.seed << ")\n";
  const TrainedModel model = train_task(cfg, a.task, train, priors, on_iteration);
  save_model(a.out, model.net, model.metadata);

  manifest.seeds = {{"train", train.seed}};
  manifest.outputs = {a.out, metrics_path};
  manifest.add_model(a.out);
  manifest.wall_seconds = timer.seconds();
  manifest.write(manifest_path(a.out));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs
{
  std::string scenario;
  std::string models = ".";
  std::string stack;
  std::string method;
  std::string x0;
  std::string traj;
  std::string svg;
  std::uint64_t seed = 1;
  std::optional<double> duration;
};

int cmd_simulate(const SimulateArgs& a, int argc, char** argv)
{
  const Timer timer;
  const ScenarioConfig cfg = load_scenario(a.scenario);
  std::vector<std::string> order;
  const auto entries = a.stack.empty() ? cfg.stack : split(a.stack, ',');
  const auto files = stack_files(cfg, a.models, entries, a.method, order);
  check_models_exist(files);
  const PriorityStack stack = load_stack(cfg, order, files);
  const auto sys = cfg.team();

  std::vector<Vector> starts;
  if (a.x0.rfind("random:", 0) == 0) {
    const int k = static_cast<int>(parse_double(a.x0.substr(7), "random start count"));
    starts = sample_initial_states(cfg, k, a.seed);
  } else {
    const auto parts = split(a.x0, ',');
    Vector x(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) x(static_cast<Eigen::Index>(i)) = parse_double(parts[i], "--x0");
    if (x.size() != sys.state_dim()) {
      throw ShapeError("--x0 has " + std::to_string(x.size()) + " entries, the scenario state has " +
                       std::to_string(sys.state_dim()));
    }
    starts.push_back(x);
  }
  const int steps = a.duration ? static_cast<int>(std::lround(*a.duration / cfg.dt)) : cfg.steps();

  std::ostringstream csv;
  csv << "run,t";
  for (Eigen::Index i = 0; i < sys.state_dim(); ++i) csv << ",x" << i;
  for (Eigen::Index i = 0; i < sys.input_dim(); ++i) csv << ",u" << i;
  for (const auto& t : order) csv << ",delta_" << t;
  for (const auto& t : order) csv << ",J_" << t;
  csv << '\n';
  std::vector<std::vector<Vector>> paths;
  for (std::size_t run = 0; run < starts.size(); ++run) {
    const auto rows = simulate(stack, sys, starts[run], cfg.dt, steps);
    std::vector<Vector> path;
    for (const auto& r : rows) {
      csv << run << ',' << format_number(r.t);
      for (Eigen::Index i = 0; i < r.x.size(); ++i) csv << ',' << format_number(r.x(i));
      for (Eigen::Index i = 0; i < r.u.size(); ++i) csv << ',' << format_number(r.u(i));
      for (Eigen::Index i = 0; i < r.delta.size(); ++i) csv << ',' << format_number(r.delta(i));
      for (Eigen::Index i = 0; i < r.values.size(); ++i) csv << ',' << format_number(r.values(i));
      csv << '\n';
      path.push_back(r.x);
    }
    const Vector& xf = rows.back().x;
    std::cout << "run " << run << ":";
    for (const auto& t : order) std::cout << " q_" << t << "=" << eval_state_cost(cfg.team_cost(cfg.task(t)), xf);
    std::cout << "\n";
    paths.push_back(std::move(path));
  }

  RunManifest manifest = start_manifest("simulate", argc, argv, cfg);
  for (const auto& [task, path] : files) manifest.add_model(path);
  manifest.seeds = {{"initial_states", a.seed}};
  std::string anchor;
  if (!a.traj.empty()) {
    write_file(a.traj, csv.str());
    manifest.outputs.push_back(a.traj);
    anchor = a.traj;
  }
  if (!a.svg.empty()) {
    std::vector<Vector> markers;
    for (const auto& t : order) {
      const TaskDef& def = cfg.task(t);
      if (def.cost.kind == CostKind::go_to_point) markers.push_back(def.cost.target);
    }
    write_file(a.svg, trajectory_svg(paths, cfg.regions, -3.0, 3.0, markers));
    manifest.outputs.push_back(a.svg);
    if (anchor.empty()) anchor = a.svg;
  }
  if (!anchor.empty()) {
    manifest.wall_seconds = timer.seconds();
    manifest.write(manifest_path(anchor));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs
{
  std::string scenario;
  std::string models = ".";
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string methods;
  int threads = 0;
};

int cmd_eval(const EvalArgs& a, int argc, char** argv)
{
  const Timer timer;
  const ScenarioConfig cfg = load_scenario(a.scenario);
  const int trials = a.trials.value_or(cfg.trials);
  const std::uint64_t seed = a.seed.value_or(cfg.eval_seed);
  std::vector<std::string> methods = split(a.methods, ',');
  if (methods.empty()) {
    for (const auto& [name, stems] : cfg.methods) methods.push_back(name);
  }
  if (methods.empty()) throw ConfigError("scenario '" + cfg.name + "' defines no methods; pass --methods");

  RunManifest manifest = start_manifest("eval", argc, argv, cfg);
  std::ostringstream csv;
  csv << "method,trial,success";
  for (const auto& t : cfg.stack) csv << ",q_" << t;
  csv << ",reason\n";
  for (const auto& method : methods) {
    std::vector<std::string> order;
    const auto files = stack_files(cfg, a.models, cfg.stack, method, order);
    check_models_exist(files);
    for (const auto& [task, path] : files) manifest.add_model(path);
    const PriorityStack stack = load_stack(cfg, order, files);
    const EvalResult r = evaluate(cfg, stack, trials, seed, method, a.threads);
    for (const auto& t : r.trials) {
      csv << method << ',' << t.trial << ',' << (t.success ? 1 : 0);
      for (double q : t.final_q) csv << ',' << format_number(q);
      csv << ",\"" << t.reason << "\"\n";
    }
    std::cout << method << " success_rate " << format_number(r.success_rate) << "\n";
  }
  manifest.seeds = {{"eval", seed}};
  if (!a.out.empty()) {
    write_file(a.out, csv.str());
    manifest.outputs = {a.out};
    manifest.wall_seconds = timer.seconds();
    manifest.write(manifest_path(a.out));
  } else {
    std::cout << csv.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct IndependenceArgs
{
  std::string scenario;
  std::string models;
  int samples = 10000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_check_independence(const IndependenceArgs& a, int argc, char** argv)
{
  const Timer timer;
  const ScenarioConfig cfg = load_scenario(a.scenario);
  const auto sys = cfg.team();
  RunManifest manifest = start_manifest("check-independence", argc, argv, cfg);
  std::vector<std::shared_ptr<const ValueFunction>> values;
  nlohmann::json names = nlohmann::json::array();
  std::optional<Box> region;
  for (const auto& path : split(a.models, ',')) {
    if (!fs::exists(path)) throw ConfigError("model file not found: " + path);
    const LoadedModel m = load_model_entry(path);
    manifest.add_model(path);
    const std::string task = m.metadata.value("task", std::string());
    if (task.empty()) throw ConfigError("model '" + path + "' does not record its task");
    const TaskDef& def = cfg.task(task);
    values.push_back(team_value(cfg, def, m.net));
    names.push_back(path);
    if (!region && !def.single_robot) region = def.train.region;
    if (!region && cfg.num_robots == 1) region = def.train.region;
  }
  if (values.empty()) throw ConfigError("--models needs at least one model file");
  if (!region) {
    // Every model is single-robot on a team: sweep each robot over the
    // sampler area.
    Vector lo(sys.state_dim());
    Vector hi(sys.state_dim());
    for (int r = 0; r < cfg.num_robots; ++r) {
      lo.segment(2 * r, 2) = cfg.sampler.area.lo;
      hi.segment(2 * r, 2) = cfg.sampler.area.hi;
    }
    region = Box{lo, hi};
  }
  ReportOptions opt;
  opt.samples = a.samples;
  opt.tol = a.tol;
  opt.seed = a.seed;
  const IndependenceReport rep = report(values, sys, *region, opt);

  nlohmann::json j = {{"models", names},
                      {"samples", rep.samples},
                      {"active_states", rep.active_states},
                      {"fraction_independent", rep.fraction_independent},
                      {"fraction_independent_active", rep.fraction_independent_active},
                      {"mean_abs_cosine", rep.mean_abs_cosine},
                      {"max_abs_cosine", rep.max_abs_cosine},
                      {"cosine_pairs", rep.cosine_pairs},
                      {"min_gram_det", rep.min_gram_det},
                      {"region", box_to_json(*region)}};
  j["failures"] = nlohmann::json::array();
  for (const auto& f : rep.failures) {
    j["failures"].push_back({{"state", std::vector<double>(f.state.data(), f.state.data() + f.state.size())},
                             {"reason", f.reason}});
  }
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
    manifest.seeds = {{"report", a.seed}};
    manifest.outputs = {a.out};
    manifest.wall_seconds = timer.seconds();
    manifest.write(manifest_path(a.out));
    std::cout << "fraction_independent " << format_number(rep.fraction_independent) << " mean_abs_cosine "
              << format_number(rep.mean_abs_cosine) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct HeatmapArgs
{
  std::string scenario;
  std::string model;
  std::string out;
  std::string csv;
  int grid = 100;
  double lo = -3.0;
  double hi = 3.0;
};

int cmd_heatmap(const HeatmapArgs& a, int argc, char** argv)
{
  const Timer timer;
  const ScenarioConfig cfg = load_scenario(a.scenario);
  if (!fs::exists(a.model)) throw ConfigError("model file not found: " + a.model);
  const LoadedModel m = load_model_entry(a.model);
  const ValueGrid g = value_grid(*m.net, a.lo, a.hi, a.grid);
  RunManifest manifest = start_manifest("heatmap", argc, argv, cfg);
  manifest.add_model(a.model);
  write_file(a.out, heatmap_svg(g, cfg.regions, m.metadata.value("task", std::string())));
  manifest.outputs = {a.out};
  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "x,y,value\n";
    for (Eigen::Index i = 0; i < g.ys.size(); ++i) {
      for (Eigen::Index j = 0; j < g.xs.size(); ++j) {
        csv << format_number(g.xs(j)) << ',' << format_number(g.ys(i)) << ',' << format_number(g.values(i, j)) << '\n';
      }
    }
    write_file(a.csv, csv.str());
    manifest.outputs.push_back(a.csv);
  }
  manifest.wall_seconds = timer.seconds();
  manifest.write(manifest_path(a.out));
  std::cout << "value range [" << format_number(g.values.minCoeff()) << ", " << format_number(g.values.maxCoeff())
            << "]\n";
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Training and evaluation of independent value-function task stacks"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one task of a scenario");
  t->add_option("--scenario", train.scenario, "Built-in name (s51, s52, s53) or scenario JSON file")->required();
  t->add_option("--task", train.task, "Task name")->required();
  t->add_option("--out", train.out, "Model JSON to write")->required();
  t->add_option("--seed", train.seed, "Training seed (default: first scenario training seed)");
  t->add_option("--independent-to", train.independent_to, "Comma-separated prior model files");
  t->add_option("--lambda", train.lambda, "Penalty weight(s) for the priors (default: scenario lambdas)");
  t->add_option("--metrics", train.metrics, "Metrics CSV (default: <out>.metrics.csv)");
  t->add_option("--iterations", train.iterations, "Override the scenario's iteration count");
  t->add_flag("--timing", train.timing, "Record wall time per iteration in the metrics CSV");
  t->add_option("--threads", train.threads, "Worker threads (default: INDISTACK_THREADS or all cores)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run the stack controller from given or sampled start states");
  s->add_option("--scenario", sim.scenario, "Built-in name or scenario JSON file")->required();
  s->add_option("--models", sim.models, "Directory with model files");
  s->add_option("--stack", sim.stack, "Comma-separated tasks, highest priority first; task:file picks a model");
  s->add_option("--method", sim.method, "Scenario method naming the model of each task");
  s->add_option("--x0", sim.x0, "Start state as comma-separated values, or random:K")->required();
  s->add_option("--seed", sim.seed, "Seed for random start states");
  s->add_option("--duration", sim.duration, "Simulated seconds (default: scenario duration)");
  s->add_option("--traj", sim.traj, "Trajectory CSV to write");
  s->add_option("--svg", sim.svg, "Trajectory plot to write");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Success rates of the scenario's methods");
  e->add_option("--scenario", ev.scenario, "Built-in name or scenario JSON file")->required();
  e->add_option("--models", ev.models, "Directory with model files");
  e->add_option("--trials", ev.trials, "Number of trials (default: scenario)");
  e->add_option("--seed", ev.seed, "Seed for initial states (default: scenario)");
  e->add_option("--methods", ev.methods, "Comma-separated method names (default: all)");
  e->add_option("--out", ev.out, "Per-trial CSV to write");
  e->add_option("--threads", ev.threads, "Worker threads");

  IndependenceArgs ind;
  auto* c = app.add_subcommand("check-independence", "Monte-Carlo independence report for trained tasks");
  c->add_option("--scenario", ind.scenario, "Built-in name or scenario JSON file")->required();
  c->add_option("--models", ind.models, "Comma-separated model files")->required();
  c->add_option("--samples", ind.samples, "Number of sampled states");
  c->add_option("--tol", ind.tol, "Relative zero/rank tolerance");
  c->add_option("--seed", ind.seed, "Sampling seed");
  c->add_option("--out", ind.out, "Report JSON to write");

  HeatmapArgs hm;
  auto* h = app.add_subcommand("heatmap", "SVG raster of a planar value function");
  h->add_option("--scenario", hm.scenario, "Built-in name or scenario JSON file (for region outlines)")->required();
  h->add_option("--model", hm.model, "Model file")->required();
  h->add_option("--out", hm.out, "SVG file to write")->required();
  h->add_option("--csv", hm.csv, "Also write the grid values as CSV");
  h->add_option("--grid", hm.grid, "Cells per axis");
  h->add_option("--lo", hm.lo, "Lower bound of both axes");
  h->add_option("--hi", hm.hi, "Upper bound of both axes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*t) return cmd_train(train, argc, argv);
    if (*s) return cmd_simulate(sim, argc, argv);
    if (*e) return cmd_eval(ev, argc, argv);
    if (*c) return cmd_check_independence(ind, argc, argv);
    if (*h) return cmd_heatmap(hm, argc, argv);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.exit_code();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 0;
}
