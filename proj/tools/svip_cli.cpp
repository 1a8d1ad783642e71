// Command-line driver: demo-gen, segment, train, plan, rollout, bench.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "svip/pddl.hpp"
#include "svip/pipeline.hpp"

namespace fs = std::filesystem;
using namespace svip;

namespace {

constexpr int kReportSchema = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string scenario = "ID";
  std::string task = "insertion";
  std::string method = "svip";
  uint64_t seed = 1;
  int trials = 20;
  int demos = 50;
  double timeout = 60.0;
  std::string out = "svip_out";
  bool verbose = false;
  // training
  int config_iterations = 4000;
  int traj_iterations = 4000;
  int validator_iterations = 10000;
};

/// Values from the config file; flags given on the command line win.
void apply_config(Options& o, const CLI::App& app) {
  if (o.config_path.empty()) return;
  if (!fs::exists(o.config_path)) throw UsageError("config file not found: " + o.config_path);
  const Json j = read_json_file(o.config_path);
  auto take = [&](const char* key, const char* flag, auto& field) {
    if (j.contains(key) && app.count(flag) == 0) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("scenario", "--scenario", o.scenario);
  take("task", "--task", o.task);
  take("method", "--method", o.method);
  take("seed", "--seed", o.seed);
  take("trials", "--trials", o.trials);
  take("demos", "--demos", o.demos);
  take("timeout", "--timeout", o.timeout);
  take("out", "--out", o.out);
  if (j.contains("train")) {
    const Json& t = j.at("train");
    o.config_iterations = t.value("config_iterations", o.config_iterations);
    o.traj_iterations = t.value("traj_iterations", o.traj_iterations);
    o.validator_iterations = t.value("validator_iterations", o.validator_iterations);
  }
}

Json effective_config(const Options& o) {
  return {{"scenario", o.scenario},
          {"task", o.task},
          {"method", o.method},
          {"seed", o.seed},
          {"trials", o.trials},
          {"demos", o.demos},
          {"timeout", o.timeout},
          {"train",
           {{"config_iterations", o.config_iterations},
            {"traj_iterations", o.traj_iterations},
            {"validator_iterations", o.validator_iterations}}}};
}

std::string config_hash(const Options& o) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << derive_seed(0, effective_config(o).dump());
  return os.str();
}

Json stamp(const Options& o, Json body) {
  body["schema_version"] = kReportSchema;
  body["config_hash"] = config_hash(o);
  body["seed"] = o.seed;
  body["config"] = effective_config(o);
  return body;
}

fs::path demo_dir(const Options& o) { return fs::path(o.out) / "demos" / o.task; }
fs::path system_path(const Options& o) { return fs::path(o.out) / "models" / "system.json"; }
fs::path plan_path(const Options& o) {
  return fs::path(o.out) / "plans" / (o.scenario + "-" + std::to_string(o.seed) + ".json");
}

void write(const fs::path& p, const Json& j) {
  fs::create_directories(p.parent_path());
  write_json_file(p.string(), j);
}

std::vector<DemoTrace> load_demos(const Options& o) {
  const fs::path dir = demo_dir(o);
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    throw UsageError("no demonstrations under " + dir.string() + "; run `svip_cli demo-gen --task " + o.task + "` first");
  const Json m = read_json_file(manifest.string());
  std::vector<DemoTrace> out;
  for (const auto& f : m.at("files")) out.push_back(load_trace((dir / f.get<std::string>()).string()));
  return out;
}

InsertionSystem load_system(const Options& o) {
  const fs::path p = system_path(o);
  if (!fs::exists(p)) throw UsageError("no trained system at " + p.string() + "; run `svip_cli train` first");
  return InsertionSystem::from_json(read_json_file(p.string()).at("system"));
}

SolveConfig solve_config(const Options& o, uint64_t seed) {
  SolveConfig c;
  c.timeout = o.timeout;
  c.seed = seed;
  if (o.verbose) c.trace = &std::cerr;
  return c;
}

// ---------------------------------------------------------------------------

int cmd_demo_gen(const Options& o) {
  const auto demos = scripted_demos(o.task, o.demos, o.seed);
  const fs::path dir = demo_dir(o);
  fs::create_directories(dir);
  Json files = Json::array();
  for (size_t i = 0; i < demos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "demo-%03zu.json", i);
    save_trace((dir / name).string(), demos[i]);
    files.push_back(name);
  }
  write(dir / "manifest.json", stamp(o, {{"task", o.task}, {"count", demos.size()}, {"files", files}}));
  std::cout << "wrote " << demos.size() << " " << o.task << " demonstrations to " << dir.string() << '\n';
  return 0;
}

int cmd_segment(const Options& o) {
  const auto demos = load_demos(o);
  if (demos.empty()) throw UsageError("the demonstration set is empty");
  Json per_demo = Json::array();
  for (const auto& tr : demos) {
    const EventSequence seq = segment(tr);
    Json spans = Json::array();
    for (const auto& s : seq.contact_rich) {
      Json span = {{"pre", seq.keyframes[s.pre].t}, {"mid", seq.keyframes[s.mid].t}};
      if (s.eff) span["eff"] = seq.keyframes[*s.eff].t;
      spans.push_back(span);
    }
    per_demo.push_back({{"keyframes", seq.times()}, {"contact_rich", spans}});
  }
  const EventSequence seq = segment(demos.front());
  if (seq.contact_rich.empty()) throw UsageError("the first demonstration has no contact-rich segment");
  const std::string id = o.task == "insertion" ? "insert" : o.task;
  const SkillSchema skill = skill_from_segment(id, demos.front(), seq, 0);
  Domain d = o.task == "insertion" ? load_domain(SVIP_DATA_DIR "/domains/insertion.svd") : bioperation_base_domain();
  const ActionSchema act = compile_bioperation(skill);
  validate_action(d, act);
  d.actions.push_back(act);

  const fs::path dir = fs::path(o.out) / "skills";
  fs::create_directories(dir);
  const fs::path domain_file = dir / (o.task + ".svd");
  {
    std::ofstream f(domain_file);
    f << serialize(d);
  }
  Domain only;
  only.name = d.name;
  only.actions.push_back(act);
  write(dir / (o.task + ".json"), stamp(o, {{"task", o.task},
                                            {"skill", id},
                                            {"demos", per_demo},
                                            {"domain_file", domain_file.filename().string()},
                                            {"action", serialize(only)}}));
  std::cout << "segmented " << demos.size() << " demonstrations; compiled BiOperation-" << id << " into "
            << domain_file.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  if (o.task != "insertion") throw UsageError("train supports the insertion task only");
  const auto demos = load_demos(o);
  TrainOptions t;
  t.seed = o.seed;
  t.config_params.iterations = o.config_iterations;
  t.traj_params.iterations = o.traj_iterations;
  t.validator.iterations = o.validator_iterations;
  const auto t0 = std::chrono::steady_clock::now();
  const InsertionSystem sys =
      train_insertion_system(demos, load_domain(SVIP_DATA_DIR "/domains/insertion.svd"), t, &std::cout);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write(system_path(o), stamp(o, {{"system", sys.to_json()},
                                  {"demos", demos.size()},
                                  {"validator_holdout_mae", sys.validator_holdout_mae},
                                  {"train_seconds", secs}}));
  std::cout << "trained on " << demos.size() << " demonstrations in " << std::fixed << std::setprecision(1) << secs
            << " s; wrote " << system_path(o).string() << '\n';
  return 0;
}

int cmd_plan(const Options& o) {
  const InsertionSystem sys = load_system(o);
  const Scenario sc = sample_scenario(o.scenario, o.seed);
  const Problem prob = make_problem(sys, sc.world);
  const SolveResult r = solve(sys.domain, prob, make_streams(sys, sc.world, {o.seed}), solve_config(o, o.seed));
  Json body = {{"scenario", sc.name}, {"plan_seconds", r.seconds}};
  if (r.ok()) {
    body["plan"] = plan_to_json(*r.plan);
    std::cout << "plan of " << r.plan->length() << " actions:\n";
    for (const auto& s : r.plan->steps) {
      std::cout << "  (" << s.action;
      for (const auto& a : s.args) std::cout << ' ' << a;
      std::cout << ")\n";
    }
  } else {
    body["failure"] = failure_to_json(*r.failure);
    std::cout << "no plan: " << r.failure->reason << '\n';
  }
  write(plan_path(o), stamp(o, body));
  return r.ok() ? 0 : 1;
}

int cmd_rollout(const Options& o) {
  const InsertionSystem sys = load_system(o);
  const fs::path pp = plan_path(o);
  if (!fs::exists(pp))
    throw UsageError("no plan at " + pp.string() + "; run `svip_cli plan --scenario " + o.scenario + " --seed " +
                     std::to_string(o.seed) + "` first");
  const Json pj = read_json_file(pp.string());
  if (!pj.contains("plan")) throw UsageError("the plan file records a planning failure; nothing to roll out");
  const Scenario sc = sample_scenario(o.scenario, o.seed);
  TraceRecorder log;
  const TrialResult r = execute_plan(sys, sc, plan_from_json(pj.at("plan")), &log);
  DemoTrace executed;
  executed.task = "rollout";
  executed.header = sc.world;
  executed.steps = log.steps();
  const fs::path dir = fs::path(o.out) / "rollouts";
  const std::string stem = o.scenario + "-" + std::to_string(o.seed);
  fs::create_directories(dir);
  save_trace((dir / (stem + ".trace.json")).string(), executed);
  write(dir / (stem + ".json"), stamp(o, {{"outcome", r.report}, {"steps", executed.size()}}));
  std::cout << (r.success ? "success" : "failure: " + r.reason) << " after " << executed.size() << " steps\n";
  return r.success ? 0 : 1;
}

int cmd_bench(const Options& o) {
  if (o.trials < 1) throw UsageError("--trials must be at least 1");
  if (o.method != "svip" && o.method != "raw") throw UsageError("--method must be svip or raw");
  const InsertionSystem sys = load_system(o);
  Json records = Json::array();
  int ok = 0;
  double len_sum = 0.0, time_sum = 0.0;
  for (int i = 0; i < o.trials; ++i) {
    const uint64_t seed = o.seed + static_cast<uint64_t>(i);
    const Scenario sc = sample_scenario(o.scenario, seed);
    TrialResult r;
    if (o.method == "raw") {
      r = run_raw_trial(sys, sc);
    } else {
      try {
        r = run_svip_trial(sys, sc, solve_config(o, seed), StreamOptions{seed});
      } catch (const std::exception& e) {
        r.reason = std::string("error: ") + e.what();
      }
    }
    ok += r.success;
    if (r.success) len_sum += static_cast<double>(r.plan_length);
    time_sum += r.plan_seconds;
    records.push_back({{"seed", seed},
                       {"success", r.success},
                       {"plan_length", r.plan_length},
                       {"plan_seconds", r.plan_seconds},
                       {"reason", r.reason},
                       {"relocation", r.relocation}});
    if (o.verbose) std::cerr << "trial " << i << " seed " << seed << ": " << (r.success ? "ok" : r.reason) << '\n';
  }
  const double rate = 100.0 * ok / o.trials;
  const double mean_len = ok ? len_sum / ok : 0.0;
  const double mean_time = time_sum / o.trials;
  const Json report = stamp(o, {{"scenario", o.scenario},
                                {"method", o.method},
                                {"records", records},
                                {"aggregates",
                                 {{"trials", o.trials},
                                  {"successes", ok},
                                  {"success_rate", rate},
                                  {"mean_plan_length", mean_len},
                                  {"mean_plan_seconds", mean_time}}}});
  const fs::path p = fs::path(o.out) / "bench" / (o.scenario + "-" + o.method + "-" + std::to_string(o.seed) + "-" +
                                                     config_hash(o).substr(0, 8) + ".json");
  write(p, report);
  std::cout << o.scenario << " " << o.method << ": success " << std::fixed << std::setprecision(1) << rate << "% ("
            << ok << "/" << o.trials << "), mean length " << std::setprecision(2) << mean_len << ", mean time "
            << std::setprecision(3) << mean_time << " s\n"
            << "report: " << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale bimanual planning with learned skills"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "JSON config file; flags override its values");
  app.add_option("--scenario", o.scenario, "Scenario name")
      ->check(CLI::IsMember(scenario_names()));
  app.add_option("--task", o.task, "Demonstration task")->check(CLI::IsMember(demo_tasks()));
  app.add_option("--method", o.method, "bench method: svip or raw");
  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--trials", o.trials, "Bench trials");
  app.add_option("--demos", o.demos, "Number of demonstrations");
  app.add_option("--timeout", o.timeout, "Planner timeout in seconds")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--verbose", o.verbose, "Planner trace and per-trial lines on stderr");

  auto* demo_gen = app.add_subcommand("demo-gen", "Generate scripted demonstrations");
  auto* seg = app.add_subcommand("segment", "Segment demonstrations and compile the bimanual action");
  auto* train = app.add_subcommand("train", "Train generators, validator and policy emulator");
  auto* plan = app.add_subcommand("plan", "Plan one scenario instance");
  auto* rollout = app.add_subcommand("rollout", "Execute a saved plan in the simulator");
  auto* bench = app.add_subcommand("bench", "Seeded plan and rollout trials");

  CLI11_PARSE(app, argc, argv);
  try {
    apply_config(o, app);
    if (*demo_gen) return cmd_demo_gen(o);
    if (*seg) return cmd_segment(o);
    if (*train) return cmd_train(o);
    if (*plan) return cmd_plan(o);
    if (*rollout) return cmd_rollout(o);
    if (*bench) return cmd_bench(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
