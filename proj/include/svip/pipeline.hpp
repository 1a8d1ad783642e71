#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "svip/generator.hpp"
#include "svip/planner.hpp"
#include "svip/sim.hpp"
#include "svip/validator.hpp"

namespace svip {

/// Training data for one bimanual skill, pulled from segmented demos.
struct SkillData {
  std::string left_object, right_object;
  std::vector<BimanualConfig> configs;                              // <q_pre, q_eff> per demo
  std::map<std::string, std::vector<TrajectorySample>> trajectories;  // per object, world frame
};

/// q_pre is the policy start step, q_eff the effect keyframe (or the last
/// step). Trajectories are the grasp approaches, resampled to kWaypoints.
SkillData extract_skill_data(const std::vector<DemoTrace>& demos);

struct TrainOptions {
  DiffusionParams config_params;
  DiffusionParams traj_params;
  ValidatorParams validator;
  PlacementGrid grid{5, 5, Rect{Vec2d::Zero(), Vec2d(0.6, 0.4)}, true};
  int t_samples = 5;
  uint64_t seed = 0;
};

/// Everything learned from the insertion demonstrations.
struct InsertionSystem {
  std::string skill_id = "insert";
  Domain domain;  // base domain plus the compiled bimanual action
  SkillGenerators generators;
  ValidatorModel validator;
  PolicyEmulator emulator;
  double validator_holdout_mae = 0.0;

  Json to_json() const;
  static InsertionSystem from_json(const Json& j);
};

InsertionSystem train_insertion_system(const std::vector<DemoTrace>& demos, const Domain& base, const TrainOptions& opt,
                                       std::ostream* log = nullptr);

/// Symbolic problem for a scenario world: initial poses, home confs, goal
/// DoneBiOp plus both arms home.
Problem make_problem(const InsertionSystem& sys, const WorldState& w);

struct StreamOptions {
  uint64_t perception_seed = 0;
  double cloud_sigma = 0.002;
  bool use_validator = true;
};

/// Stream implementations over the learned models and the scenario world.
StreamRegistry make_streams(const InsertionSystem& sys, const WorldState& w, const StreamOptions& opt = {});

struct TrialResult {
  bool success = false;
  bool planned = false;
  std::string reason;  // empty on success
  size_t plan_length = 0;
  bool relocation = false;  // plan places some object before the bimanual action
  double plan_seconds = 0.0;
  std::optional<WorldState> biop_start;  // world when the bimanual action began
  Json report;
};

/// Execute a bound plan from the scenario's initial world.
TrialResult execute_plan(const InsertionSystem& sys, const Scenario& sc, const Plan& plan, TraceRecorder* log = nullptr);

/// Plan with the learned streams, then execute in the simulator.
TrialResult run_svip_trial(const InsertionSystem& sys, const Scenario& sc, const SolveConfig& cfg,
                           const StreamOptions& opt = {});

/// The raw policy from the initial state, without planning.
TrialResult run_raw_trial(const InsertionSystem& sys, const Scenario& sc);

/// Socket-peg goal test: the peg footprint lies inside the socket footprint.
bool insertion_done(const WorldState& w);

}  // namespace svip
