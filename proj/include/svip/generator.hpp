#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svip/diffusion.hpp"
#include "svip/geometry.hpp"

namespace svip {

inline constexpr int kDescriptorDim = 32;
inline constexpr int kWaypoints = 16;
inline constexpr int kPoseDim = 9;  // xyz + Rot6D

/// Canonical frame of a cloud plus a permutation-invariant descriptor
/// computed in that frame.
struct CloudEncoding {
  Posed frame;
  Eigen::VectorXd descriptor;
};

/// Frame = centroid and principal-axis yaw; the axis sign follows the
/// correlation of height with the axis (third moment as fallback).
/// Throws GeometryError on fewer than 3 points or collinear/coincident ones.
CloudEncoding canonicalize(const PointCloudd& c);

Eigen::Matrix<double, kPoseDim, 1> pose_to_vec(const Posed& p);
Posed pose_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd poses_to_vec(const std::vector<Posed>& poses);
std::vector<Posed> poses_from_vec(const Eigen::VectorXd& v);

/// 𝐪 = <q_pre, q_eff>, each a (left, right) gripper pair.
struct BimanualConfig {
  Posed pre_l, pre_r, eff_l, eff_r;
  std::vector<Posed> as_vector() const { return {pre_l, pre_r, eff_l, eff_r}; }
  static BimanualConfig from_vector(const std::vector<Posed>& v);
};

struct DecisionVars {
  BimanualConfig q;
  std::map<std::string, std::vector<Posed>> trajectories;  // world frame
};

/// Cloud-conditioned sampler of world-frame gripper trajectories, learned in
/// the cloud's canonical frame.
class TrajectoryGenerator {
 public:
  TrajectoryGenerator() = default;
  explicit TrajectoryGenerator(DiffusionModel m) : model_(std::move(m)) {}

  std::vector<Posed> sample(const PointCloudd& cloud, uint64_t seed) const;
  const DiffusionModel& model() const { return model_; }

 private:
  DiffusionModel model_;
};

class ConfigGenerator {
 public:
  ConfigGenerator() = default;
  explicit ConfigGenerator(DiffusionModel m) : model_(std::move(m)) {}

  BimanualConfig sample(uint64_t seed) const;
  const DiffusionModel& model() const { return model_; }

 private:
  DiffusionModel model_;
};

struct TrajectorySample {
  PointCloudd cloud;
  std::vector<Posed> trajectory;  // world frame, kWaypoints poses
};

/// Needs >= 20 samples of equal trajectory length.
TrajectoryGenerator train_traj_generator(const std::vector<TrajectorySample>& data, const DiffusionParams& params,
                                         std::vector<double>* losses = nullptr);
ConfigGenerator train_config_generator(const std::vector<BimanualConfig>& data, const DiffusionParams& params,
                                       std::vector<double>* losses = nullptr);

/// φ for one skill: the configuration factor plus one trajectory factor per
/// manipulated object.
struct SkillGenerators {
  ConfigGenerator config;
  std::map<std::string, TrajectoryGenerator> trajectories;

  Json to_json() const;
  static SkillGenerators from_json(const Json& j);
};

/// Deterministic child seed for a named factor.
uint64_t derive_seed(uint64_t seed, std::string_view tag);

/// Each factor gets its own reverse chain under derive_seed(seed, factor).
DecisionVars sample_switching_conditions(const SkillGenerators& gens, const std::map<std::string, PointCloudd>& clouds,
                                         uint64_t seed);

/// Stream wrapper around a seeded sampler: call i draws with
/// derive_seed(seed, i); after `budget` calls it yields nothing.
template <class T>
class SamplerStream {
 public:
  SamplerStream(std::function<T(uint64_t)> draw, int budget, uint64_t seed)
      : draw_(std::move(draw)), budget_(budget), seed_(seed) {}

  std::optional<T> next() {
    if (calls_ >= budget_) return std::nullopt;
    return draw_(derive_seed(seed_, std::to_string(calls_++)));
  }
  bool exhausted() const { return calls_ >= budget_; }
  int calls() const { return calls_; }

 private:
  std::function<T(uint64_t)> draw_;
  int budget_;
  uint64_t seed_;
  int calls_ = 0;
};

}  // namespace svip
