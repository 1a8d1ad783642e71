#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "svip/nn.hpp"
#include "svip/sim.hpp"

namespace svip {

inline constexpr int kConfigFeatureDim = 8;  // per gripper: x, y, cos yaw, sin yaw
inline constexpr double kSafetyMargin = 0.05;

/// One row of the collision-prediction dataset.
struct CollisionSample {
  Eigen::VectorXd q;  // encode_config of the start configuration
  Vec2d p = Vec2d::Zero();
  Eigen::Vector3d nu = Eigen::Vector3d::Zero();
  double delta = 0.0;
};

Eigen::VectorXd encode_config(const Posed& left, const Posed& right);

/// nx x ny cells over `area`; points are cell centres, or uniform within each
/// cell when `jitter` is set (seeded per call).
struct PlacementGrid {
  int nx = 5, ny = 5;
  Rect area{Vec2d::Zero(), Vec2d(0.6, 0.4)};
  bool jitter = false;

  std::vector<Vec2d> points(uint64_t seed = 0) const;
};

/// For every demo, 5 evenly spaced steps t of T_pre and every placement:
/// δ = swept distance of the robot from t to the end of the demo against the
/// obstacle placed at p. Throws SimError when a demo has an empty T_pre.
std::vector<CollisionSample> build_collision_dataset(const std::vector<DemoTrace>& demos, const PlacementGrid& grid,
                                                     const ObjectState& obstacle, int t_samples = 5, uint64_t seed = 0);

struct ValidatorParams {
  int hidden = 64;
  int hidden_layers = 2;
  int iterations = 20000;
  int batch = 64;
  double lr = 2e-3;
  double holdout = 0.2;
  uint64_t seed = 0;
};

class ValidatorModel {
 public:
  ValidatorModel() = default;
  ValidatorModel(Mlp net, Normalizer in, double out_mean, double out_std)
      : net_(std::move(net)), in_(std::move(in)), out_mean_(out_mean), out_std_(out_std) {}

  /// δ̂ >= 0.
  double predict(const Eigen::VectorXd& q, const Vec2d& p, const Eigen::Vector3d& nu) const;
  double predict(const CollisionSample& s) const { return predict(s.q, s.p, s.nu); }

  Json to_json() const;
  static ValidatorModel from_json(const Json& j);

 private:
  Mlp net_;
  Normalizer in_;
  double out_mean_ = 0.0, out_std_ = 1.0;
};

struct ValidatorFit {
  ValidatorModel model;
  double holdout_mae = 0.0;
  double holdout_agreement = 0.0;  // safe/unsafe agreement at kSafetyMargin
  bool degenerate_labels = false;
};

/// Needs >= 100 samples. Holds out a seeded fraction for the reported errors.
ValidatorFit train_validator(const std::vector<CollisionSample>& data, const ValidatorParams& params = {});

double mean_abs_error(const ValidatorModel& m, const std::vector<CollisionSample>& data);
double agreement(const ValidatorModel& m, const std::vector<CollisionSample>& data, double margin = kSafetyMargin);

/// True iff δ̂ > margin for every object outside `manipulated`. Conservative
/// false on model errors.
bool test_safe_biop(const ValidatorModel& model, const WorldState& s, const Posed& q_left, const Posed& q_right,
                    const std::set<std::string>& manipulated, double margin = kSafetyMargin);

void write_collision_samples(std::ostream& os, const std::vector<CollisionSample>& data);
std::vector<CollisionSample> read_collision_samples(std::istream& is);

}  // namespace svip
