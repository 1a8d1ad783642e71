#include "svip/generator.hpp"

#include <cmath>

namespace svip {

CloudEncoding canonicalize(const PointCloudd& c) {
  if (c.size() < 3) throw GeometryError("canonicalize: need at least 3 points");
  if (!c.points.allFinite()) throw GeometryError("canonicalize: non-finite points");
  const Vec3d mu = c.centroid();
  const Eigen::Matrix3Xd d = c.points.colwise() - mu;
  const double n = static_cast<double>(c.size());
  const Mat3d cov = d * d.transpose() / n;
  const Eigen::SelfAdjointEigenSolver<Mat3d> es(cov);
  const Vec3d ev = es.eigenvalues();  // ascending
  if (ev(2) < 1e-14) throw GeometryError("canonicalize: coincident points");
  if (ev(1) < 1e-9 * ev(2)) throw GeometryError("canonicalize: collinear points");

  const double sxx = cov(0, 0), syy = cov(1, 1), sxy = cov(0, 1);
  double yaw = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const Eigen::Vector2d axis(std::cos(yaw), std::sin(yaw));
  const Eigen::RowVectorXd along = axis.transpose() * d.topRows<2>();
  const double corr = (along.array() * d.row(2).array()).mean();
  double sign = corr;
  if (std::abs(corr) < 1e-8) sign = along.array().cube().mean();
  if (sign < 0.0) yaw += M_PI;

  CloudEncoding enc;
  enc.frame = Posed::planar(mu.x(), mu.y(), wrap_angle(yaw), mu.z());
  const Eigen::Matrix3Xd p = transform_cloud(enc.frame.inverse(), c).points;
  const Eigen::ArrayXd x = p.row(0).transpose().array();
  const Eigen::ArrayXd y = p.row(1).transpose().array();
  const Eigen::ArrayXd z = p.row(2).transpose().array();
  const Eigen::ArrayXd r = (x.square() + y.square()).sqrt();

  Eigen::VectorXd f(kDescriptorDim);
  int k = 0;
  f(k++) = std::sqrt(x.square().mean());
  f(k++) = std::sqrt(y.square().mean());
  f(k++) = std::sqrt(z.square().mean());
  f(k++) = (x * z).mean();
  f(k++) = x.cube().mean();
  f(k++) = (y.square() * x).mean();
  f(k++) = x.abs().mean();
  f(k++) = y.abs().mean();
  const auto rbf = [&](const Eigen::ArrayXd& v, double centre, double width) {
    return (-(v - centre).square() / (2.0 * width * width)).exp().mean();
  };
  for (int i = 0; i < 8; ++i) f(k++) = rbf(r, 0.01 * i, 0.01);
  for (int i = 0; i < 8; ++i) f(k++) = rbf(x, -0.07 + 0.02 * i, 0.01);
  for (int i = 0; i < 6; ++i) f(k++) = rbf(y, -0.04 + 0.016 * i, 0.008);
  f(k++) = z.cube().mean();
  f(k++) = (x.square() * y.square()).mean();
  enc.descriptor = f;
  return enc;
}

Eigen::Matrix<double, kPoseDim, 1> pose_to_vec(const Posed& p) {
  Eigen::Matrix<double, kPoseDim, 1> v;
  v << p.translation, rot6d_encode(p.rotation);
  return v;
}

Posed pose_from_vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kPoseDim) throw GeometryError("pose vector must have 9 entries");
  const Mat3d r = rot6d_decode<double>(v.tail<6>());
  return Posed(v.head<3>(), Eigen::Quaterniond(r));
}

Eigen::VectorXd poses_to_vec(const std::vector<Posed>& poses) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(poses.size()) * kPoseDim);
  for (size_t i = 0; i < poses.size(); ++i) v.segment<kPoseDim>(static_cast<Eigen::Index>(i) * kPoseDim) = pose_to_vec(poses[i]);
  return v;
}

std::vector<Posed> poses_from_vec(const Eigen::VectorXd& v) {
  if (v.size() % kPoseDim != 0) throw GeometryError("pose list vector length must be a multiple of 9");
  std::vector<Posed> out;
  for (Eigen::Index i = 0; i < v.size() / kPoseDim; ++i) out.push_back(pose_from_vec(v.segment<kPoseDim>(i * kPoseDim)));
  return out;
}

BimanualConfig BimanualConfig::from_vector(const std::vector<Posed>& v) {
  if (v.size() != 4) throw ModelError("bimanual configuration needs 4 poses");
  return {v[0], v[1], v[2], v[3]};
}

std::vector<Posed> TrajectoryGenerator::sample(const PointCloudd& cloud, uint64_t seed) const {
  const CloudEncoding enc = canonicalize(cloud);
  std::vector<Posed> traj = poses_from_vec(model_.sample(enc.descriptor, seed));
  for (auto& p : traj) p = compose(enc.frame, p);
  return traj;
}

BimanualConfig ConfigGenerator::sample(uint64_t seed) const {
  return BimanualConfig::from_vector(poses_from_vec(model_.sample(Eigen::VectorXd(0), seed)));
}

TrajectoryGenerator train_traj_generator(const std::vector<TrajectorySample>& data, const DiffusionParams& params,
                                         std::vector<double>* losses) {
  if (data.size() < 20) throw ModelError("trajectory generator needs at least 20 samples");
  const size_t len = data.front().trajectory.size();
  if (len == 0) throw ModelError("empty trajectory in training data");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(len) * kPoseDim, static_cast<Eigen::Index>(data.size()));
  Eigen::MatrixXd c(kDescriptorDim, static_cast<Eigen::Index>(data.size()));
  for (size_t i = 0; i < data.size(); ++i) {
    if (data[i].trajectory.size() != len) throw ModelError("inconsistent trajectory lengths in training data");
    const CloudEncoding enc = canonicalize(data[i].cloud);
    std::vector<Posed> local;
    for (const auto& p : data[i].trajectory) local.push_back(compose(enc.frame.inverse(), p));
    x.col(static_cast<Eigen::Index>(i)) = poses_to_vec(local);
    c.col(static_cast<Eigen::Index>(i)) = enc.descriptor;
  }
  return TrajectoryGenerator(DiffusionModel::train(x, c, params, losses));
}

ConfigGenerator train_config_generator(const std::vector<BimanualConfig>& data, const DiffusionParams& params,
                                       std::vector<double>* losses) {
  if (data.size() < 20) throw ModelError("configuration generator needs at least 20 samples");
  Eigen::MatrixXd x(4 * kPoseDim, static_cast<Eigen::Index>(data.size()));
  for (size_t i = 0; i < data.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = poses_to_vec(data[i].as_vector());
  return ConfigGenerator(DiffusionModel::train(x, Eigen::MatrixXd(0, x.cols()), params, losses));
}

Json SkillGenerators::to_json() const {
  Json t = Json::object();
  for (const auto& [o, g] : trajectories) t[o] = g.model().to_json();
  return {{"format", "svip-skill-generators"}, {"version", kModelFormatVersion}, {"config", config.model().to_json()}, {"trajectories", t}};
}

SkillGenerators SkillGenerators::from_json(const Json& j) {
  if (j.value("format", "") != "svip-skill-generators") throw ModelError("not an svip-skill-generators file");
  if (j.value("version", 0) != kModelFormatVersion) throw ModelError("unsupported generator file version");
  SkillGenerators g;
  g.config = ConfigGenerator(DiffusionModel::from_json(j.at("config")));
  for (const auto& [o, m] : j.at("trajectories").items()) g.trajectories[o] = TrajectoryGenerator(DiffusionModel::from_json(m));
  return g;
}

uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, then a splitmix64 finalizer over the mix.
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DecisionVars sample_switching_conditions(const SkillGenerators& gens, const std::map<std::string, PointCloudd>& clouds,
                                         uint64_t seed) {
  DecisionVars v;
  v.q = gens.config.sample(derive_seed(seed, "q"));
  for (const auto& [o, gen] : gens.trajectories) {
    auto it = clouds.find(o);
    if (it == clouds.end()) throw ModelError("no point cloud for object '" + o + "'");
    v.trajectories[o] = gen.sample(it->second, derive_seed(seed, "tau/" + o));
  }
  return v;
}

}  // namespace svip
