#include "svip/validator.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

namespace svip {

Eigen::VectorXd encode_config(const Posed& left, const Posed& right) {
  Eigen::VectorXd v(kConfigFeatureDim);
  v << left.translation.x(), left.translation.y(), std::cos(left.yaw()), std::sin(left.yaw()), right.translation.x(),
      right.translation.y(), std::cos(right.yaw()), std::sin(right.yaw());
  return v;
}

std::vector<Vec2d> PlacementGrid::points(uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Vec2d cell(2.0 * area.half.x() / nx, 2.0 * area.half.y() / ny);
  std::vector<Vec2d> out;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      Vec2d p = area.center - area.half + Vec2d((i + 0.5) * cell.x(), (j + 0.5) * cell.y());
      if (jitter) p += Vec2d(u(rng) * cell.x(), u(rng) * cell.y());
      out.push_back(p);
    }
  return out;
}

std::vector<CollisionSample> build_collision_dataset(const std::vector<DemoTrace>& demos, const PlacementGrid& grid,
                                                     const ObjectState& obstacle, int t_samples, uint64_t seed) {
  std::vector<CollisionSample> out;
  const Eigen::Vector3d nu = obstacle.feature();
  for (size_t d = 0; d < demos.size(); ++d) {
    const DemoTrace& tr = demos[d];
    const EventSequence seq = segment(tr);
    if (seq.contact_rich.empty()) throw SimError("demo has no contact-rich segment");
    const auto& span = seq.contact_rich.front();
    const size_t lo = seq.keyframes[span.pre].step, hi = seq.keyframes[span.mid].step;
    if (hi <= lo) throw SimError("demo has an empty T_pre");
    for (int k = 0; k < t_samples; ++k) {
      const size_t t = t_samples == 1 ? lo : lo + static_cast<size_t>(std::lround(static_cast<double>(k) * (hi - 1 - lo) / (t_samples - 1)));
      const auto bodies = trace_bodies(tr, t);
      const TraceStep& st = tr.steps[t];
      const Eigen::VectorXd q = encode_config(st.grippers.at(tr.header.arms[0].id).pose, st.grippers.at(tr.header.arms[1].id).pose);
      for (const Vec2d& p : grid.points(seed + 1000003ULL * d + 7919ULL * static_cast<uint64_t>(k))) {
        CollisionSample s;
        s.q = q;
        s.p = p;
        s.nu = nu;
        s.delta = min_distance_oracle(bodies, obstacle.shape.placed(Posed::planar(p.x(), p.y(), 0.0)));
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

namespace {

Eigen::VectorXd features(const Eigen::VectorXd& q, const Vec2d& p, const Eigen::Vector3d& nu) {
  Eigen::VectorXd x(q.size() + 5);
  x << q, p, nu;
  return x;
}

}  // namespace

double ValidatorModel::predict(const Eigen::VectorXd& q, const Vec2d& p, const Eigen::Vector3d& nu) const {
  const Eigen::VectorXd x = in_.apply(features(q, p, nu)).col(0);
  return std::max(0.0, out_mean_ + out_std_ * net_.forward(x)(0));
}

Json ValidatorModel::to_json() const {
  return {{"format", "svip-validator"}, {"version", kModelFormatVersion}, {"in_norm", in_.to_json()},
          {"out_mean", out_mean_},      {"out_std", out_std_},            {"net", net_.to_json()}};
}

ValidatorModel ValidatorModel::from_json(const Json& j) {
  if (j.value("format", "") != "svip-validator") throw ModelError("not an svip-validator model");
  if (j.value("version", 0) != kModelFormatVersion) throw ModelError("unsupported validator version");
  ValidatorModel m(Mlp::from_json(j.at("net")), Normalizer::from_json(j.at("in_norm")), j.at("out_mean").get<double>(),
                   j.at("out_std").get<double>());
  if (m.net_.input_dim() != m.in_.mean.size() || m.net_.output_dim() != 1) throw ModelError("validator shape mismatch");
  return m;
}

double mean_abs_error(const ValidatorModel& m, const std::vector<CollisionSample>& data) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : data) s += std::abs(m.predict(d) - d.delta);
  return s / static_cast<double>(data.size());
}

double agreement(const ValidatorModel& m, const std::vector<CollisionSample>& data, double margin) {
  if (data.empty()) return 1.0;
  size_t ok = 0;
  for (const auto& d : data) ok += (m.predict(d) > margin) == (d.delta > margin);
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

ValidatorFit train_validator(const std::vector<CollisionSample>& data, const ValidatorParams& p) {
  if (data.size() < 100) throw ModelError("validator training needs at least 100 samples");
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(p.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const size_t n_hold = static_cast<size_t>(p.holdout * static_cast<double>(data.size()));
  std::vector<CollisionSample> hold, train;
  for (size_t i = 0; i < idx.size(); ++i) (i < n_hold ? hold : train).push_back(data[idx[i]]);

  const Eigen::Index D = data.front().q.size() + 5, N = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd x(D, N), y(1, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    x.col(i) = features(train[static_cast<size_t>(i)].q, train[static_cast<size_t>(i)].p, train[static_cast<size_t>(i)].nu);
    y(0, i) = train[static_cast<size_t>(i)].delta;
  }
  ValidatorFit fit;
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  fit.degenerate_labels = sd < 1e-12;
  if (fit.degenerate_labels) std::cerr << "warning: validator labels are all identical\n";
  const double out_std = std::max(sd, 1e-3);
  const Normalizer in = Normalizer::fit(x);
  const Eigen::MatrixXd xn = in.apply(x);
  const Eigen::MatrixXd yn = (y.array() - mean) / out_std;

  std::vector<int> sizes{static_cast<int>(D)};
  for (int l = 0; l < p.hidden_layers; ++l) sizes.push_back(p.hidden);
  sizes.push_back(1);
  Mlp net(sizes, p.seed);
  Adam opt(p.lr);
  std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
  const int B = std::max(1, p.batch);
  Eigen::MatrixXd xb(D, B), yb(1, B);
  Mlp::Grad g;
  for (int it = 0; it < p.iterations; ++it) {
    for (int b = 0; b < B; ++b) {
      const Eigen::Index i = pick(rng);
      xb.col(b) = xn.col(i);
      yb(0, b) = yn(0, i);
    }
    net.loss_and_grad(xb, yb, g);
    opt.step(net, g);
  }
  fit.model = ValidatorModel(std::move(net), in, mean, out_std);
  fit.holdout_mae = mean_abs_error(fit.model, hold);
  fit.holdout_agreement = agreement(fit.model, hold);
  return fit;
}

bool test_safe_biop(const ValidatorModel& model, const WorldState& s, const Posed& q_left, const Posed& q_right,
                    const std::set<std::string>& manipulated, double margin) {
  try {
    const Eigen::VectorXd q = encode_config(q_left, q_right);
    for (const auto& o : s.objects) {
      if (manipulated.count(o.id)) continue;
      if (!(model.predict(q, o.pose.xy(), o.feature()) > margin)) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void write_collision_samples(std::ostream& os, const std::vector<CollisionSample>& data) {
  for (const auto& s : data) {
    const Json j{{"q", vector_to_json(s.q)}, {"p", {s.p.x(), s.p.y()}}, {"nu", {s.nu.x(), s.nu.y(), s.nu.z()}}, {"delta", s.delta}};
    os << j.dump() << '\n';
  }
}

std::vector<CollisionSample> read_collision_samples(std::istream& is) {
  std::vector<CollisionSample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    CollisionSample s;
    s.q = vector_from_json(j.at("q"));
    s.p = Vec2d(j.at("p").at(0).get<double>(), j.at("p").at(1).get<double>());
    for (int k = 0; k < 3; ++k) s.nu(k) = j.at("nu").at(static_cast<size_t>(k)).get<double>();
    s.delta = j.at("delta").get<double>();
    if (s.delta < 0.0 || !s.nu.allFinite()) throw ModelError("collision sample violates δ >= 0 or finite ν");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace svip
