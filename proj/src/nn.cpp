#include "svip/nn.hpp"

#include <cmath>
#include <random>

namespace svip {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

}  // namespace

Mlp::Mlp(const std::vector<int>& sizes, uint64_t seed) {
  if (sizes.size() < 2) throw ModelError("mlp needs at least an input and an output size");
  for (int s : sizes)
    if (s <= 0) throw ModelError("mlp layer sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * n01(rng);
    W_.push_back(std::move(w));
    b_.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < W_.size(); ++l) n += static_cast<size_t>(W_[l].size() + b_[l].size());
  return n;
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& w : W_) s.push_back(static_cast<int>(w.rows()));
  return s;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (W_.empty()) throw ModelError("mlp is empty");
  if (x.rows() != input_dim()) throw ModelError("mlp input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(input_dim()));
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < W_.size(); ++l) {
    Eigen::MatrixXd z = (W_[l] * a).colwise() + b_[l];
    if (l + 1 < W_.size()) a = (z.array() * sigmoid(z).array()).matrix();
    else a = std::move(z);
  }
  return a;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
  const Eigen::MatrixXd d = forward(x) - y;
  return 0.5 * d.squaredNorm() / static_cast<double>(x.cols());
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Grad& g) const {
  const size_t L = W_.size();
  std::vector<Eigen::MatrixXd> acts{x};  // inputs to each layer
  std::vector<Eigen::MatrixXd> pre;      // pre-activations of hidden layers
  acts.reserve(L + 1);
  for (size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = (W_[l] * acts.back()).colwise() + b_[l];
    if (l + 1 < L) {
      acts.push_back((z.array() * sigmoid(z).array()).matrix());
      pre.push_back(std::move(z));
    } else {
      acts.push_back(std::move(z));
    }
  }
  const double inv_b = 1.0 / static_cast<double>(x.cols());
  Eigen::MatrixXd delta = (acts.back() - y) * inv_b;
  const double value = 0.5 * (acts.back() - y).squaredNorm() * inv_b;

  g.dW.resize(L);
  g.db.resize(L);
  for (size_t l = L; l-- > 0;) {
    g.dW[l] = delta * acts[l].transpose();
    g.db[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = W_[l].transpose() * delta;
    const Eigen::MatrixXd s = sigmoid(pre[l - 1]);
    const Eigen::ArrayXXd dsilu = s.array() * (1.0 + pre[l - 1].array() * (1.0 - s.array()));
    delta = (back.array() * dsilu).matrix();
  }
  return value;
}

void Mlp::sgd_step(const Grad& g, double lr) {
  for (size_t l = 0; l < W_.size(); ++l) {
    W_[l] -= lr * g.dW[l];
    b_[l] -= lr * g.db[l];
  }
}

void Adam::step(Mlp& net, const Mlp::Grad& g) {
  if (m_.dW.empty()) {
    for (size_t l = 0; l < g.dW.size(); ++l) {
      m_.dW.push_back(Eigen::MatrixXd::Zero(g.dW[l].rows(), g.dW[l].cols()));
      m_.db.push_back(Eigen::VectorXd::Zero(g.db[l].size()));
    }
    v_ = m_;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
  Mlp::Grad u;
  for (size_t l = 0; l < g.dW.size(); ++l) {
    m_.dW[l] = b1_ * m_.dW[l] + (1.0 - b1_) * g.dW[l];
    v_.dW[l] = b2_ * v_.dW[l] + (1.0 - b2_) * g.dW[l].cwiseAbs2();
    m_.db[l] = b1_ * m_.db[l] + (1.0 - b1_) * g.db[l];
    v_.db[l] = b2_ * v_.db[l] + (1.0 - b2_) * g.db[l].cwiseAbs2();
    u.dW.push_back(((m_.dW[l] / c1).array() / ((v_.dW[l] / c2).array().sqrt() + eps_)).matrix());
    u.db.push_back(((m_.db[l] / c1).array() / ((v_.db[l] / c2).array().sqrt() + eps_)).matrix());
  }
  net.sgd_step(u, lr_);
}

std::vector<double> Mlp::parameters() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  for (size_t l = 0; l < W_.size(); ++l) {
    p.insert(p.end(), W_[l].data(), W_[l].data() + W_[l].size());
    p.insert(p.end(), b_[l].data(), b_[l].data() + b_[l].size());
  }
  return p;
}

void Mlp::set_parameters(const std::vector<double>& p) {
  if (p.size() != parameter_count()) throw ModelError("parameter vector has the wrong length");
  size_t k = 0;
  for (size_t l = 0; l < W_.size(); ++l) {
    std::copy(p.begin() + static_cast<long>(k), p.begin() + static_cast<long>(k + W_[l].size()), W_[l].data());
    k += static_cast<size_t>(W_[l].size());
    std::copy(p.begin() + static_cast<long>(k), p.begin() + static_cast<long>(k + b_[l].size()), b_[l].data());
    k += static_cast<size_t>(b_[l].size());
  }
}

Json Mlp::to_json() const {
  Json layers = Json::array();
  for (size_t l = 0; l < W_.size(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<size_t>(W_[l].size()));
    for (Eigen::Index i = 0; i < W_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < W_[l].cols(); ++j) w.push_back(W_[l](i, j));
    layers.push_back({{"in", W_[l].cols()}, {"out", W_[l].rows()}, {"W", w}, {"b", std::vector<double>(b_[l].data(), b_[l].data() + b_[l].size())}});
  }
  return {{"format", "svip-mlp"}, {"version", kModelFormatVersion}, {"activation", "silu"}, {"layers", layers}};
}

Mlp Mlp::from_json(const Json& j) {
  if (j.value("format", "") != "svip-mlp") throw ModelError("not an svip-mlp model");
  if (j.value("version", 0) != kModelFormatVersion) throw ModelError("unsupported model version");
  Mlp m;
  Eigen::Index prev = -1;
  for (const auto& jl : j.at("layers")) {
    const Eigen::Index in = jl.at("in").get<Eigen::Index>();
    const Eigen::Index out = jl.at("out").get<Eigen::Index>();
    if (prev >= 0 && in != prev) throw ModelError("model layer shapes do not chain");
    const auto w = jl.at("W").get<std::vector<double>>();
    const auto b = jl.at("b").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
      throw ModelError("model layer size does not match its shape");
    Eigen::MatrixXd W(out, in);
    for (Eigen::Index i = 0; i < out; ++i)
      for (Eigen::Index k = 0; k < in; ++k) W(i, k) = w[static_cast<size_t>(i * in + k)];
    m.W_.push_back(std::move(W));
    m.b_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
    prev = out;
  }
  if (m.W_.empty()) throw ModelError("model has no layers");
  return m;
}

double gradient_check(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double h) {
  Mlp::Grad g;
  net.loss_and_grad(x, y, g);
  std::vector<double> analytic;
  for (size_t l = 0; l < g.dW.size(); ++l) {
    analytic.insert(analytic.end(), g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
    analytic.insert(analytic.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
  }
  Mlp probe = net;
  std::vector<double> p = net.parameters();
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    probe.set_parameters(p);
    const double up = probe.loss(x, y);
    p[i] = keep - h;
    probe.set_parameters(p);
    const double down = probe.loss(x, y);
    p[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& data, double floor) {
  if (data.cols() == 0) throw ModelError("cannot fit a normalizer to no data");
  Normalizer n;
  n.mean = data.rowwise().mean();
  const Eigen::MatrixXd c = data.colwise() - n.mean;
  n.std = (c.array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt().max(floor).matrix();
  return n;
}

Json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json Normalizer::to_json() const { return {{"mean", vector_to_json(mean)}, {"std", vector_to_json(std)}}; }

Normalizer Normalizer::from_json(const Json& j) {
  Normalizer n;
  n.mean = vector_from_json(j.at("mean"));
  n.std = vector_from_json(j.at("std"));
  if (n.mean.size() != n.std.size()) throw ModelError("normalizer mean/std length mismatch");
  return n;
}

}  // namespace svip
