#include "svip/diffusion.hpp"

#include <cmath>

namespace svip {

NoiseSchedule NoiseSchedule::linear(int K, double beta_start, double beta_end) {
  if (K < 1) throw ModelError("noise schedule needs K >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) throw ModelError("noise schedule betas out of range");
  NoiseSchedule s;
  double bar = 1.0;
  for (int k = 0; k < K; ++k) {
    const double b = K == 1 ? beta_end : beta_start + (beta_end - beta_start) * k / (K - 1);
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    bar *= 1.0 - b;
    s.alpha_bar.push_back(bar);
  }
  return s;
}

Eigen::VectorXd step_embedding(int k, int dim) {
  Eigen::VectorXd e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(1000.0, -static_cast<double>(i) / std::max(1, half - 1));
    e(2 * i) = std::sin(k * freq);
    e(2 * i + 1) = std::cos(k * freq);
  }
  if (dim % 2) e(dim - 1) = static_cast<double>(k) / 50.0;
  return e;
}

Eigen::MatrixXd DiffusionModel::input_batch(const Eigen::MatrixXd& xk, const Eigen::MatrixXd& cn, const std::vector<int>& ks) const {
  const Eigen::Index D = xk.rows(), C = cn.rows(), n = xk.cols();
  Eigen::MatrixXd in(D + C + embed_dim_, n);
  in.topRows(D) = xk;
  if (C > 0) in.middleRows(D, C) = cn;
  for (Eigen::Index i = 0; i < n; ++i) in.col(i).tail(embed_dim_) = step_embedding(ks[static_cast<size_t>(i)], embed_dim_);
  return in;
}

DiffusionModel DiffusionModel::train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, const DiffusionParams& p,
                                     std::vector<double>* epoch_losses) {
  if (x.cols() == 0) throw ModelError("diffusion training needs data");
  if (c.cols() != x.cols() && c.rows() > 0) throw ModelError("condition count does not match sample count");
  if (!x.allFinite() || !c.allFinite()) throw ModelError("diffusion training data must be finite");
  DiffusionModel m;
  m.sched_ = NoiseSchedule::linear(p.steps);
  m.embed_dim_ = p.embed_dim;
  m.xnorm_ = Normalizer::fit(x);
  m.cnorm_ = c.rows() > 0 ? Normalizer::fit(c) : Normalizer{Eigen::VectorXd(0), Eigen::VectorXd(0)};
  const Eigen::MatrixXd xn = m.xnorm_.apply(x);
  const Eigen::MatrixXd cn = c.rows() > 0 ? m.cnorm_.apply(c) : Eigen::MatrixXd(0, x.cols());

  std::vector<int> sizes{static_cast<int>(x.rows() + c.rows()) + p.embed_dim};
  for (int l = 0; l < p.hidden_layers; ++l) sizes.push_back(p.hidden);
  sizes.push_back(static_cast<int>(x.rows()));
  m.net_ = Mlp(sizes, p.seed);

  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, x.cols() - 1);
  std::uniform_int_distribution<int> step(1, p.steps);
  const int batch = std::max(1, p.batch);
  const int per_epoch = std::max(1, static_cast<int>((x.cols() + batch - 1) / batch));
  double acc = 0.0;
  int acc_n = 0;
  Mlp::Grad g;
  Eigen::MatrixXd x0(x.rows(), batch), cb(cn.rows(), batch), eps(x.rows(), batch), xk(x.rows(), batch);
  std::vector<int> ks(static_cast<size_t>(batch));
  for (int it = 0; it < p.iterations; ++it) {
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index i = pick(rng);
      x0.col(b) = xn.col(i);
      if (cn.rows() > 0) cb.col(b) = cn.col(i);
      ks[static_cast<size_t>(b)] = step(rng);
      for (Eigen::Index d = 0; d < eps.rows(); ++d) eps(d, b) = n01(rng);
      const double ab = m.sched_.alpha_bar[static_cast<size_t>(ks[static_cast<size_t>(b)] - 1)];
      xk.col(b) = std::sqrt(ab) * x0.col(b) + std::sqrt(1.0 - ab) * eps.col(b);
    }
    // Loss and step are per output dimension so lr does not depend on data_dim.
    const double D = static_cast<double>(x.rows());
    acc += 2.0 * m.net_.loss_and_grad(m.input_batch(xk, cb, ks), eps, g) / D;
    ++acc_n;
    m.net_.sgd_step(g, p.lr / D);
    if (acc_n == per_epoch || it + 1 == p.iterations) {
      if (epoch_losses) epoch_losses->push_back(acc / acc_n);
      acc = 0.0;
      acc_n = 0;
    }
  }
  return m;
}

Eigen::VectorXd DiffusionModel::predict_noise(const Eigen::VectorXd& xk, const Eigen::VectorXd& cond_normalized, int k) const {
  return net_.forward(input_batch(xk, cond_normalized, {k})).col(0);
}

Eigen::VectorXd DiffusionModel::sample(const Eigen::VectorXd& cond, uint64_t seed) const {
  if (cond.size() != cond_dim()) throw ModelError("condition has " + std::to_string(cond.size()) + " dims, model expects " + std::to_string(cond_dim()));
  const Eigen::VectorXd cn = cond_dim() > 0 ? Eigen::VectorXd(cnorm_.apply(cond)) : Eigen::VectorXd(0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd x(data_dim());
  for (Eigen::Index d = 0; d < x.size(); ++d) x(d) = n01(rng);
  for (int k = sched_.steps(); k >= 1; --k) {
    const size_t i = static_cast<size_t>(k - 1);
    const double ab = sched_.alpha_bar[i];
    const double ab_prev = i > 0 ? sched_.alpha_bar[i - 1] : 1.0;
    const Eigen::VectorXd eps = predict_noise(x, cn, k);
    x = (x - sched_.beta[i] / std::sqrt(1.0 - ab) * eps) / std::sqrt(sched_.alpha[i]);
    if (k > 1) {
      const double var = sched_.beta[i] * (1.0 - ab_prev) / (1.0 - ab);
      const double sd = std::sqrt(var);
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) += sd * n01(rng);
    }
  }
  return xnorm_.invert(x).col(0);
}

Json DiffusionModel::to_json() const {
  return {{"format", "svip-ddpm"},
          {"version", kModelFormatVersion},
          {"steps", sched_.steps()},
          {"beta_start", sched_.beta.front()},
          {"beta_end", sched_.beta.back()},
          {"embed_dim", embed_dim_},
          {"x_norm", xnorm_.to_json()},
          {"c_norm", cnorm_.to_json()},
          {"net", net_.to_json()}};
}

DiffusionModel DiffusionModel::from_json(const Json& j) {
  if (j.value("format", "") != "svip-ddpm") throw ModelError("not an svip-ddpm model");
  if (j.value("version", 0) != kModelFormatVersion) throw ModelError("unsupported model version");
  DiffusionModel m;
  m.sched_ = NoiseSchedule::linear(j.at("steps").get<int>(), j.at("beta_start").get<double>(), j.at("beta_end").get<double>());
  m.embed_dim_ = j.at("embed_dim").get<int>();
  m.xnorm_ = Normalizer::from_json(j.at("x_norm"));
  m.cnorm_ = Normalizer::from_json(j.at("c_norm"));
  m.net_ = Mlp::from_json(j.at("net"));
  if (m.net_.input_dim() != m.data_dim() + m.cond_dim() + m.embed_dim_ || m.net_.output_dim() != m.data_dim())
    throw ModelError("ddpm network shape does not match its normalizers");
  return m;
}

}  // namespace svip
