#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "svip/nn.hpp"

namespace svip {

/// Variance schedule over steps k = 1..K (stored 0-based).
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }

  static NoiseSchedule linear(int K = 50, double beta_start = 1e-4, double beta_end = 0.02);
};

struct DiffusionParams {
  int steps = 50;
  int hidden = 128;
  int hidden_layers = 3;
  int embed_dim = 16;
  int iterations = 4000;
  int batch = 64;
  double lr = 0.2;  // per output dimension
  uint64_t seed = 0;
};

/// Sinusoidal embedding of diffusion step k.
Eigen::VectorXd step_embedding(int k, int dim);

/// DDPM whose noise predictor sees (x_k ⊕ condition ⊕ embed(k)). Data and
/// conditions are normalized per dimension before training.
class DiffusionModel {
 public:
  DiffusionModel() = default;

  /// x: data_dim x N samples, c: cond_dim x N conditions (cond_dim may be 0).
  static DiffusionModel train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, const DiffusionParams& params,
                              std::vector<double>* epoch_losses = nullptr);

  /// Reverse chain from x_K ~ N(0, I). Same (cond, seed) -> bitwise-same output.
  Eigen::VectorXd sample(const Eigen::VectorXd& cond, uint64_t seed) const;

  /// Noise prediction in normalized coordinates.
  Eigen::VectorXd predict_noise(const Eigen::VectorXd& xk, const Eigen::VectorXd& cond_normalized, int k) const;

  int data_dim() const { return static_cast<int>(xnorm_.mean.size()); }
  int cond_dim() const { return static_cast<int>(cnorm_.mean.size()); }
  const NoiseSchedule& schedule() const { return sched_; }
  const Mlp& network() const { return net_; }

  Json to_json() const;
  static DiffusionModel from_json(const Json& j);

 private:
  NoiseSchedule sched_;
  Mlp net_;
  Normalizer xnorm_;
  Normalizer cnorm_;
  int embed_dim_ = 16;
  Eigen::MatrixXd input_batch(const Eigen::MatrixXd& xk, const Eigen::MatrixXd& cn, const std::vector<int>& ks) const;
};

}  // namespace svip
