#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svip/json_io.hpp"

namespace svip {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kModelFormatVersion = 1;

/// Fully connected network with SiLU hidden activations and a linear
/// output layer. Samples are stored column-wise.
class Mlp {
 public:
  struct Grad {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
  };

  Mlp() = default;

  /// sizes = {in, hidden..., out}; weights ~ N(0, 1/fan_in).
  Mlp(const std::vector<int>& sizes, uint64_t seed);

  int input_dim() const { return static_cast<int>(W_.front().cols()); }
  int output_dim() const { return static_cast<int>(W_.back().rows()); }
  size_t layers() const { return W_.size(); }
  size_t parameter_count() const;
  std::vector<int> sizes() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Mean squared error over all entries, 0.5 * mean((f(x) - y)^2) * out_dim,
  /// i.e. half the per-sample squared norm averaged over the batch.
  double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;
  double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Grad& g) const;

  void sgd_step(const Grad& g, double lr);

  /// Flat parameter access, layer by layer (W column-major, then b).
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& p);

  Json to_json() const;
  static Mlp from_json(const Json& j);

  bool operator==(const Mlp& o) const { return W_ == o.W_ && b_ == o.b_; }

 private:
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

/// Adam on top of Mlp::sgd_step: the step passed down is the bias-corrected
/// moment ratio.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(Mlp& net, const Mlp::Grad& g);

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  Mlp::Grad m_, v_;
};

/// Relative error ||a - n|| / max(||a||, ||n||, 1e-12) between the analytic
/// gradient and a central finite difference of the loss at step h.
double gradient_check(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double h = 1e-5);

/// Per-dimension affine normalization with a std floor.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Normalizer fit(const Eigen::MatrixXd& data, double floor = 1e-3);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return (x.colwise() - mean).array().colwise() / std.array(); }
  Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const { return (z.array().colwise() * std.array()).matrix().colwise() + mean; }
  Json to_json() const;
  static Normalizer from_json(const Json& j);
};

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

}  // namespace svip
