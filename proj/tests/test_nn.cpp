#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "svip/diffusion.hpp"
#include "svip/nn.hpp"

using namespace svip;

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> width(2, 7);
    std::vector<int> sizes{width(rng)};
    const int hidden = 1 + trial % 3;
    for (int h = 0; h < hidden; ++h) sizes.push_back(width(rng));
    sizes.push_back(width(rng));
    Mlp net(sizes, 100 + trial);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(sizes.front(), 5);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(sizes.back(), 5);
    CHECK(gradient_check(net, x, y) < 1e-4);
  }
}

TEST_CASE("forward pass is deterministic and serializes exactly") {
  Mlp net({4, 8, 8, 3}, 7);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 1);
  const Eigen::VectorXd a = net.forward(x), b = net.forward(x);
  CHECK(a == b);
  const Mlp back = Mlp::from_json(Json::parse(net.to_json().dump()));
  CHECK(back == net);
  CHECK(back.forward(x) == a);
  Json broken = net.to_json();
  broken["layers"][1]["in"] = 5;
  CHECK_THROWS_AS(Mlp::from_json(broken), ModelError);
  broken = net.to_json();
  broken["version"] = 99;
  CHECK_THROWS_AS(Mlp::from_json(broken), ModelError);
  CHECK_THROWS_AS(net.forward(Eigen::VectorXd(3)), ModelError);
}

TEST_CASE("sgd reduces a regression loss") {
  Mlp net({1, 16, 1}, 3);
  Eigen::MatrixXd x = Eigen::RowVectorXd::LinSpaced(32, -1, 1);
  Eigen::MatrixXd y = (x.array() * 2.0).sin().matrix();
  const double before = net.loss(x, y);
  Mlp::Grad g;
  for (int i = 0; i < 2000; ++i) {
    net.loss_and_grad(x, y, g);
    net.sgd_step(g, 0.05);
  }
  CHECK(net.loss(x, y) < 0.1 * before);
}

TEST_CASE("noise schedule") {
  const auto s = NoiseSchedule::linear(50);
  CHECK(s.steps() == 50);
  CHECK(s.beta.front() == doctest::Approx(1e-4));
  CHECK(s.beta.back() == doctest::Approx(0.02));
  for (size_t k = 1; k < s.alpha_bar.size(); ++k) CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);
  double bar = 1.0;
  for (double b : s.beta) bar *= 1.0 - b;
  CHECK(s.alpha_bar.back() == doctest::Approx(bar));
  CHECK_THROWS_AS(NoiseSchedule::linear(0), ModelError);
}

TEST_CASE("single repeated datapoint collapses") {
  Eigen::MatrixXd x(3, 30);
  for (int i = 0; i < 30; ++i) x.col(i) << 0.1, -0.2, 0.05;
  DiffusionParams p;
  p.iterations = 300;
  p.hidden = 32;
  const auto m = DiffusionModel::train(x, Eigen::MatrixXd(0, 30), p);
  for (uint64_t s = 0; s < 5; ++s) CHECK((m.sample(Eigen::VectorXd(0), s) - x.col(0)).norm() < 0.01);
}

TEST_CASE("K = 1 schedule samples in one step") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 40);
  DiffusionParams p;
  p.steps = 1;
  p.iterations = 50;
  p.hidden = 16;
  const auto m = DiffusionModel::train(x, Eigen::MatrixXd(0, 40), p);
  CHECK(m.schedule().steps() == 1);
  CHECK(m.sample(Eigen::VectorXd(0), 3).allFinite());
}

TEST_CASE("two-mode configuration data") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> jitter(0.0, 0.005);
  Eigen::MatrixXd x(4, 50);
  Eigen::Vector4d m0(-0.1, 0.0, 0.1, 0.0), m1(-0.1, 0.15, 0.1, 0.15);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector4d& m = i % 2 ? m1 : m0;
    for (int d = 0; d < 4; ++d) x(d, i) = m(d) + jitter(rng);
  }
  DiffusionParams p;
  p.iterations = 3000;
  std::vector<double> losses;
  const auto model = DiffusionModel::train(x, Eigen::MatrixXd(0, 50), p, &losses);
  // Smoothed epoch losses trend down.
  const auto avg = [&](size_t a, size_t b) {
    double s = 0;
    for (size_t i = a; i < b; ++i) s += losses[i];
    return s / static_cast<double>(b - a);
  };
  CHECK(avg(losses.size() - 100, losses.size()) < avg(0, 100));
  int near = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    const Eigen::VectorXd q = model.sample(Eigen::VectorXd(0), s);
    if (std::min((q - m0).norm(), (q - m1).norm()) < 0.05) ++near;
  }
  CHECK(near >= 95);
  const auto back = DiffusionModel::from_json(Json::parse(model.to_json().dump()));
  CHECK(back.sample(Eigen::VectorXd(0), 4) == model.sample(Eigen::VectorXd(0), 4));
}
