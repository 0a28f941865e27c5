#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support/helpers.hpp"
#include "../support/properties.hpp"
#include "teamcredit/mlp.hpp"
#include "teamcredit/oracle.hpp"

using namespace teamcredit;
using namespace teamcredit::testing;

TEST_CASE("standard architecture has three hidden layers of the configured width") {
  const auto arch = nn::arch3(1, 256, 1);
  REQUIRE(arch == std::vector<int>{1, 256, 256, 256, 1});
  const auto net = nn::make_mlp(arch, 4);
  REQUIRE(net.w.size() == 4);
  CHECK(net.w[0].rows() == 256);
  CHECK(net.w[0].cols() == 1);
  CHECK(net.w[1].rows() == 256);
  CHECK(net.w[1].cols() == 256);
  CHECK(net.w[2].rows() == 256);
  CHECK(net.w[2].cols() == 256);
  CHECK(net.w[3].rows() == 1);
  CHECK(net.w[3].cols() == 256);
  CHECK(net.param_count() == (256 + 256) + (256 * 256 + 256) * 2 + (256 + 1));
  CHECK(net.init_id == "he_uniform_v1");
  for (const auto& b : net.b) CHECK(b.cwiseAbs().maxCoeff() == 0.0);  // zero bias init
}

TEST_CASE("all-zero network maps everything to zero") {
  auto net = nn::make_mlp({3, 5, 2}, 1);
  for (auto& w : net.w) w.setZero();
  for (auto& b : net.b) b.setZero();
  MatrixXd x(3, 4);
  x.setRandom();
  CHECK(nn::forward(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dead hidden units leave only the output bias") {
  auto net = nn::make_mlp({4, 8, 2}, 11);
  for (auto& b : net.b) b.setConstant(-30.0);
  net.b.back().setZero();
  net.b.back()[0] = 1.25;
  net.b.back()[1] = -0.5;
  MatrixXd x(4, 3);
  x.setRandom();
  const MatrixXd out = nn::forward(net, x);
  for (int c = 0; c < 3; ++c) {
    CHECK(out(0, c) == 1.25);
    CHECK(out(1, c) == -0.5);
  }
}

TEST_CASE("backward matches finite differences on the documented small net") {
  Rng rng(3);
  auto net = nn::make_mlp({4, 8, 8, 8, 1}, 21);
  const int n = 5;
  MatrixXd x(4, n), y(1, n);
  for (int j = 0; j < x.size(); ++j) x.data()[j] = rng.normal();
  for (int j = 0; j < y.size(); ++j) y.data()[j] = rng.normal();

  nn::ForwardCache cache;
  const MatrixXd out = nn::forward(net, x, &cache);
  auto grads = nn::zero_gradients(net);
  nn::backward(net, cache, (out - y) / n, grads);

  nn::Mlp probe = net;
  const auto loss = [&](const VectorXd& flat) {
    nn::unflatten_params(probe, flat);
    return 0.5 * (nn::forward(probe, x) - y).squaredNorm() / n;
  };
  const auto rep = oracle::finite_diff_check(loss, nn::flatten_gradients(grads),
                                             nn::flatten_params(net), 100, 1e-5, 1e-4, 5);
  CHECK_MESSAGE(rep.pass, "max rel err " << rep.max_rel_err);
  CHECK(rep.n_checked == 100);
}

TEST_CASE("adam is a fixpoint on zero gradients and deterministic across reruns") {
  auto net = nn::make_mlp({2, 4, 1}, 31);
  const auto before = net;
  auto st = nn::make_adam(net);
  nn::adam_step(net, nn::zero_gradients(net), st, 1e-2);
  CHECK(mlp_equal(net, before));

  // identical runs give identical trajectories
  auto run = [&](std::uint64_t seed) {
    auto n = nn::make_mlp({2, 4, 1}, 31);
    auto s = nn::make_adam(n);
    Rng r(seed);
    for (int step = 0; step < 10; ++step) {
      auto g = nn::zero_gradients(n);
      for (auto& dw : g.dw)
        for (int j = 0; j < dw.size(); ++j) dw.data()[j] = r.normal();
      nn::adam_step(n, g, s, 1e-3);
    }
    return n;
  };
  CHECK(mlp_equal(run(9), run(9)));
}

TEST_CASE("non-finite gradients are rejected by name") {
  auto net = nn::make_mlp({2, 3, 1}, 41);
  auto g = nn::zero_gradients(net);
  g.dw[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    nn::check_finite(g, "psi_test");
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("psi_test") != std::string::npos);
  }
}

TEST_CASE("mlp property suites") {
  std::vector<Property> props;
  add_mlp_properties(props);
  for (const auto& p : props) {
    const auto rep = run_property(p, 200, 0xAB5170);
    CHECK_MESSAGE(rep.failures == 0,
                  p.name << " failed " << rep.failures << "/" << rep.cases << ": "
                         << rep.first_failure);
  }
}
