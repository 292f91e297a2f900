#include <stdexcept>
#include <doctest.h>

#include <vector>

#include "fd_check.hpp"
#include "nrl/graph.hpp"
#include "nrl/rng.hpp"

using namespace nrl;

namespace {

Param random_param(Rng& rng, const std::string& name,
                   std::vector<std::size_t> shape) {
  Param p(name, std::move(shape));
  for (double& v : p.value) v = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("sum of squares has the analytic gradient") {
  Param x("x", {2});
  x.value = {1.0, 2.0};
  Graph g;
  const int xs = g.param(x);
  const int loss = g.sum(g.mul(xs, xs));
  CHECK(g.value(loss)(0) == doctest::Approx(5.0));
  g.backward(loss);
  CHECK(x.grad == std::vector<double>{2.0, 4.0});
  CHECK(x.grad_ready);
}

TEST_CASE("parameters unused by the loss receive zero gradient") {
  Param x("x", {2}), unused("u", {3});
  x.value = {1.0, 1.0};
  unused.value = {5.0, 5.0, 5.0};
  Graph g;
  const int xs = g.param(x);
  g.param(unused);
  const int loss = g.sum(xs);
  g.backward(loss);
  CHECK(unused.grad == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(unused.grad_ready);
}

TEST_CASE("backward rejects non-scalar losses and double backward") {
  Param x("x", {2});
  x.value = {1.0, 2.0};
  Graph g;
  const int xs = g.param(x);
  CHECK_THROWS_AS(g.backward(xs), std::invalid_argument);
  const int loss = g.sum(xs);
  g.backward(loss);
  CHECK_THROWS(g.backward(loss));
}

TEST_CASE("random 5-parameter micro-net matches finite differences") {
  Rng rng(17);
  Param w1 = random_param(rng, "w1", {3, 4});
  Param b1 = random_param(rng, "b1", {4});
  Param w2 = random_param(rng, "w2", {4, 2});
  Param b2 = random_param(rng, "b2", {2});
  Param s = random_param(rng, "s", {1});
  Tensor x({2, 3});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

  const auto build = [&](Graph& g) {
    const int h =
        g.relu(g.add(g.matmul(g.input(x), g.param(w1)), g.param(b1)));
    const int y = g.add(g.matmul(h, g.param(w2)), g.param(b2));
    return g.sum(g.mul(g.sum(g.mul(y, y)), g.param(s)));
  };
  const double err =
      nrl_test::fd_relative_error({&w1, &b1, &w2, &b2, &s}, build);
  CHECK(err < 1e-4);
}

TEST_CASE("per-primitive gradients match finite differences on random shapes") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(3);
    const std::size_t c = 1 + rng.uniform_index(4);
    const std::size_t hw = 2 + rng.uniform_index(5);
    const std::size_t co = 1 + rng.uniform_index(4);

    Param x = random_param(rng, "x", {n, c, hw, hw});
    Param w = random_param(rng, "w", {co, c, 3, 3});
    Param gamma = random_param(rng, "gamma", {co});
    Param beta = random_param(rng, "beta", {co});
    for (double& v : gamma.value) v = 1.0 + 0.1 * v;

    SUBCASE("conv2d + relu + pool") {
      const auto build = [&](Graph& g) {
        const int y = g.conv2d(g.param(x), g.param(w), 1, 1);
        return g.sum(g.mul(g.global_avg_pool(g.relu(y)),
                           g.global_avg_pool(g.relu(y))));
      };
      CHECK(nrl_test::fd_relative_error({&x, &w}, build) < 1e-4);
    }
    SUBCASE("batchnorm train mode") {
      BnBuffer buf("bn", co);
      // a random linear functional keeps every coordinate's gradient away
      // from zero, so the finite-difference quotient stays well conditioned
      Tensor probe({n, co, hw, hw});
      for (double& v : probe.data) v = rng.uniform(-1.0, 1.0);
      const auto build = [&](Graph& g) {
        const int y = g.conv2d(g.param(x), g.param(w), 1, 1);
        const int bn = g.batchnorm2d(y, g.param(gamma), g.param(beta), buf,
                                     NormMode::train, 0.9);
        return g.sum(g.mul(bn, g.input(probe)));
      };
      CHECK(nrl_test::fd_relative_error({&x, &w, &gamma, &beta}, build) < 1e-4);
    }
    SUBCASE("l2 normalize + slice + concat") {
      Param a = random_param(rng, "a", {3, 4});
      Param b = random_param(rng, "b", {2, 4});
      const auto build = [&](Graph& g) {
        const int cat = g.concat_batch(g.param(a), g.param(b));
        const int z = g.l2_normalize_rows(cat);
        const int top = g.slice_rows(z, 0, 2);
        return g.sum(g.mul(top, g.scalar_mul(top, 0.5)));
      };
      CHECK(nrl_test::fd_relative_error({&a, &b}, build) < 1e-4);
    }
  }
}

TEST_CASE("row-broadcast add backpropagates to the bias") {
  Rng rng(29);
  Param x = random_param(rng, "x", {3, 4});
  Param b = random_param(rng, "b", {4});
  const auto build = [&](Graph& g) {
    const int y = g.add(g.param(x), g.param(b));
    return g.sum(g.mul(y, y));
  };
  CHECK(nrl_test::fd_relative_error({&x, &b}, build) < 1e-4);
}
