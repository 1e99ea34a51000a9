#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pwiser/nn.hpp"

using namespace pwiser;

TEST_CASE("embed gathers rows and accumulates gradients per index") {
  ParamStore ps;
  auto& t = ps.add("embed/f0", 4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) t.value(i, j) = 10 * i + j;

  Tape tape;
  int e = tape.embed(ps, "embed/f0", {2, 0, 2});
  CHECK(tape.value(e)(0, 0) == 20.0);
  CHECK(tape.value(e)(1, 2) == 2.0);
  CHECK(tape.value(e)(2, 1) == 21.0);

  tape.grad(e).setOnes();
  tape.backward();
  CHECK(t.grad(0, 0) == 1.0);  // used once
  CHECK(t.grad(2, 0) == 2.0);  // used twice: gradients accumulate
  CHECK(t.grad(1, 0) == 0.0);
  CHECK(t.grad(3, 0) == 0.0);

  CHECK_THROWS_AS(tape.embed(ps, "embed/f0", {4}), std::out_of_range);
  CHECK_THROWS_AS(tape.embed(ps, "embed/f0", {-1}), std::out_of_range);
}

TEST_CASE("dense with identity weights passes values through") {
  ParamStore ps;
  auto& W = ps.add("l/W", 3, 3);
  ps.add("l/b", 1, 3);
  W.value.setIdentity();

  Tape tape;
  Mat x(2, 3);
  x << 1, -2, 3, 0.5, 0, -1;
  int in = tape.input(x);
  int y = tape.dense(in, ps, "l/W", "l/b", Activation::none);
  CHECK((tape.value(y) - x).cwiseAbs().maxCoeff() == 0.0);

  int r = tape.dense(in, ps, "l/W", "l/b", Activation::relu);
  CHECK(tape.value(r)(0, 1) == 0.0);
  CHECK(tape.value(r)(0, 2) == 3.0);

  // dead ReLU units pass no gradient
  tape.grad(r).setOnes();
  tape.backward();
  CHECK(tape.grad(in)(0, 0) == 1.0);  // live unit, identity weights
  CHECK(tape.grad(in)(0, 1) == 0.0);  // x = -2, unit dead
}

TEST_CASE("dense gradients match central differences") {
  ParamStore ps;
  Rng rng(7);
  auto& W = ps.add("d/W", 5, 2);
  auto& b = ps.add("d/b", 1, 2);
  for (Eigen::Index i = 0; i < W.value.size(); ++i)
    W.value.data()[i] = rng.uniform(-0.5, 0.5);
  for (Eigen::Index i = 0; i < b.value.size(); ++i)
    b.value.data()[i] = rng.uniform(-0.5, 0.5);
  Mat x(3, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  Mat seed(3, 2);
  for (Eigen::Index i = 0; i < seed.size(); ++i) seed.data()[i] = rng.uniform(-1.0, 1.0);

  auto objective = [&] {
    Tape tape;
    int in = tape.input(x);
    int y = tape.dense(in, ps, "d/W", "d/b", Activation::relu);
    return (tape.value(y).array() * seed.array()).sum();
  };

  {
    Tape tape;
    int in = tape.input(x);
    int y = tape.dense(in, ps, "d/W", "d/b", Activation::relu);
    tape.grad(y) = seed;
    tape.backward();
  }
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < W.value.size(); ++i) {
    double orig = W.value.data()[i];
    W.value.data()[i] = orig + h;
    double lp = objective();
    W.value.data()[i] = orig - h;
    double lm = objective();
    W.value.data()[i] = orig;
    double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - W.grad.data()[i]) < 1e-6);
  }
  for (Eigen::Index i = 0; i < b.value.size(); ++i) {
    double orig = b.value.data()[i];
    b.value.data()[i] = orig + h;
    double lp = objective();
    b.value.data()[i] = orig - h;
    double lm = objective();
    b.value.data()[i] = orig;
    CHECK(std::abs((lp - lm) / (2 * h) - b.grad.data()[i]) < 1e-6);
  }
}

TEST_CASE("softmax rows: symmetry, stabilization, normalization, gradient") {
  Tape tape;
  Mat x(2, 3);
  x << 5, 5, 5, 1000, 1000, 999;  // second row would overflow a naive exp
  int in = tape.input(x);
  int s = tape.softmax_rows(in);
  const Mat& y = tape.value(s);
  CHECK(y(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(y(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  for (Eigen::Index i = 0; i < 2; ++i)
    CHECK(y.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(y(1, 0)));
  CHECK(y(1, 0) == doctest::Approx(y(1, 1)).epsilon(1e-12));
  CHECK(y(1, 2) < y(1, 0));

  // finite-difference check on a small random instance
  Rng rng(11);
  Mat x2(2, 4), seed(2, 4);
  for (Eigen::Index i = 0; i < x2.size(); ++i) x2.data()[i] = rng.uniform(-2.0, 2.0);
  for (Eigen::Index i = 0; i < seed.size(); ++i) seed.data()[i] = rng.uniform(-1.0, 1.0);
  auto objective = [&] {
    Tape t;
    int v = t.softmax_rows(t.input(x2));
    return (t.value(v).array() * seed.array()).sum();
  };
  Tape t2;
  int in2 = t2.input(x2);
  int s2 = t2.softmax_rows(in2);
  t2.grad(s2) = seed;
  t2.backward();
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x2.size(); ++i) {
    double orig = x2.data()[i];
    x2.data()[i] = orig + h;
    double lp = objective();
    x2.data()[i] = orig - h;
    double lm = objective();
    x2.data()[i] = orig;
    CHECK(std::abs((lp - lm) / (2 * h) - t2.grad(in2).data()[i]) < 1e-6);
  }
}

TEST_CASE("mix combines experts by gate weights with correct gradients") {
  Tape tape;
  Mat e0(2, 2), e1(2, 2), g(2, 2);
  e0 << 1, 2, 3, 4;
  e1 << 10, 20, 30, 40;
  g << 1, 0, 0.5, 0.5;
  int n0 = tape.input(e0), n1 = tape.input(e1), ng = tape.input(g);
  int m = tape.mix({n0, n1}, ng);
  CHECK(tape.value(m)(0, 0) == 1.0);
  CHECK(tape.value(m)(1, 0) == doctest::Approx(16.5).epsilon(1e-12));

  tape.grad(m).setOnes();
  tape.backward();
  CHECK(tape.grad(n0)(0, 0) == 1.0);
  CHECK(tape.grad(n1)(0, 0) == 0.0);
  CHECK(tape.grad(n0)(1, 1) == 0.5);
  CHECK(tape.grad(ng)(0, 1) == doctest::Approx(30.0).epsilon(1e-12));  // sum of e1 row 0
}

TEST_CASE("sigmoid output is clamped and gradient is s(1-s)") {
  Tape tape;
  Mat x(1, 3);
  x << 0.0, 100.0, -100.0;
  int in = tape.input(x);
  int s = tape.sigmoid(in);
  CHECK(tape.value(s)(0, 0) == 0.5);
  CHECK(tape.value(s)(0, 1) == 1.0 - 1e-7);
  CHECK(tape.value(s)(0, 2) == 1e-7);

  tape.grad(s).setOnes();
  tape.backward();
  CHECK(tape.grad(in)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("concat_cols splits gradient back by block") {
  Tape tape;
  Mat a(2, 1), b(2, 2);
  a << 1, 2;
  b << 3, 4, 5, 6;
  int na = tape.input(a), nb = tape.input(b);
  int c = tape.concat_cols({na, nb});
  CHECK(tape.value(c).cols() == 3);
  CHECK(tape.value(c)(1, 2) == 6.0);
  Mat g(2, 3);
  g << 1, 2, 3, 4, 5, 6;
  tape.grad(c) = g;
  tape.backward();
  CHECK(tape.grad(na)(1, 0) == 4.0);
  CHECK(tape.grad(nb)(0, 1) == 3.0);
}

TEST_CASE("adam step: lr 0 is a no-op, first step moves by about lr") {
  ParamStore ps;
  auto& t = ps.add("x/W", 1, 1);
  t.value(0, 0) = 1.0;
  t.grad(0, 0) = 0.7;

  OptimizerConfig cfg;
  cfg.lr = 0.0;
  cfg.weight_decay = 0.0;
  Optimizer opt0(cfg);
  opt0.step(ps);
  CHECK(t.value(0, 0) == 1.0);
  CHECK(t.grad(0, 0) == 0.0);  // grads zeroed even at lr 0

  // first Adam step with bias correction: delta ~= lr * g / (|g| + eps')
  t.grad(0, 0) = 0.7;
  cfg.lr = 1e-3;
  Optimizer opt(cfg);
  opt.step(ps);
  CHECK(t.value(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-4));
  CHECK(opt.steps() == 1);
}

TEST_CASE("sgd with weight decay on a zero-gradient weight") {
  ParamStore ps;
  auto& w = ps.add("x/W", 1, 1);
  auto& b = ps.add("x/b", 1, 1);
  w.value(0, 0) = 1.0;
  b.value(0, 0) = 1.0;

  OptimizerConfig cfg;
  cfg.type = OptimizerType::sgd;
  cfg.lr = 1e-3;
  cfg.weight_decay = 1e-6;
  Optimizer opt(cfg);
  opt.step(ps);
  CHECK(w.value(0, 0) == doctest::Approx(1.0 - 1e-9).epsilon(1e-15));
  CHECK(b.value(0, 0) == 1.0);  // biases skip weight decay
}

TEST_CASE("optimizer refuses an empty store") {
  ParamStore ps;
  Optimizer opt(OptimizerConfig{});
  CHECK_THROWS_AS(opt.step(ps), std::logic_error);
}

TEST_CASE("init_params is deterministic and order-independent") {
  ParamStore a, b;
  a.add("dense/W", 4, 4);
  a.add("embed/f0", 10, 3);
  a.add("dense/b", 1, 4);
  b.add("embed/f0", 10, 3);  // different registration order
  b.add("dense/b", 1, 4);
  b.add("dense/W", 4, 4);
  init_params(a, 42);
  init_params(b, 42);
  CHECK((a.at("dense/W").value - b.at("dense/W").value).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.at("embed/f0").value - b.at("embed/f0").value).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.at("dense/b").value.cwiseAbs().maxCoeff() == 0.0);

  // different seed gives different weights
  ParamStore c;
  c.add("dense/W", 4, 4);
  init_params(c, 43);
  CHECK((a.at("dense/W").value - c.at("dense/W").value).cwiseAbs().maxCoeff() > 0.0);

  // Glorot bound and embedding scale sanity
  const double bound = std::sqrt(6.0 / 8.0);
  CHECK(a.at("dense/W").value.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.at("embed/f0").value.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("param store bookkeeping") {
  ParamStore ps;
  ps.add("a/W", 2, 3);
  ps.add("a/b", 1, 3);
  CHECK(ps.num_params() == 9);
  CHECK(ps.contains("a/W"));
  CHECK(!ps.contains("a/x"));
  CHECK_THROWS_AS(ps.add("a/W", 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(ps.at("missing"), std::invalid_argument);
  ps.at("a/W").grad.setOnes();
  ps.zero_grads();
  CHECK(ps.at("a/W").grad.cwiseAbs().maxCoeff() == 0.0);
}
