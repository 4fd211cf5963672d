#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "grad_check.hpp"
#include "relocc/rng.hpp"
#include "relocc/tensor.hpp"

using namespace relocc;

using relocc::testing::check_grads;
using relocc::testing::randn;

TEST_CASE("gradients: elementwise and matmul") {
  auto rng = make_rng(11);
  check_grads(
      [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::add(v[0], ops::scale(ops::sub(v[0], v[1]), 0.7)));
      },
      {randn(3, 4, rng), randn(3, 4, rng)});
  check_grads(
      [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::matmul(v[0], v[1]));
      },
      {randn(3, 4, rng), randn(4, 2, rng)});
  check_grads(
      [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::relu(v[0]));
      },
      {randn(4, 4, rng)});
  check_grads(
      [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::sigmoid(v[0]));
      },
      {randn(4, 4, rng)});
}

TEST_CASE("gradients: softmax, linear, layernorm") {
  auto rng = make_rng(12);
  Mat probe = randn(3, 5, rng);
  check_grads(
      [probe](Tape& t, std::vector<Var>& v) {
        Var s = ops::softmax_rows(v[0]);
        return ops::sum_all(ops::matmul(s, t.leaf(probe.transpose())));
      },
      {randn(3, 5, rng)});
  check_grads(
      [](Tape&, std::vector<Var>& v) {
        return ops::sum_all(ops::sigmoid(ops::linear(v[0], v[1], v[2])));
      },
      {randn(3, 4, rng), randn(4, 2, rng), randn(1, 2, rng)});
  Mat probe2 = randn(6, 3, rng);
  check_grads(
      [probe2](Tape& t, std::vector<Var>& v) {
        Var y = ops::layernorm(v[0], v[1], v[2]);
        return ops::sum_all(y.val().size() ? ops::matmul(y, t.leaf(probe2)) : y);
      },
      {randn(4, 6, rng), randn(1, 6, rng, 0.5), randn(1, 6, rng, 0.5)},
      1e-5);
}

TEST_CASE("gradients: multi-head attention") {
  auto rng = make_rng(13);
  Mat probe = randn(8, 5, rng);
  check_grads(
      [probe](Tape& t, std::vector<Var>& v) {
        Var a = ops::mha_concat(v[0], v[1], v[2], v[3], v[4], v[5], 2);
        return ops::sum_all(ops::matmul(a, t.leaf(probe)));
      },
      {randn(5, 8, rng, 0.5), randn(7, 8, rng, 0.5), randn(7, 8, rng, 0.5),
       randn(8, 8, rng, 0.5), randn(8, 8, rng, 0.5), randn(8, 8, rng, 0.5)},
      1e-5);
}

TEST_CASE("mha captures row-stochastic per-head attention") {
  auto rng = make_rng(14);
  Tape tape;
  Var q = tape.leaf(randn(5, 8, rng));
  Var k = tape.leaf(randn(9, 8, rng));
  Var v = tape.leaf(randn(9, 8, rng));
  Var wq = tape.leaf(randn(8, 8, rng));
  Var wk = tape.leaf(randn(8, 8, rng));
  Var wv = tape.leaf(randn(8, 8, rng));
  std::vector<Mat> attn;
  ops::mha_concat(q, k, v, wq, wk, wv, 4, &attn);
  REQUIRE(attn.size() == 4);
  for (const Mat& a : attn) {
    CHECK(a.rows() == 5);
    CHECK(a.cols() == 9);
    for (int r = 0; r < a.rows(); ++r) {
      CHECK(a.row(r).sum() == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(a.row(r).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("gradients: conv2d") {
  auto rng = make_rng(15);
  const int c_in = 2, h = 5, w = 6, c_out = 3;
  Mat probe = randn(3 * 3, 1, rng);
  check_grads(
      [=](Tape& t, std::vector<Var>& v) {
        Var y = ops::conv2d(v[0], v[1], v[2], c_in, h, w, 3, 3, 2, 1);
        REQUIRE(y.val().rows() == c_out);
        REQUIRE(y.val().cols() == 3 * 3);
        return ops::sum_all(ops::relu(y));
      },
      {randn(c_in, h * w, rng), randn(c_out, c_in * 9, rng, 0.4),
       randn(c_out, 1, rng)});
}

TEST_CASE("conv output sizes follow ceil division") {
  CHECK(conv_out(128, 4) == 32);
  CHECK(conv_out(100, 4) == 25);
  CHECK(conv_out(25, 2) == 13);
  CHECK(conv_out(13, 2) == 7);
  CHECK(conv_out(7, 2) == 4);
  CHECK(conv_out(33, 32) == 2);
}

TEST_CASE("gradients: loss reduction nodes") {
  auto rng = make_rng(16);
  SUBCASE("neg_log_picked") {
    Mat p(3, 4);
    p << 0.2, 0.3, 0.4, 0.1, 0.25, 0.25, 0.25, 0.25, 0.05, 0.05, 0.8, 0.1;
    check_grads(
        [](Tape&, std::vector<Var>& v) {
          return ops::neg_log_picked(v[0], {{0, 2, 1.0}, {1, 0, 2.0}, {2, 3, 0.5}});
        },
        {p});
  }
  SUBCASE("l1_rows") {
    check_grads(
        [](Tape&, std::vector<Var>& v) {
          Mat tgt(2, 4);
          tgt << 0.3, 0.3, 0.2, 0.2, 0.6, 0.6, 0.1, 0.4;
          return ops::l1_rows(v[0], tgt, {1.0, 2.5});
        },
        {randn(2, 4, rng, 0.3)});
  }
  SUBCASE("giou_loss_rows") {
    Mat pred(3, 4);
    pred << 0.45, 0.5, 0.3, 0.3,   // overlapping
        0.2, 0.2, 0.15, 0.15,      // disjoint from its target
        0.51, 0.49, 0.41, 0.43;    // near-identical, tie-free coordinates
    Mat tgt(3, 4);
    tgt << 0.5, 0.52, 0.32, 0.28, 0.8, 0.8, 0.2, 0.2, 0.5, 0.5, 0.4, 0.4;
    check_grads(
        [tgt](Tape&, std::vector<Var>& v) {
          return ops::giou_loss_rows(v[0], tgt, {1.0, 1.0, 2.0});
        },
        {pred}, 1e-5);
  }
  SUBCASE("weighted_sum and gather_rows") {
    check_grads(
        [](Tape&, std::vector<Var>& v) {
          Var a = ops::sum_all(ops::gather_rows(v[0], {2, 0, 2}));
          Var b = ops::sum_all(v[1]);
          return ops::weighted_sum({a, b}, {1.2, -0.7});
        },
        {randn(4, 3, rng), randn(2, 2, rng)});
  }
}

TEST_CASE("dropout scales kept entries and zeroes dropped ones") {
  auto rng = make_rng(17);
  Tape tape;
  Var x = tape.leaf(Mat::Ones(40, 50));
  Var y = ops::dropout(x, 0.25, rng, true);
  int kept = 0;
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 50; ++c) {
      const double v = y.val()(r, c);
      CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
      kept += v != 0.0;
    }
  CHECK(kept > 1200);
  CHECK(kept < 1800);
  Var z = ops::dropout(x, 0.25, rng, false);
  CHECK(z.val() == x.val());
}

TEST_CASE("adam with clipping reduces loss on a quadratic") {
  ParamStore store;
  Param* p = store.add("w", Mat::Constant(3, 3, 2.0));
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.clip_norm = 0.1;
  double first = -1.0;
  double last = -1.0;
  for (int t = 1; t <= 200; ++t) {
    store.zero_grad();
    Tape tape;
    Var w = tape.param(*p);
    Var loss = ops::sum_all(ops::matmul(w, w));  // sum over (w w)_ij, min at 0
    if (t == 1) first = loss.val()(0, 0);
    last = loss.val()(0, 0);
    tape.backward(loss);
    adam_step(store, cfg, t);
  }
  CHECK(last < first * 0.05);
}

TEST_CASE("param gradients accumulate across backward calls") {
  ParamStore store;
  Param* p = store.add("w", Mat::Ones(2, 2));
  for (int i = 0; i < 3; ++i) {
    Tape tape;
    Var w = tape.param(*p);
    tape.backward(ops::sum_all(w), 0.5);
  }
  CHECK(p->grad == Mat::Constant(2, 2, 1.5));
}
