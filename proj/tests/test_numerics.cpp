#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mbrl/adam.hpp"
#include "mbrl/mlp.hpp"
#include "mbrl/rng.hpp"
#include "mbrl/tape.hpp"
#include "mbrl/twohot.hpp"
#include "oracles.hpp"

using namespace mbrl;

TEST_CASE("mlp forward: all-zero parameters give a zero vector") {
  Rng rng(0);
  Mlp net = Mlp::make(3, {4}, 2, Activation::tanh, OutputKind::value, rng);
  for (Mat* p : net.params()) p->setZero();
  Vec ones = Vec::Ones(3);
  Vec out = net.forward(ones);
  CHECK(out.isZero(0.0));
}

TEST_CASE("mlp forward: identity single layer passes input through") {
  Rng rng(0);
  Mlp net = Mlp::make(2, {}, 2, Activation::tanh, OutputKind::value, rng);
  net.weights[0] = Mat::Identity(2, 2);
  net.biases[0].setZero();
  Vec in(2);
  in << 1.0, 2.0;
  Vec out = net.forward(in);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(2.0));
}

TEST_CASE("mlp forward matches the scalar reference pass") {
  for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
    Rng rng(seed);
    Mlp net = Mlp::make(1, {5}, 3, Activation::tanh, OutputKind::value, rng);
    Vec in(1);
    in << 0.5;
    Vec got = net.forward(in);
    auto want = oracle::scalar_mlp_forward(net, {0.5});
    for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("mlp forward rejects dimension mismatch") {
  Rng rng(0);
  Mlp net = Mlp::make(3, {4}, 2, Activation::tanh, OutputKind::value, rng);
  Vec bad_input = Vec::Ones(5);
  CHECK_THROWS_AS(net.forward(bad_input), std::invalid_argument);
}

TEST_CASE("backward: linear loss gives all-ones gradients") {
  Rng rng(3);
  Mlp net = Mlp::make(2, {3}, 2, Activation::tanh, OutputKind::value, rng);
  Tape tape;
  MlpOnTape t = put_on_tape(tape, net, true);
  Var loss;
  bool first = true;
  for (std::size_t i = 0; i < t.weights.size(); ++i) {
    Var s = tape.add(tape.sum(t.weights[i]), tape.sum(t.biases[i]));
    loss = first ? s : tape.add(loss, s);
    first = false;
  }
  tape.backward(loss);
  std::vector<Mat> grads;
  t.collect_grads(tape, grads);
  for (const Mat& g : grads) CHECK((g.array() == 1.0).all());
}

TEST_CASE("backward: constant loss gives zero gradients") {
  Rng rng(3);
  Mlp net = Mlp::make(2, {3}, 1, Activation::tanh, OutputKind::value, rng);
  Tape tape;
  MlpOnTape t = put_on_tape(tape, net, true);
  Var loss = tape.constant(Mat::Zero(1, 1));
  tape.backward(loss);
  std::vector<Mat> grads;
  t.collect_grads(tape, grads);
  for (const Mat& g : grads) CHECK(g.isZero(0.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape tape;
  Var v = tape.leaf(Mat::Ones(2, 2), true);
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
}

static double mlp_scalar_loss(const Mlp& net, const Mat& input) {
  // Deterministic composite touching tanh/elu, square and sum.
  Tape tape;
  MlpOnTape t = put_on_tape(tape, net, true);
  Var out = t.forward(tape, tape.constant(input));
  return tape.value(tape.sum(tape.square(out)))(0, 0);
}

TEST_CASE("backward matches central finite differences on random nets") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    Activation act = seed % 2 == 0 ? Activation::tanh : Activation::elu;
    Mlp net = Mlp::make(3, {4, 4}, 2, act, OutputKind::value, rng);
    Mat input = rng.normal_mat(3, 2);

    Tape tape;
    MlpOnTape t = put_on_tape(tape, net, true);
    Var loss = tape.sum(tape.square(t.forward(tape, tape.constant(input))));
    tape.backward(loss);
    std::vector<Mat> analytic;
    t.collect_grads(tape, analytic);

    auto fd = oracle::finite_diff(net.params(),
                                  [&net, &input] { return mlp_scalar_loss(net, input); });
    CHECK(oracle::max_grad_rel_err(analytic, fd) < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("tape special ops match finite differences") {
  // clamp, exp, cwise_min, log_one_minus_square, twohot_decode_cols,
  // cross_entropy_cols composed behind a tiny net.
  TwoHotSpec spec{9, -4.0, 4.0};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    Mlp net = Mlp::make(2, {4}, 9, Activation::tanh, OutputKind::logits, rng);
    Mat input = rng.normal_mat(2, 3);
    Mat targets = twohot_encode_cols(RowVec::Constant(3, 0.7), spec);

    auto eval = [&]() {
      Tape tape;
      MlpOnTape t = put_on_tape(tape, net, true);
      Var logits = t.forward(tape, tape.constant(input));
      Var ce = tape.cross_entropy_cols(logits, targets);
      Var dec = tape.twohot_decode_cols(logits, spec);
      Var squash = tape.tanh(tape.clamp(dec, -2.5, 2.5));
      Var extra = tape.log_one_minus_square(tape.scale(squash, 0.9));
      Var mixed = tape.cwise_min(ce, tape.exp(extra));
      return tape.sum(mixed);
    };

    Tape tape;
    MlpOnTape t = put_on_tape(tape, net, true);
    Var logits = t.forward(tape, tape.constant(input));
    Var ce = tape.cross_entropy_cols(logits, targets);
    Var dec = tape.twohot_decode_cols(logits, spec);
    Var squash = tape.tanh(tape.clamp(dec, -2.5, 2.5));
    Var extra = tape.log_one_minus_square(tape.scale(squash, 0.9));
    Var mixed = tape.cwise_min(ce, tape.exp(extra));
    Var loss = tape.sum(mixed);
    tape.backward(loss);
    std::vector<Mat> analytic;
    t.collect_grads(tape, analytic);

    auto fd = oracle::finite_diff(net.params(), [&] {
      Tape t2;
      MlpOnTape tt = put_on_tape(t2, net, true);
      Var lg = tt.forward(t2, t2.constant(input));
      Var c2 = t2.cross_entropy_cols(lg, targets);
      Var d2 = t2.twohot_decode_cols(lg, spec);
      Var s2 = t2.tanh(t2.clamp(d2, -2.5, 2.5));
      Var e2 = t2.log_one_minus_square(t2.scale(s2, 0.9));
      return t2.value(t2.sum(t2.cwise_min(c2, t2.exp(e2))))(0, 0);
    });
    CHECK(oracle::max_grad_rel_err(analytic, fd) < 1e-4);
  }
}

TEST_CASE("frozen leaves receive no gradient") {
  Rng rng(5);
  Mlp net = Mlp::make(2, {3}, 2, Activation::tanh, OutputKind::value, rng);
  Tape tape;
  MlpOnTape frozen = put_on_tape(tape, net, false);
  Var x = tape.leaf(Mat::Ones(2, 1), true);
  Var loss = tape.sum(tape.square(frozen.forward(tape, x)));
  tape.backward(loss);
  std::vector<Mat> grads;
  frozen.collect_grads(tape, grads);
  for (const Mat& g : grads) CHECK(g.isZero(0.0));
  CHECK(!tape.grad(x).isZero(0.0));  // gradient still reaches the input
}

TEST_CASE("adam: zero gradient leaves fresh parameters unchanged") {
  Mat p = Mat::Constant(2, 2, 1.5);
  std::vector<Mat*> params{&p};
  AdamState st = AdamState::like(params, 1e-3);
  adam_step(params, {Mat::Zero(2, 2)}, st);
  CHECK((p.array() == 1.5).all());
  CHECK(st.m[0].isZero(0.0));
  CHECK(st.step == 1);
}

TEST_CASE("adam: zero gradient decays existing moments") {
  Mat p = Mat::Constant(2, 2, 1.5);
  std::vector<Mat*> params{&p};
  AdamState st = AdamState::like(params, 1e-3);
  st.m[0].setConstant(0.5);
  st.v[0].setConstant(0.25);
  adam_step(params, {Mat::Zero(2, 2)}, st);
  CHECK(st.m[0](0, 0) == doctest::Approx(0.45));
  CHECK(st.v[0](0, 0) == doctest::Approx(0.25 * 0.999));
}

TEST_CASE("adam: first scalar step moves by about lr") {
  Mat p = Mat::Constant(1, 1, 3.0);
  std::vector<Mat*> params{&p};
  AdamState st = AdamState::like(params, 1e-3);
  adam_step(params, {Mat::Constant(1, 1, 2.0)}, st);
  CHECK(p(0, 0) == doctest::Approx(3.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam: identical parameters with identical gradients stay identical") {
  Mat a = Mat::Constant(3, 1, 0.7), b = Mat::Constant(3, 1, 0.7);
  std::vector<Mat*> params{&a, &b};
  AdamState st = AdamState::like(params, 1e-3);
  Mat g = Mat::Constant(3, 1, -0.3);
  for (int i = 0; i < 5; ++i) adam_step(params, {g, g}, st);
  CHECK(a == b);
}

TEST_CASE("adam rejects shape mismatches") {
  Mat p = Mat::Zero(2, 2);
  std::vector<Mat*> params{&p};
  AdamState st = AdamState::like(params, 1e-3);
  CHECK_THROWS_AS(adam_step(params, {Mat::Zero(3, 1)}, st), std::invalid_argument);
}

TEST_CASE("symlog basics and inverse") {
  CHECK(symlog(0.0) == 0.0);
  CHECK(symlog(std::exp(1.0) - 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : {-100.0, -1.0, 0.5, 3.0, 1e4}) {
    CHECK(std::abs(symexp(symlog(x)) - x) < 1e-9 * std::max(1.0, std::abs(x)));
  }
  CHECK(symlog(-2.0) == -symlog(2.0));
}

TEST_CASE("twohot encode: bin center, midpoint, clamp") {
  TwoHotSpec spec;  // 65 bins over [-10, 10]
  double center_20 = spec.center(20);
  Vec p = twohot_encode(symexp(center_20), spec);
  CHECK(p[20] == doctest::Approx(1.0));
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK((p.array() > 0.0).count() <= 2);

  double mid = 0.5 * (spec.center(20) + spec.center(21));
  Vec q = twohot_encode(symexp(mid), spec);
  CHECK(q[20] == doctest::Approx(0.5));
  CHECK(q[21] == doctest::Approx(0.5));

  Vec top = twohot_encode(1e30, spec);
  CHECK(top[spec.num_bins - 1] == doctest::Approx(1.0));
}

TEST_CASE("twohot decode: center one-hot, round trip, uniform symmetry") {
  TwoHotSpec spec;
  Vec onehot = Vec::Zero(spec.num_bins);
  onehot[32] = 1.0;  // center bin, symlog value 0
  CHECK(twohot_decode(onehot, spec) == doctest::Approx(0.0));

  for (double v : {-1000.0, -3.7, -0.2, 0.0, 0.5, 12.0, 999.0, 1000.0}) {
    double rt = twohot_decode(twohot_encode(v, spec), spec);
    CHECK(std::abs(rt - v) < 1e-6);
  }

  Vec uniform = Vec::Constant(spec.num_bins, 1.0 / spec.num_bins);
  CHECK(twohot_decode(uniform, spec) == doctest::Approx(0.0).epsilon(1e-12));

  Vec bad = uniform;
  bad[0] = -0.1;
  CHECK_THROWS_AS(twohot_decode(bad, spec), std::invalid_argument);
}

TEST_CASE("ce loss: entropy floor, uniform logits, fd gradient") {
  TwoHotSpec spec;
  double target = 2.5;
  Vec probs = twohot_encode(target, spec);
  Vec logits(spec.num_bins);
  for (int i = 0; i < spec.num_bins; ++i)
    logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : -30.0;
  double entropy = 0.0;
  for (int i = 0; i < spec.num_bins; ++i)
    if (probs[i] > 0.0) entropy -= probs[i] * std::log(probs[i]);
  CHECK(ce_twohot_loss(logits, target, spec) == doctest::Approx(entropy).epsilon(1e-3));

  Vec uniform_logits = Vec::Zero(spec.num_bins);
  CHECK(ce_twohot_loss(uniform_logits, target, spec) ==
        doctest::Approx(std::log(65.0)).epsilon(1e-12));

  // gradient vs finite differences
  Rng rng(11);
  Vec l = rng.normal_vec(spec.num_bins);
  Vec grad;
  ce_twohot_loss(l, target, spec, &grad);
  for (int i = 0; i < spec.num_bins; ++i) {
    double h = 1e-5, saved = l[i];
    l[i] = saved + h;
    double up = ce_twohot_loss(l, target, spec);
    l[i] = saved - h;
    double down = ce_twohot_loss(l, target, spec);
    l[i] = saved;
    CHECK(oracle::rel_err(grad[i], (up - down) / (2 * h)) < 1e-4);
  }
  CHECK_THROWS_AS(ce_twohot_loss(Vec::Zero(3), 0.0, spec), std::invalid_argument);
}

TEST_CASE("softmax columns sum to one; ce is at least the target entropy") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    TwoHotSpec spec{33, -8.0, 8.0};
    Vec logits = rng.normal_vec(spec.num_bins) * 3.0;
    Mat soft = softmax_cols(Mat(logits));
    CHECK(std::abs(soft.col(0).sum() - 1.0) < 1e-12);

    double target = rng.uniform(-50.0, 50.0);
    Vec probs = twohot_encode(target, spec);
    double entropy = 0.0;
    for (int i = 0; i < spec.num_bins; ++i)
      if (probs[i] > 0.0) entropy -= probs[i] * std::log(probs[i]);
    CHECK(ce_twohot_loss(logits, target, spec) >= entropy - 1e-9);
  }
}

TEST_CASE("numerics are deterministic: same inputs, identical bits") {
  Rng rng(23);
  Mlp net = Mlp::make(4, {8, 8}, 4, Activation::tanh, OutputKind::value, rng);
  Mat input = rng.normal_mat(4, 5);
  Mat a = net.forward(input);
  Mat b = net.forward(input);
  CHECK(a == b);

  Rng r1(99), r2(99);
  for (int i = 0; i < 100; ++i) CHECK(r1.normal() == r2.normal());
}

TEST_CASE("twohot spec validation") {
  TwoHotSpec too_few{1, -1.0, 1.0};
  TwoHotSpec inverted{5, 2.0, -2.0};
  CHECK_THROWS_AS(too_few.validate(), std::invalid_argument);
  CHECK_THROWS_AS(inverted.validate(), std::invalid_argument);
}
