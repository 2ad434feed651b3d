#include <doctest.h>

#include <random>

#include "../oracle.hpp"
#include "amrkit/amr.hpp"

using namespace amrkit;

TEST_CASE("create: W ones of the feature shape, aux head zeros") {
  const AmrModule m = AmrModule::create({8, 4, 4, 4}, {8, 4, 5}, 4);
  CHECK(m.w_r == Tensor::ones({1, 8, 4, 4, 4}));
  CHECK(m.w_s == Tensor::ones({1, 8, 4, 5}));
  CHECK(m.aux_weight == Tensor::zeros({16, 4}));
  CHECK(m.aux_bias == Tensor::zeros({1, 4}));
  CHECK(m.dense_channels() == 8);
  CHECK(m.sparse_channels() == 8);
  CHECK(m.num_classes() == 4);
}

TEST_CASE("reweight: all-ones W is the identity, 0.5 halves, elementwise product otherwise") {
  std::mt19937_64 g(1);
  AmrModule m = AmrModule::create({2, 2, 2, 2}, {2, 2, 3}, 3);
  const Tensor xr = oracle::random_tensor({3, 2, 2, 2, 2}, g);
  const Tensor xs = oracle::random_tensor({3, 2, 2, 3}, g);
  {
    Tape tape(false);
    const auto out = reweight(bind(tape, m, false), tape.constant(xr), tape.constant(xs));
    CHECK(out.dense.value() == xr);
    CHECK(out.sparse.value() == xs);
  }
  m.w_r.fill(0.5);
  m.w_s.fill(0.5);
  {
    Tape tape(false);
    const auto out = reweight(bind(tape, m, false), tape.constant(xr), tape.constant(xs));
    for (std::size_t i = 0; i < xr.numel(); ++i) CHECK(out.dense.value()[i] == 0.5 * xr[i]);
    for (std::size_t i = 0; i < xs.numel(); ++i) CHECK(out.sparse.value()[i] == 0.5 * xs[i]);
  }
  m.w_r = oracle::random_tensor({1, 2, 2, 2, 2}, g);
  {
    Tape tape(false);
    const auto out = reweight(bind(tape, m, false), tape.constant(xr), tape.constant(xs));
    const std::size_t per = m.w_r.numel();
    for (std::size_t i = 0; i < xr.numel(); ++i) {
      CHECK(out.dense.value()[i] == doctest::Approx(xr[i] * m.w_r[i % per]).epsilon(1e-15));
    }
  }
}

TEST_CASE("global average pool of a constant map is that constant per channel") {
  Tensor x({2, 3, 4, 5});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < 20; ++k) x[(b * 3 + c) * 20 + k] = 10.0 * b + c;
  Tape tape(false);
  const Tensor p = global_average_pool(tape.constant(x)).value();
  REQUIRE(p.shape() == Shape{2, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c) CHECK(p[b * 3 + c] == doctest::Approx(10.0 * b + c));
}

TEST_CASE("pool_and_classify: z_mul is [B, C_R + C_s], dense channels first; zero head gives zero logits") {
  std::mt19937_64 g(2);
  const AmrModule m = AmrModule::create({8, 4, 4, 4}, {8, 4, 5}, 4);
  const Tensor xr = oracle::random_tensor({3, 8, 4, 4, 4}, g);
  const Tensor xs = oracle::random_tensor({3, 8, 4, 5}, g);
  Tape tape(false);
  const auto p = pool_and_classify(bind(tape, m, false), tape.constant(xr), tape.constant(xs));
  REQUIRE(p.z_mul.shape() == Shape{3, 16});
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(p.z_mul.value()[b * 16 + c] == p.z_r.value()[b * 8 + c]);
      CHECK(p.z_mul.value()[b * 16 + 8 + c] == p.z_s.value()[b * 8 + c]);
    }
  CHECK(p.aux_logits.value() == Tensor::zeros({3, 4}));
}

TEST_CASE("aux head logits are the affine map of the pooled vector") {
  std::mt19937_64 g(3);
  AmrModule m = AmrModule::create({2, 1, 2, 2}, {2, 1, 3}, 3);
  m.aux_weight = oracle::random_tensor({4, 3}, g);
  m.aux_bias = oracle::random_tensor({1, 3}, g);
  const Tensor xr = oracle::random_tensor({2, 2, 1, 2, 2}, g);
  const Tensor xs = oracle::random_tensor({2, 2, 1, 3}, g);
  Tape tape(false);
  const auto p = pool_and_classify(bind(tape, m, false), tape.constant(xr), tape.constant(xs));
  Tensor expect = oracle::naive_matmul(p.z_mul.value(), m.aux_weight);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t n = 0; n < 3; ++n) expect[b * 3 + n] += m.aux_bias[n];
  CHECK(max_abs_diff(expect, p.aux_logits.value()) < 1e-14);
}

TEST_CASE("mean weights: ones give 1, {0,1} halves give 0.5, arbitrary entries their mean") {
  AmrModule m = AmrModule::create({2, 1, 1, 2}, {2, 1, 2}, 2);
  CHECK(mean_weights(m).dense == 1.0);
  CHECK(mean_weights(m).sparse == 1.0);
  m.w_r.storage() = {0, 1, 0, 1};
  m.w_s.storage() = {0.1, 0.2, 0.3, 0.6267};
  CHECK(mean_weights(m).dense == doctest::Approx(0.5));
  CHECK(mean_weights(m).sparse == doctest::Approx(0.306675));
  const auto ch = channel_means(m.w_s);
  REQUIRE(ch.size() == 2);
  CHECK(ch[0] == doctest::Approx(0.15));
  CHECK(ch[1] == doctest::Approx(0.46335));
}

TEST_CASE("reweighting is linear in the features and commutes with batch permutation") {
  std::mt19937_64 g(4);
  AmrModule m = AmrModule::create({2, 1, 2, 2}, {2, 1, 3}, 2);
  m.w_r = oracle::random_tensor({1, 2, 1, 2, 2}, g);
  m.w_s = oracle::random_tensor({1, 2, 1, 3}, g);
  const Tensor a = oracle::random_tensor({2, 2, 1, 2, 2}, g);
  const Tensor b = oracle::random_tensor({2, 2, 1, 2, 2}, g);
  const Tensor s = oracle::random_tensor({2, 2, 1, 3}, g);
  Tensor sum = a;
  for (std::size_t i = 0; i < sum.numel(); ++i) sum[i] = 2.0 * a[i] + b[i];
  Tape tape(false);
  const BoundAmr bm = bind(tape, m, false);
  const Tensor ra = reweight(bm, tape.constant(a), tape.constant(s)).dense.value();
  const Tensor rb = reweight(bm, tape.constant(b), tape.constant(s)).dense.value();
  const Tensor rsum = reweight(bm, tape.constant(sum), tape.constant(s)).dense.value();
  for (std::size_t i = 0; i < sum.numel(); ++i) {
    CHECK(rsum[i] == doctest::Approx(2.0 * ra[i] + rb[i]).epsilon(1e-14));
  }
  // swap the two samples
  Tensor swapped = a;
  const std::size_t per = a.numel() / 2;
  for (std::size_t i = 0; i < per; ++i) std::swap(swapped[i], swapped[per + i]);
  const Tensor rs = reweight(bm, tape.constant(swapped), tape.constant(s)).dense.value();
  for (std::size_t i = 0; i < per; ++i) {
    CHECK(rs[i] == ra[per + i]);
    CHECK(rs[per + i] == ra[i]);
  }
}

TEST_CASE("reweight rejects feature shapes that do not match W") {
  const AmrModule m = AmrModule::create({2, 1, 2, 2}, {2, 1, 3}, 2);
  Tape tape(false);
  CHECK_THROWS_AS(reweight(bind(tape, m, false), tape.constant(Tensor({1, 3, 1, 2, 2})),
                           tape.constant(Tensor({1, 2, 1, 3}))),
                  std::invalid_argument);
}
