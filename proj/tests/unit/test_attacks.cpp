#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracle.hpp"
#include "amrkit/attacks.hpp"

using namespace amrkit;

namespace {

// Two classes, one dense and one sparse scalar feature. Raising either input
// favours class 1 by the given slopes.
LinearSoftmaxModel scalar_model(double slope_r, double slope_s) {
  return LinearSoftmaxModel(Tensor({1, 2}, {-slope_r, slope_r}), Tensor({1, 2}, {-slope_s, slope_s}),
                            Tensor({1, 2}));
}

AttackConfig pgd_cfg(double eps, double alpha, int steps, ModalityMask mask = ModalityMask::Both) {
  return AttackConfig::pgd(eps, eps, alpha, steps, false, mask);
}

}  // namespace

TEST_CASE("margin objective: max over wrong classes minus the true logit") {
  const Tensor z({2, 3}, {1, 3, 2, 0.5, -1, 0.25});
  const std::vector<int> y{0, 2};
  const auto m = class_margin_per_sample(z, y);
  CHECK(m[0] == doctest::Approx(2.0));
  CHECK(m[1] == doctest::Approx(0.25));
  Tape tape(false);
  CHECK(attack_loss(tape.constant(z), y, AttackMethod::Cw).item() == doctest::Approx(1.125));
}

TEST_CASE("cross-entropy objective at uniform logits is ln N") {
  Tape tape(false);
  const std::vector<int> y{1, 3};
  CHECK(attack_loss(tape.constant(Tensor({2, 4})), y, AttackMethod::Pgd).item() ==
        doctest::Approx(std::log(4.0)));
}

TEST_CASE("zero budget returns the natural inputs") {
  std::mt19937_64 g(1);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 2);
  const Tensor xr = oracle::random_tensor({5, 6}, g, 0.0, 1.0);
  const Tensor xs = oracle::random_tensor({5, 4}, g);
  const auto y = oracle::random_labels(5, 3, g);
  Rng rng(0);
  for (AttackMethod m : {AttackMethod::Pgd, AttackMethod::Cw}) {
    AttackConfig c = pgd_cfg(0.0, 2.0 / 255.0, 5);
    c.method = m;
    c.random_start = true;
    const auto adv = pgd_multimodal(model, xr, xs, y, c, rng);
    CHECK(adv.x_r == xr);
    CHECK(adv.x_s == xs);
  }
  const auto f = fgsm(model, xr, xs, y, AttackConfig::fgsm(0.0, 0.0, ModalityMask::Both));
  CHECK(f.x_r == xr);
  CHECK(f.x_s == xs);
}

TEST_CASE("a steady gradient walks to the ball boundary: 0.5 with eps 0.1 ends at 0.6") {
  const auto model = scalar_model(1.0, 1.0);
  const std::vector<int> y{0};
  Rng rng(0);
  const auto adv = pgd_multimodal(model, Tensor({1, 1}, {0.5}), Tensor({1, 1}, {0.5}), y,
                                  pgd_cfg(0.1, 0.04, 10), rng);
  CHECK(adv.x_r[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(adv.x_s[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(adv.delta_r[0] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("dense values are clamped to [0,1] after projection; sparse values are not") {
  const auto model = scalar_model(1.0, 1.0);
  const std::vector<int> y{0};
  Rng rng(0);
  const auto adv = pgd_multimodal(model, Tensor({1, 1}, {0.95}), Tensor({1, 1}, {0.95}), y,
                                  pgd_cfg(0.1, 0.04, 10), rng);
  CHECK(adv.x_r[0] == 1.0);
  CHECK(adv.x_s[0] == doctest::Approx(1.05).epsilon(1e-15));
}

TEST_CASE("fgsm: one signed step of size eps; a zero gradient leaves the entry unchanged") {
  // slope 0 on the sparse input: its gradient is exactly zero
  const auto model = scalar_model(-2.0, 0.0);
  const std::vector<int> y{0};
  const auto adv = fgsm(model, Tensor({1, 1}, {0.5}), Tensor({1, 1}, {0.3}), y,
                        AttackConfig::fgsm(8.0 / 255.0, 8.0 / 255.0, ModalityMask::Both));
  CHECK(adv.x_r[0] == doctest::Approx(0.5 - 8.0 / 255.0).epsilon(1e-15));
  CHECK(adv.x_s[0] == 0.3);
}

TEST_CASE("fgsm is bitwise one-step PGD with alpha = eps and no random start") {
  std::mt19937_64 g(2);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 5);
  const Tensor xr = oracle::random_tensor({4, 6}, g, 0.0, 1.0);
  const Tensor xs = oracle::random_tensor({4, 4}, g);
  const auto y = oracle::random_labels(4, 3, g);
  const double eps = 8.0 / 255.0;
  const auto f = fgsm(model, xr, xs, y, AttackConfig::fgsm(eps, eps, ModalityMask::Both));
  Rng rng(9);
  const auto p = pgd_multimodal(model, xr, xs, y, pgd_cfg(eps, eps, 1), rng);
  CHECK(f.x_r == p.x_r);
  CHECK(f.x_s == p.x_s);
}

TEST_CASE("masks: the unattacked modality is bitwise untouched") {
  std::mt19937_64 g(3);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 7);
  const Tensor xr = oracle::random_tensor({4, 6}, g, 0.0, 1.0);
  const Tensor xs = oracle::random_tensor({4, 4}, g);
  const auto y = oracle::random_labels(4, 3, g);
  Rng rng(0);
  AttackConfig c = pgd_cfg(8.0 / 255.0, 2.0 / 255.0, 5, ModalityMask::DenseOnly);
  c.random_start = true;
  auto a = pgd_multimodal(model, xr, xs, y, c, rng);
  CHECK(a.x_s == xs);
  CHECK(max_abs(a.delta_r.data()) > 0.0);
  c.mask = ModalityMask::SparseOnly;
  a = pgd_multimodal(model, xr, xs, y, c, rng);
  CHECK(a.x_r == xr);
  CHECK(max_abs(a.delta_s.data()) > 0.0);
}

TEST_CASE("random start stays inside ball and range, and repeats under a fixed seed") {
  std::mt19937_64 g(4);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 8);
  const Tensor xr = oracle::random_tensor({8, 6}, g, 0.0, 1.0);
  const Tensor xs = oracle::random_tensor({8, 4}, g);
  const auto y = oracle::random_labels(8, 3, g);
  AttackConfig c = pgd_cfg(8.0 / 255.0, 2.0 / 255.0, 3);
  c.random_start = true;
  Rng r1(42), r2(42);
  const auto a = pgd_multimodal(model, xr, xs, y, c, r1);
  const auto b = pgd_multimodal(model, xr, xs, y, c, r2);
  CHECK(a.x_r == b.x_r);
  CHECK(a.x_s == b.x_s);
  CHECK(max_abs(a.delta_r.data()) <= c.eps_r + 1e-12);
  CHECK(max_abs(a.delta_s.data()) <= c.eps_s + 1e-12);
  for (double v : a.x_r.storage()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("observer fires once per step and the attack does not lower a linear model's loss") {
  std::mt19937_64 g(5);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 9);
  const Tensor xr = oracle::random_tensor({8, 6}, g, 0.2, 0.8);
  const Tensor xs = oracle::random_tensor({8, 4}, g);
  const auto y = oracle::random_labels(8, 3, g);
  int calls = 0;
  Rng rng(0);
  const auto adv = pgd_multimodal(model, xr, xs, y, pgd_cfg(8.0 / 255.0, 2.0 / 255.0, 7), rng,
                                  [&](int step, const Tensor&, const Tensor&) { CHECK(step == ++calls); });
  CHECK(calls == 7);
  Tape t1(false), t2(false);
  CHECK(attack_loss(t2, model, adv.x_r, adv.x_s, y, AttackMethod::Pgd).item() >=
        attack_loss(t1, model, xr, xs, y, AttackMethod::Pgd).item());
}

TEST_CASE("invalid settings and out-of-range inputs are rejected") {
  AttackConfig c = pgd_cfg(-0.1, 0.01, 3);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = pgd_cfg(0.1, 0.01, 0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig::fgsm(0.1, 0.1, ModalityMask::Both);
  c.alpha = 0.05;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_method("bim"), std::invalid_argument);
  CHECK_THROWS_AS(parse_modality_mask("x"), std::invalid_argument);

  const auto model = scalar_model(1.0, 1.0);
  const std::vector<int> y{0};
  Rng rng(0);
  CHECK_THROWS_AS(pgd_multimodal(model, Tensor({1, 1}, {1.5}), Tensor({1, 1}), y, pgd_cfg(0.1, 0.01, 2), rng),
                  std::invalid_argument);
}

TEST_CASE("names round-trip") {
  for (AttackMethod m : {AttackMethod::Fgsm, AttackMethod::Pgd, AttackMethod::Cw})
    CHECK(parse_attack_method(to_string(m)) == m);
  for (ModalityMask m : {ModalityMask::DenseOnly, ModalityMask::SparseOnly, ModalityMask::Both})
    CHECK(parse_modality_mask(to_string(m)) == m);
}
