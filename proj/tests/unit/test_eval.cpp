#include <doctest.h>

#include <algorithm>
#include <random>

#include "../oracle.hpp"
#include "amrkit/eval.hpp"

using namespace amrkit;

namespace {

// Dense and sparse inputs of one scalar each; class = sign of x_s.
LinearSoftmaxModel sign_model() {
  return LinearSoftmaxModel(Tensor({1, 2}), Tensor({1, 2}, {-1.0, 1.0}), Tensor({1, 2}));
}

Dataset scalar_set(const std::vector<double>& xs, const std::vector<int>& labels) {
  Dataset d{{1}, {1}, 2, {}};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.samples.push_back({Tensor({1}, {0.5}), Tensor({1}, {xs[i]}), labels[i]});
  }
  return d;
}

Dataset random_set(std::size_t n, std::mt19937_64& g) {
  Dataset d{{6}, {4}, 3, {}};
  const auto y = oracle::random_labels(n, 3, g);
  for (std::size_t i = 0; i < n; ++i) {
    d.samples.push_back({oracle::random_tensor({6}, g, 0.0, 1.0), oracle::random_tensor({4}, g), y[i]});
  }
  return d;
}

}  // namespace

TEST_CASE("accuracy: all correct 100, three of four 75, ties go to the lowest class") {
  const auto m = sign_model();
  CHECK(accuracy(m, scalar_set({-1, 2, -3, 4}, {0, 1, 0, 1})) == 100.0);
  CHECK(accuracy(m, scalar_set({-1, 2, -3, 4}, {0, 1, 0, 0})) == 75.0);
  CHECK(accuracy(m, scalar_set({0.0}, {0})) == 100.0);
  CHECK_THROWS_AS(accuracy(m, Dataset{{1}, {1}, 2, {}}), std::invalid_argument);
}

TEST_CASE("a zero-budget attack reproduces clean accuracy exactly; report accuracies all equal") {
  std::mt19937_64 g(1);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 4);
  const Dataset d = random_set(40, g);
  const AttackConfig zero = AttackConfig::pgd(0.0, 0.0, 2.0 / 255.0, 5, true, ModalityMask::Both);
  const double clean = accuracy(model, d);
  CHECK(accuracy(model, d, zero) == clean);
  const EvalReport r = evaluate(model, d, zero, "m");
  CHECK(r.acc_clean == clean);
  CHECK(r.acc_r == clean);
  CHECK(r.acc_s == clean);
  CHECK(r.acc_rs == clean);
}

TEST_CASE("avg and ri examples") {
  CHECK(avg_metric(68.54, 80.40, 66.52) == doctest::Approx(71.82).epsilon(1e-4));
  CHECK(avg_metric(0, 0, 0) == 0.0);
  CHECK(std::abs(avg_metric(6.39, 25.18, 1.66) - 11.08) <= 0.005);
  CHECK(std::abs(ri_metric(81.65, 71.82, 88.09, 4.69) - 60.69) <= 0.01);
  CHECK(std::abs(ri_metric(43.89, 36.56, 62.37, 2.38) - 15.70) <= 0.01);
  CHECK(ri_metric(50, 20, 50, 20) == 0.0);
}

TEST_CASE("set_ri against itself is zero and uses clean + avg") {
  EvalReport a;
  a.acc_clean = 80;
  a.avg = 30;
  EvalReport b;
  b.acc_clean = 90;
  b.avg = 5;
  set_ri(a, a);
  CHECK(*a.ri == 0.0);
  set_ri(a, b);
  CHECK(*a.ri == doctest::Approx(15.0));
}

TEST_CASE("report JSON round-trips losslessly, with and without RI") {
  EvalReport r;
  r.acc_clean = 97.123456789012345;
  r.acc_r = 1.0 / 3.0;
  r.acc_s = 55.5;
  r.acc_rs = 0.1;
  r.avg = avg_metric(r.acc_r, r.acc_s, r.acc_rs);
  r.attack = AttackConfig::cw(8.0 / 255.0, 4.0 / 255.0, 2.0 / 255.0, 30, false, ModalityMask::SparseOnly);
  r.model = "runs/x/checkpoint";
  CHECK(report_from_json(report_to_json(r)) == r);
  r.ri = -12.345678901234;
  CHECK(report_from_json(nlohmann::json::parse(report_to_json(r).dump())) == r);
  CHECK(attack_from_json(attack_to_json(r.attack)) == r.attack);
}

TEST_CASE("CSV rows use two decimals; RI column empty when absent") {
  EvalReport r;
  r.acc_clean = 97.126;
  r.avg = 3.0;
  r.model = "m";
  const std::string row = report_csv_row(r);
  CHECK(row.find("97.13") != std::string::npos);
  CHECK(row.back() == '\n');
  CHECK(row[row.size() - 2] == ',');
  CHECK(report_csv_header() == "model,attack,clean,xR,xS,xRS,Avg,RI\n");
}

TEST_CASE("accuracy is invariant under dataset permutation") {
  std::mt19937_64 g(2);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 6);
  Dataset d = random_set(30, g);
  const AttackConfig atk = AttackConfig::pgd(8.0 / 255.0, 8.0 / 255.0, 2.0 / 255.0, 5, false, ModalityMask::Both);
  EvalOptions small;
  small.batch_size = 7;
  const double clean = accuracy(model, d, std::nullopt, small);
  const double robust = accuracy(model, d, atk, small);
  std::shuffle(d.samples.begin(), d.samples.end(), g);
  CHECK(accuracy(model, d, std::nullopt, small) == clean);
  CHECK(accuracy(model, d, atk, small) == robust);
}

TEST_CASE("robustness curve: one point per budget, first equals clean, no point above it") {
  std::mt19937_64 g(3);
  const auto model = LinearSoftmaxModel::random(6, 4, 3, 7);
  const Dataset d = random_set(40, g);
  const AttackConfig base = AttackConfig::pgd(0, 0, 1.0 / 255.0, 10, false, ModalityMask::Both);
  const std::vector<double> eps{0.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0};
  const auto curve = robustness_curve(model, d, AttackMethod::Pgd, ModalityMask::Both, eps, base);
  REQUIRE(curve.size() == eps.size());
  CHECK(curve[0].accuracy == accuracy(model, d));
  for (const auto& p : curve) CHECK(p.accuracy <= curve[0].accuracy);
  const auto single = robustness_curve(model, d, AttackMethod::Fgsm, ModalityMask::Both, {0.0}, base);
  REQUIRE(single.size() == 1);
  CHECK(single[0].accuracy == accuracy(model, d));
  CHECK(curve_csv(single).rfind("eps", 0) == 0);
}
