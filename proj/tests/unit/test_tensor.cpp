#include <doctest.h>

#include <random>
#include <stdexcept>

#include "../oracle.hpp"
#include "amrkit/autodiff.hpp"
#include "amrkit/tensor.hpp"

using namespace amrkit;

TEST_CASE("tensor data length equals the shape product") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(shape_numel({}) == 1);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(t.reshaped({5, 5}), std::invalid_argument);
}

TEST_CASE("matmul of the 2x2 example matches the triple-loop oracle") {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({2, 2}, {5, 6, 7, 8});
  Tape tape(false);
  const Tensor c = ops::matmul(tape.constant(a), tape.constant(b)).value();
  CHECK(c == Tensor({2, 2}, {19, 22, 43, 50}));
  CHECK(c == oracle::naive_matmul(a, b));
}

TEST_CASE("matmul agrees with the oracle on random shapes") {
  std::mt19937_64 g(11);
  for (int i = 0; i < 30; ++i) {
    const std::size_t m = 1 + g() % 5, k = 1 + g() % 5, n = 1 + g() % 5;
    const Tensor a = oracle::random_tensor({m, k}, g), b = oracle::random_tensor({k, n}, g);
    Tape tape(false);
    const Tensor c = ops::matmul(tape.constant(a), tape.constant(b)).value();
    CHECK(max_abs_diff(c, oracle::naive_matmul(a, b)) <= 1e-14);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const Tensor z({3, 3}, {1, 1, 0, 0, 2, 2, 5, 4, 5});
  CHECK(argmax_rows(z) == std::vector<int>{0, 1, 0});
  CHECK_THROWS_AS(argmax_rows(Tensor({3})), std::invalid_argument);
}
