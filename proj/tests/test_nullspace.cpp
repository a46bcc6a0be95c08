#include <doctest.h>

#include "fdi/nullspace.hpp"
#include "fdi/plant.hpp"
#include "support.hpp"

using namespace fdi;
using fdi::test::first_order;
using fdi::test::random_stable;

namespace {

const FrequencyGrid& check_grid() {
  static const FrequencyGrid g = FrequencyGrid::standard().with_random_points(10, 99);
  return g;
}

double grid_max(const StateSpaceModel& g) {
  double m = 0.0;
  ResponseEvaluator e(g);
  for (double w : check_grid().points()) m = std::max(m, e.at_frequency(w).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("scalar plant without extras") {
  auto g = first_order(1.0);
  auto basis = left_nullspace(g, StateSpaceModel::zero(1, 0));
  CHECK(basis.rows() == 1);
  CHECK(basis.filter.inputs() == 2);
  CHECK(is_stable(basis.filter));
  for (Complex s : {Complex(0, 0.5), Complex(0, 20)}) {
    const CMatrix q = evaluate(basis.filter, s);
    // Spans [1, -1/(s+1)]: ratio of the two entries is fixed.
    CHECK(std::abs(q(0, 1) / q(0, 0) + 1.0 / (s + 1.0)) < 1e-10);
  }
}

TEST_CASE("identical outputs give two rows") {
  auto g = first_order(2.0);
  auto basis = left_nullspace(col_concat(g, g), StateSpaceModel::zero(2, 0));
  CHECK(basis.rows() == 2);
  CHECK(annihilation_error(basis.filter, col_concat(g, g), 1, {}, check_grid()) < 1e-10);
}

TEST_CASE("sensor column removes the output weight") {
  std::mt19937_64 rng(31);
  auto gu = random_stable(rng, 3, 2, 1);
  Matrix e1 = Matrix::Zero(2, 1);
  e1(0, 0) = 1.0;
  auto basis = left_nullspace(gu, StateSpaceModel::gain(e1));
  CHECK(basis.rows() == 1);
  const std::vector<Index> y1{0};
  CHECK(grid_max(select_inputs(basis.filter, y1)) < 1e-9);
}

TEST_CASE("actuator column removes the input weight") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 5; ++t) {
    auto gu = random_stable(rng, 4, 3, 2, t % 2 == 0);
    const std::vector<Index> col{1};
    auto basis = left_nullspace(gu, select_inputs(gu, col));
    CHECK(basis.rows() == 2);
    const std::vector<Index> u1{3 + 1};
    CHECK(grid_max(select_inputs(basis.filter, u1)) < 1e-9 * (1 + grid_max(basis.filter)));
  }
}

TEST_CASE("row count and annihilation on random plants") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 20; ++t) {
    const Index ny = 2 + t % 3;
    const Index nu = 1 + t % 2;
    const Index nd = t % 3;  // up to 2 dynamic disturbance columns
    if (nd >= ny) continue;
    auto plant = random_stable(rng, 3 + t % 5, ny, nu + nd, t % 2 == 0);
    std::vector<Index> extras = index_range(nu, nd);
    auto basis = left_nullspace(plant, nu, extras);
    CHECK(basis.rows() == ny - nd);
    CHECK(is_stable(basis.filter));
    CHECK(annihilation_error(basis.filter, plant, nu, extras, check_grid()) < 1e-7);
  }
}

TEST_CASE("three dynamic columns") {
  std::mt19937_64 rng(34);
  auto plant = random_stable(rng, 3, 4, 1 + 3);
  std::vector<Index> extras{1, 2, 3};
  auto basis = left_nullspace(plant, 1, extras);
  CHECK(basis.rows() == 1);
  CHECK(annihilation_error(basis.filter, plant, 1, extras, check_grid()) < 1e-7);
}

TEST_CASE("dependent extras reduce the rank once") {
  std::mt19937_64 rng(35);
  auto gu = random_stable(rng, 3, 3, 1);
  auto gd = random_stable(rng, 2, 3, 1);
  auto basis = left_nullspace(gu, row_concat(gd, scaled(gd, 2.0)));
  CHECK(basis.rows() == 2);
}

TEST_CASE("empty nullspace is reported") {
  auto g = first_order(1.0);
  CHECK_THROWS_AS(left_nullspace(g, StateSpaceModel::identity(1)), InfeasibleError);
  std::mt19937_64 rng(36);
  auto g2 = random_stable(rng, 3, 2, 1);
  CHECK_THROWS_AS(left_nullspace(g2, random_stable(rng, 2, 2, 2)), InfeasibleError);
}

TEST_CASE("combining rows") {
  std::mt19937_64 rng(37);
  auto plant = random_stable(rng, 4, 4, 2 + 1);
  std::vector<Index> extras{2};
  auto basis = left_nullspace(plant, 2, extras);
  REQUIRE(basis.rows() == 3);
  auto same = combine_rows(basis, Matrix::Identity(3, 3));
  for (Complex s : fdi::test::random_points(rng, 5)) {
    CHECK(fdi::test::rel_diff(evaluate(same, s), evaluate(basis.filter, s)) < 1e-10);
  }
  Matrix first = Matrix::Zero(1, 3);
  first(0, 0) = 1.0;
  auto row0 = combine_rows(basis, first);
  for (Complex s : fdi::test::random_points(rng, 5)) {
    CHECK(fdi::test::rel_diff(evaluate(row0, s), evaluate(basis.filter, s).topRows(1)) < 1e-10);
  }
  auto w = seeded_weights(3, 5);
  CHECK(std::abs(w.norm() - 1.0) < 1e-14);
  CHECK((w - seeded_weights(3, 5)).norm() == 0.0);
  auto combo = combine_rows(basis, w);
  CHECK(combo.states() == 2 * plant.states());
  CHECK(annihilation_error(combo, plant, 2, extras, check_grid()) < 1e-7);
  CHECK_THROWS_AS(combine_rows(basis, Matrix::Zero(1, 3)), InfeasibleError);
  CHECK_THROWS_AS(combine_rows(basis, Matrix::Ones(1, 2)), DimensionError);
}

TEST_CASE("projected channel equals the filter applied to the column") {
  std::mt19937_64 rng(38);
  auto plant = random_stable(rng, 5, 3, 1 + 1 + 2);
  std::vector<Index> extras{1};
  auto basis = left_nullspace(plant, 1, extras);
  auto w = seeded_weights(basis.rows(), 1);
  auto filter = combine_rows(basis, w);
  std::vector<Index> faults{2, 3};
  auto channel = projected_channel(basis, w, faults);
  auto direct = series(select_inputs(col_concat(plant, StateSpaceModel::zero(1, 4)), faults), filter);
  for (Complex s : fdi::test::random_points(rng, 10)) {
    CHECK(fdi::test::rel_diff(evaluate(channel, s), evaluate(direct, s)) < 1e-9);
  }
}

TEST_CASE("parametrization: any stable weight annihilates") {
  std::mt19937_64 rng(39);
  auto gu = random_stable(rng, 4, 3, 2);
  auto basis = left_nullspace(gu, StateSpaceModel::zero(3, 0));
  auto w = random_stable(rng, 2, 2, 3);
  auto filtered = series(basis.filter, w);
  CHECK(annihilation_error(filtered, gu, 2, {}, check_grid()) < 1e-8);
}
