#include <doctest.h>

#include <algorithm>

#include "fdi/lti.hpp"
#include "support.hpp"

using namespace fdi;
using fdi::test::first_order;
using fdi::test::random_stable;

TEST_CASE("evaluate simple systems") {
  StateSpaceModel integrator(Matrix::Zero(1, 1), Matrix::Ones(1, 1),
                             Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  CHECK(std::abs(evaluate(integrator, 2.0)(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(evaluate(StateSpaceModel::gain(Matrix::Constant(1, 1, 3.0)),
                          Complex(0, 17))(0, 0) - 3.0) < 1e-15);
  const Complex v = evaluate(first_order(1.0), Complex(0, 1))(0, 0);
  CHECK(std::abs(v - Complex(0.5, -0.5)) < 1e-15);
  CHECK(std::abs(std::abs(v) - std::sqrt(0.5)) < 1e-15);
  CHECK_THROWS_AS(evaluate(integrator, 0.0), NumericalError);
}

TEST_CASE("evaluator agrees with dense evaluation") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    auto g = random_stable(rng, 7, 3, 2);
    ResponseEvaluator eval(g);
    for (const Complex& s : fdi::test::random_points(rng, 10)) {
      CHECK(fdi::test::rel_diff(eval.at(s), evaluate(g, s)) < 1e-11);
    }
  }
}

TEST_CASE("construction validates dimensions") {
  CHECK_THROWS_AS(StateSpaceModel(Matrix::Zero(2, 3), Matrix::Zero(2, 1),
                                  Matrix::Zero(1, 2), Matrix::Zero(1, 1)),
                  DimensionError);
  CHECK_THROWS_AS(StateSpaceModel(Matrix::Zero(2, 2), Matrix::Zero(2, 1),
                                  Matrix::Zero(1, 2), Matrix::Zero(1, 2)),
                  DimensionError);
  Matrix bad = Matrix::Zero(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(StateSpaceModel::gain(bad), DimensionError);
}

TEST_CASE("stability") {
  CHECK(is_stable(first_order(1.0)));
  CHECK_FALSE(is_stable(StateSpaceModel(Matrix::Zero(1, 1), Matrix::Ones(1, 1),
                                        Matrix::Ones(1, 1), Matrix::Zero(1, 1))));
  Matrix a(2, 2);
  a << 0, 1, -1, -0.1;
  StateSpaceModel osc(a, Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1));
  for (const Complex& p : poles(osc)) CHECK(std::abs(p.real() + 0.05) < 1e-12);
  CHECK(is_stable(osc));
  StateSpaceModel disc(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1),
                       Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.1);
  CHECK(is_stable(disc));
}

TEST_CASE("interconnections reproduce products") {
  CHECK(evaluate(series(StateSpaceModel::gain(Matrix::Constant(1, 1, 2)),
                        StateSpaceModel::gain(Matrix::Constant(1, 1, 3))),
                 0.0)(0, 0) == Complex(6.0));
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    auto g1 = random_stable(rng, 4, 3, 2);
    auto g2 = random_stable(rng, 3, 2, 3);
    auto g3 = random_stable(rng, 2, 3, 2);
    auto ser = series(g1, g2);
    for (const Complex& s : fdi::test::random_points(rng, 20)) {
      CHECK(fdi::test::rel_diff(evaluate(ser, s), evaluate(g2, s) * evaluate(g1, s)) < 1e-9);
      CHECK(fdi::test::rel_diff(evaluate(parallel(g1, g3), s),
                                evaluate(g1, s) + evaluate(g3, s)) < 1e-9);
    }
    // Poles of the series connection are the union of part poles.
    auto all = poles(ser);
    std::vector<Complex> parts = poles(g1);
    for (auto p : poles(g2)) parts.push_back(p);
    for (auto p : all) {
      bool found = std::any_of(parts.begin(), parts.end(),
                               [&](Complex q) { return std::abs(p - q) < 1e-6 * (1 + std::abs(q)); });
      CHECK(found);
    }
  }
}

TEST_CASE("concatenations and stack") {
  std::mt19937_64 rng(4);
  auto g1 = random_stable(rng, 3, 2, 2);
  auto g2 = random_stable(rng, 2, 2, 1);
  auto g3 = random_stable(rng, 2, 1, 2);
  const Complex s(0.3, 1.7);
  CMatrix rc = evaluate(row_concat(g1, g2), s);
  CHECK(fdi::test::rel_diff(rc.leftCols(2), evaluate(g1, s)) < 1e-12);
  CHECK(fdi::test::rel_diff(rc.rightCols(1), evaluate(g2, s)) < 1e-12);
  CMatrix cc = evaluate(col_concat(g1, g3), s);
  CHECK(fdi::test::rel_diff(cc.topRows(2), evaluate(g1, s)) < 1e-12);
  CHECK(fdi::test::rel_diff(cc.bottomRows(1), evaluate(g3, s)) < 1e-12);
  CMatrix st = evaluate(stack(g1, g2), s);
  CHECK(st.topRightCorner(2, 1).norm() == 0.0);
  std::vector<StateSpaceModel> parts{g1, g1, g1};
  CHECK(connect(Connection::kRowConcat, parts).inputs() == 6);
  CHECK(connect(Connection::kStack, parts).outputs() == 6);
  CHECK_THROWS_AS(row_concat(g1, g3), DimensionError);
  CHECK_THROWS_AS(series(g3, g1), DimensionError);
}

TEST_CASE("feedback") {
  StateSpaceModel integrator(Matrix::Zero(1, 1), Matrix::Ones(1, 1),
                             Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  auto loop = feedback(integrator, StateSpaceModel::gain(Matrix::Constant(1, 1, 4.0)));
  auto p = poles(loop);
  REQUIRE(p.size() == 1);
  CHECK(std::abs(p[0] + 4.0) < 1e-12);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    auto g = random_stable(rng, 4, 2, 3);
    auto k = random_stable(rng, 2, 3, 2);
    k = scaled(k, 0.2);
    auto open = feedback(g, StateSpaceModel::zero(3, 2));
    auto cl = feedback(g, k);
    for (const Complex& s : fdi::test::random_points(rng, 10)) {
      CHECK(fdi::test::rel_diff(evaluate(open, s), evaluate(g, s)) < 1e-12);
      const CMatrix gs = evaluate(g, s);
      const CMatrix ks = evaluate(k, s);
      const CMatrix ref = (CMatrix::Identity(2, 2) + gs * ks).inverse() * gs;
      CHECK(fdi::test::rel_diff(evaluate(cl, s), ref) < 1e-8);
    }
  }
  CHECK_THROWS_AS(feedback(StateSpaceModel::gain(Matrix::Ones(1, 1)),
                           StateSpaceModel::gain(-Matrix::Ones(1, 1))),
                  NumericalError);
}

TEST_CASE("normal rank") {
  CHECK(normal_rank(StateSpaceModel::identity(4)) == 4);
  auto g = first_order(2.0);
  CHECK(normal_rank(row_concat(g, g)) == 1);

  std::mt19937_64 rng(6);
  auto gu = random_stable(rng, 5, 4, 3);
  auto combined = row_concat(gu, StateSpaceModel::identity(4));
  CHECK(normal_rank(combined) == 4);
  std::vector<Index> cols{0, 1};
  CHECK(normal_rank(combined, cols) == 2);

  for (int t = 0; t < 10; ++t) {
    auto h = random_stable(rng, 3, 3, 2);
    auto lowrank = series(random_stable(rng, 2, 1, 2), random_stable(rng, 2, 3, 1));
    auto w = first_order(3.0);
    StateSpaceModel scalar3 = stack(stack(w, w), w);
    CHECK(normal_rank(h) == normal_rank(series(h, scalar3)));
    CHECK(normal_rank(lowrank) == 1);
    CHECK(probe_rank(h).relative_margin > 1e-8);
  }
}

TEST_CASE("norms") {
  CHECK(h_inf_norm(StateSpaceModel::gain(Matrix::Constant(1, 1, 2.0))) ==
        doctest::Approx(2.0).epsilon(1e-14));
  CHECK(h_inf_norm(first_order(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  const double zeta = 0.05;
  Matrix a(2, 2);
  a << 0, 1, -1, -2 * zeta;
  StateSpaceModel res(a, Matrix(Eigen::Vector2d(0, 1)), Matrix(Eigen::RowVector2d(1, 0)),
                      Matrix::Zero(1, 1));
  const double peak = 1.0 / (2 * zeta * std::sqrt(1 - zeta * zeta));
  CHECK(h_inf_norm(res) == doctest::Approx(peak).epsilon(1e-8));
  CHECK(h_minus_over_grid(first_order(1.0)) == doctest::Approx(1.0 / std::hypot(1.0, 1e5)).epsilon(1e-6));
  CHECK_THROWS_AS(h_inf_norm(StateSpaceModel(Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                                             Matrix::Ones(1, 1), Matrix::Zero(1, 1))),
                  NumericalError);
}

TEST_CASE("minimal realization removes duplicated states") {
  std::mt19937_64 rng(7);
  auto g = random_stable(rng, 4, 2, 2);
  auto dup = parallel(g, scaled(g, 0.0));
  auto both = row_concat(g, g);
  CHECK(minimal_realization(dup).states() == 4);
  auto red = minimal_realization(both);
  CHECK(red.states() == 4);
  for (const Complex& s : fdi::test::random_points(rng, 5)) {
    CHECK(fdi::test::rel_diff(evaluate(red, s), evaluate(both, s)) < 1e-9);
  }
}

TEST_CASE("inverse and transmission zeros") {
  // (s + 2) / (s + 1)
  StateSpaceModel g(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1),
                    Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  auto z = transmission_zeros(g);
  REQUIRE(z.size() == 1);
  CHECK(std::abs(z[0] + 2.0) < 1e-10);
  auto gi = inverse(g);
  CHECK(std::abs(evaluate(gi, Complex(0, 1))(0, 0) * evaluate(g, Complex(0, 1))(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("grid restriction for discrete models") {
  StateSpaceModel disc(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1),
                       Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.01);
  auto g = FrequencyGrid::standard().restricted_to(disc);
  CHECK(g.points().back() < 3.14159265 / 0.01);
  CHECK(h_inf_norm(disc) == doctest::Approx(2.0).epsilon(1e-9));
}
