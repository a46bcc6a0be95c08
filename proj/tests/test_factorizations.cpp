#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fdi/factorizations.hpp"
#include "support.hpp"

using namespace fdi;
using fdi::test::random_matrix;
using fdi::test::random_stable;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("scalar Riccati equations") {
  CHECK(solve_care(scalar(0), scalar(1), scalar(1), scalar(1))(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(solve_care(scalar(-1), scalar(1), scalar(0), scalar(1))(0, 0)) < 1e-12);
  const Matrix x = solve_care(scalar(1), scalar(1), scalar(0), scalar(1));
  CHECK(x(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK((1.0 - x(0, 0)) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("Riccati on random stabilizable problems") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + t % 7;
    const Index m = 1 + t % 3;
    const Matrix a = random_matrix(rng, n, n);
    const Matrix b = random_matrix(rng, n, m);
    const Matrix cq = random_matrix(rng, n, n);
    const Matrix q = cq.transpose() * cq;
    const Matrix rr = random_matrix(rng, m, m);
    const Matrix r = rr * rr.transpose() + Matrix::Identity(m, m);
    const Matrix x = solve_care(a, b, q, r);
    CHECK(care_residual(a, b, q, r, x) < 1e-8 * (1.0 + x.norm()));
    Eigen::EigenSolver<Matrix> es(a - b * r.inverse() * b.transpose() * x, false);
    CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
    CHECK((x - x.transpose()).norm() < 1e-12 * (1 + x.norm()));
  }
}

TEST_CASE("Riccati reports imaginary-axis Hamiltonian eigenvalues") {
  // Undamped oscillator, unobservable through q = 0 and not stabilizable.
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  CHECK_THROWS_AS(solve_care(a, Matrix::Zero(2, 1), Matrix::Zero(2, 2), scalar(1)),
                  NumericalError);
}

TEST_CASE("Lyapunov solver") {
  std::mt19937_64 rng(22);
  auto g = random_stable(rng, 6, 1, 1);
  const Matrix q = Matrix::Identity(6, 6);
  const Matrix x = solve_continuous_lyapunov(g.a(), q);
  CHECK((g.a().transpose() * x + x * g.a() + q).norm() < 1e-10);
}

TEST_CASE("left coprime factorization") {
  std::mt19937_64 rng(23);
  // Explicit gain K = 0 on a stable system returns (I, g).
  auto stable = random_stable(rng, 3, 2, 2);
  auto pair0 = left_coprime_factorization(stable, Matrix::Zero(3, 2));
  CHECK(fdi::test::rel_diff(evaluate(pair0.m_factor, Complex(0, 2)), CMatrix::Identity(2, 2)) < 1e-14);
  CHECK(fdi::test::rel_diff(evaluate(pair0.n_factor, Complex(0, 2)), evaluate(stable, Complex(0, 2))) < 1e-14);

  // 1/(s-1) with K = -2: M = (s-1)/(s+1), N = 1/(s+1).
  StateSpaceModel unstable(scalar(1), scalar(1), scalar(1), scalar(0));
  auto pair = left_coprime_factorization(unstable, scalar(-2));
  for (Complex s : {Complex(0, 1), Complex(2, 3), Complex(-0.5, 0.1)}) {
    CHECK(std::abs(evaluate(pair.m_factor, s)(0, 0) - (s - 1.0) / (s + 1.0)) < 1e-14);
    CHECK(std::abs(evaluate(pair.n_factor, s)(0, 0) - 1.0 / (s + 1.0)) < 1e-14);
  }
  CHECK_THROWS_AS(left_coprime_factorization(unstable, scalar(0.5)), NumericalError);

  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + t % 6;
    StateSpaceModel g(random_matrix(rng, n, n), random_matrix(rng, n, 3),
                      random_matrix(rng, 2, n), random_matrix(rng, 2, 3));
    auto lcf = left_coprime_factorization(g);
    CHECK(is_stable(lcf.m_factor));
    CHECK(is_stable(lcf.n_factor));
    for (const Complex& s : fdi::test::random_points(rng, 20)) {
      const CMatrix rebuilt =
          evaluate(lcf.m_factor, s).partialPivLu().solve(evaluate(lcf.n_factor, s));
      CHECK(fdi::test::rel_diff(rebuilt, evaluate(g, s)) < 1e-8);
    }
  }
}

TEST_CASE("co-inner-outer examples") {
  // Square minimum phase: already outer.
  StateSpaceModel mp(scalar(-1), scalar(1), scalar(1), scalar(2));  // (2s+3)/(s+1)
  auto f0 = co_inner_outer(mp);
  for (Complex s : {Complex(0, 0.3), Complex(0, 7)}) {
    CHECK(std::abs(evaluate(f0.inner, s)(0, 0) - 1.0) < 1e-10);
    CHECK(std::abs(evaluate(f0.outer, s)(0, 0) - evaluate(mp, s)(0, 0)) < 1e-10);
  }

  // [1/(s+1), 1/(s+1)]: outer sqrt(2)/(s+1), inner [1, 1]/sqrt(2).
  auto g1 = fdi::test::first_order(1.0);
  auto f1 = co_inner_outer(row_concat(g1, g1));
  for (Complex s : {Complex(0, 0.1), Complex(0, 1), Complex(0, 30)}) {
    CHECK(std::abs(evaluate(f1.outer, s)(0, 0) - std::sqrt(2.0) / (s + 1.0)) < 1e-9);
    const CMatrix inner = evaluate(f1.inner, s);
    CHECK(std::abs(inner(0, 0) - 1.0 / std::sqrt(2.0)) < 1e-9);
    CHECK(std::abs(inner(0, 1) - 1.0 / std::sqrt(2.0)) < 1e-9);
  }

  // (1 - s)/((s+1)(s+2)): outer 1/(s+2), inner (1-s)/(1+s).
  Matrix a(2, 2);
  a << -1, 0, 1, -2;
  StateSpaceModel nmp(a, Matrix(Eigen::Vector2d(1, 0)), Matrix(Eigen::RowVector2d(-1, 3)),
                      scalar(0));
  for (Complex s : {Complex(0, 1), Complex(1, 1)}) {
    CHECK(std::abs(evaluate(nmp, s)(0, 0) - (1.0 - s) / ((s + 1.0) * (s + 2.0))) < 1e-12);
  }
  auto f2 = co_inner_outer(nmp);
  auto grid = FrequencyGrid::log_spaced(1e-2, 1e3, 50);
  for (double w : grid.points()) {
    const Complex s(0, w);
    CHECK(std::abs(std::abs(evaluate(f2.inner, s)(0, 0)) - 1.0) < 1e-8);
    CHECK(std::abs(evaluate(f2.outer, s)(0, 0) - 1.0 / (s + 2.0)) < 1e-8);
    CHECK(std::abs(evaluate(f2.inner, s)(0, 0) - (1.0 - s) / (1.0 + s)) < 1e-8);
  }
}

TEST_CASE("co-inner-outer on random wide systems") {
  std::mt19937_64 rng(24);
  auto grid = FrequencyGrid::standard();
  for (int t = 0; t < 20; ++t) {
    const Index p = 1 + t % 2;
    auto g = random_stable(rng, 2 + t % 5, p, p + 1 + t % 2, t % 3 != 0);
    auto f = co_inner_outer(g);
    CHECK(is_stable(f.outer));
    CHECK(is_stable(f.inner));
    for (const Complex& z : transmission_zeros(f.outer_core)) CHECK(z.real() < -1e-7);
    ResponseEvaluator gi(f.inner), go(f.outer), gg(g);
    double defect = 0.0, rebuild = 0.0;
    for (double w : grid.points()) {
      const CMatrix inner = gi.at_frequency(w);
      defect = std::max(defect, (inner * inner.adjoint() - CMatrix::Identity(p, p)).norm());
      rebuild = std::max(rebuild, fdi::test::rel_diff(go.at_frequency(w) * inner, gg.at_frequency(w)));
    }
    CHECK(defect < 1e-8);
    CHECK(rebuild < 1e-8);
  }
}

TEST_CASE("co-inner-outer rejects row-rank-deficient systems") {
  auto g1 = fdi::test::first_order(1.0);
  CHECK_THROWS_AS(co_inner_outer(col_concat(g1, g1)), InfeasibleError);
  auto zero = StateSpaceModel::zero(1, 2);
  CHECK_THROWS_AS(co_inner_outer(zero), InfeasibleError);
}

TEST_CASE("regularized outer inverse") {
  Matrix a(2, 2);
  a << -1, 0, 1, -2;
  StateSpaceModel nmp(a, Matrix(Eigen::Vector2d(1, 0)), Matrix(Eigen::RowVector2d(-1, 3)),
                      scalar(0));
  auto f = co_inner_outer(nmp);
  const double tau = default_roll_off_tau();
  auto inv = regularized_outer_inverse(f, tau);
  CHECK(is_stable(inv));
  for (double w : {0.01, 1.0, 100.0}) {
    const Complex s(0, w);
    const Complex expected = (s + 2.0) / (tau * s + 1.0);
    CHECK(std::abs(evaluate(inv, s)(0, 0) - expected) < 1e-8 * std::abs(expected));
  }
  // Product with the inner-outer pair has unit gain at DC.
  CHECK(h_inf_norm(series(nmp, inv)) == doctest::Approx(1.0).epsilon(1e-6));
}
