#include "fdi/factorizations.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace fdi {
namespace {

Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix spd_inverse(const Matrix& r, const char* what) {
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": weight matrix is not positive definite");
  }
  return llt.solve(Matrix::Identity(r.rows(), r.cols()));
}

// Swaps the adjacent diagonal entries k, k+1 of an upper triangular t and
// accumulates the rotation into u.
void swap_diagonal(CMatrix& t, CMatrix& u, Index k) {
  const Complex a = t(k, k);
  const Complex b = t(k, k + 1);
  const Complex c = t(k + 1, k + 1);
  Complex v1 = b;
  Complex v2 = c - a;
  const double norm = std::hypot(std::abs(v1), std::abs(v2));
  if (norm == 0.0) return;
  v1 /= norm;
  v2 /= norm;
  Eigen::Matrix2cd g;
  g << v1, -std::conj(v2), v2, std::conj(v1);
  const Index n = t.rows();
  t.middleCols(k, 2) = t.middleCols(k, 2) * g;
  t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
  u.middleCols(k, 2) = u.middleCols(k, 2) * g;
  t(k + 1, k) = 0.0;
  (void)n;
}

// Bubble the eigenvalues selected by `keep` to the leading block.
template <typename Pred>
Index reorder_schur(CMatrix& t, CMatrix& u, Pred keep) {
  const Index n = t.rows();
  Index placed = 0;
  for (Index j = 0; j < n; ++j) {
    if (!keep(t(j, j))) continue;
    for (Index k = j; k > placed; --k) swap_diagonal(t, u, k - 1);
    ++placed;
  }
  return placed;
}

// Solves T^H Y + Y T = C for upper triangular T.
CMatrix triangular_lyapunov(const CMatrix& t, const CMatrix& c) {
  const Index n = t.rows();
  CMatrix y = CMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      Complex acc = c(i, j);
      for (Index k = 0; k < i; ++k) acc -= std::conj(t(k, i)) * y(k, j);
      for (Index k = 0; k < j; ++k) acc -= y(i, k) * t(k, j);
      const Complex denom = std::conj(t(i, i)) + t(j, j);
      if (std::abs(denom) == 0.0) {
        throw NumericalError("Lyapunov equation is singular");
      }
      y(i, j) = acc / denom;
    }
  }
  return y;
}

StateSpaceModel roll_off_lead(double shift, double tau) {
  // (s + shift) / (tau s + 1)
  const double p = 1.0 / tau;
  Matrix a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << -p;
  b << 1.0;
  c << (shift - p) / tau;
  d << 1.0 / tau;
  return {a, b, c, d};
}

}  // namespace

double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& x) {
  const Matrix rinv = spd_inverse(r, "care_residual");
  const Matrix res = a.transpose() * x + x * a -
                     x * b * rinv * b.transpose() * x + q;
  return res.norm();
}

Matrix solve_continuous_lyapunov(const Matrix& a, const Matrix& q) {
  const Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw DimensionError("solve_continuous_lyapunov: dimension mismatch");
  }
  if (n == 0) return Matrix(0, 0);
  Eigen::ComplexSchur<CMatrix> schur(a.cast<Complex>());
  const CMatrix& u = schur.matrixU();
  const CMatrix& t = schur.matrixT();
  const CMatrix rhs = -(u.adjoint() * q.cast<Complex>() * u);
  const CMatrix y = triangular_lyapunov(t, rhs);
  return symmetric_part((u * y * u.adjoint()).real());
}

Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, bool refine) {
  const Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw DimensionError("solve_care: dimension mismatch");
  }
  if (n == 0) return Matrix(0, 0);
  const Matrix g = b * spd_inverse(symmetric_part(r), "solve_care") * b.transpose();
  const Matrix qs = symmetric_part(q);

  Matrix h(2 * n, 2 * n);
  h << a, -g, -qs, -a.transpose();
  const double scale = std::max(h.norm(), 1.0);

  Eigen::ComplexSchur<CMatrix> schur(h.cast<Complex>());
  CMatrix t = schur.matrixT();
  CMatrix u = schur.matrixU();
  for (Index i = 0; i < 2 * n; ++i) {
    // Relative to the eigenvalue itself, floored at the backward error of the
    // Schur form; a plain 1e-10 * |H| misreads damped modes of badly scaled
    // problems.
    const double tol = std::max(1e-10 * std::abs(t(i, i)),
                                100.0 * std::numeric_limits<double>::epsilon() * scale);
    if (std::abs(t(i, i).real()) < tol) {
      std::ostringstream os;
      os << "solve_care: Hamiltonian eigenvalue " << t(i, i)
         << " on the imaginary axis; no stabilizing solution";
      throw NumericalError(os.str());
    }
  }
  const Index stable =
      reorder_schur(t, u, [](const Complex& z) { return z.real() < 0.0; });
  if (stable != n) {
    throw NumericalError("solve_care: stable invariant subspace has wrong dimension");
  }
  const CMatrix u11 = u.topLeftCorner(n, n);
  const CMatrix u21 = u.bottomLeftCorner(n, n);
  Eigen::PartialPivLU<CMatrix> lu(u11.transpose());
  if (!(lu.rcond() > 1e-14)) {
    throw NumericalError("solve_care: stable subspace is not a graph (not stabilizable)");
  }
  // X U11 = U21  =>  X = U21 U11^{-1}
  const CMatrix xc = lu.solve(u21.transpose()).transpose();
  Matrix x = symmetric_part(xc.real());

  if (refine) {
    double best = care_residual(a, b, qs, r, x);
    for (int it = 0; it < 4 && best > 1e-13 * (1.0 + x.norm()); ++it) {
      const Matrix closed = a - g * x;
      Matrix next;
      try {
        next = solve_continuous_lyapunov(closed, qs + x * g * x);
      } catch (const NumericalError&) {
        break;
      }
      const double res = care_residual(a, b, qs, r, next);
      if (!(res < best)) break;
      best = res;
      x = next;
    }
  }

  Eigen::EigenSolver<Matrix> es(a - g * x, false);
  for (Index i = 0; i < n; ++i) {
    if (!(es.eigenvalues()(i).real() < 0.0)) {
      throw NumericalError("solve_care: computed solution is not stabilizing");
    }
  }
  return x;
}

// ---------------------------------------------------------------------------

CoprimePair left_coprime_factorization(const StateSpaceModel& g, const Matrix& gain) {
  const Index n = g.states();
  const Index p = g.outputs();
  if (gain.rows() != n || gain.cols() != p) {
    throw DimensionError("left_coprime_factorization: gain must be n x p");
  }
  if (g.is_discrete()) {
    throw DimensionError("left_coprime_factorization: continuous models only");
  }
  const Matrix ak = g.a() + gain * g.c();
  StateSpaceModel m(ak, gain, g.c(), Matrix::Identity(p, p));
  if (!is_stable(m)) {
    throw NumericalError("left_coprime_factorization: A + KC is not stable");
  }
  StateSpaceModel nf(ak, g.b() + gain * g.d(), g.c(), g.d());
  return {std::move(m), std::move(nf), gain};
}

CoprimePair left_coprime_factorization(const StateSpaceModel& g) {
  const Index n = g.states();
  const Index p = g.outputs();
  if (n == 0) return left_coprime_factorization(g, Matrix(0, p));
  Matrix y;
  try {
    y = solve_care(g.a().transpose(), g.c().transpose(), Matrix::Identity(n, n),
                   Matrix::Identity(p, p));
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("left_coprime_factorization: (C, A) is not "
                                     "detectable: ") + e.what());
  }
  return left_coprime_factorization(g, Matrix(-y * g.c().transpose()));
}

// ---------------------------------------------------------------------------

double default_roll_off_tau() { return 1.0 / (2.0 * std::numbers::pi * kRollOffHz); }

InnerOuterPair co_inner_outer(const StateSpaceModel& g) {
  if (g.is_discrete()) throw DimensionError("co_inner_outer: continuous models only");
  const Index n = g.states();
  const Index p = g.outputs();
  const Index m = g.inputs();
  if (p == 0) throw DimensionError("co_inner_outer: empty system");
  if (p > m) {
    throw InfeasibleError("co_inner_outer: more outputs than inputs, no full row rank");
  }
  if (!is_stable(g)) throw NumericalError("co_inner_outer: system must be stable");

  InnerOuterPair out;
  out.shift = std::max(1.0, g.a().norm());
  out.relative_degree.assign(static_cast<std::size_t>(p), 0);
  Matrix c = g.c();
  Matrix d = g.d();
  const Matrix shifted = g.a() + out.shift * Matrix::Identity(n, n);
  const double bnorm = g.b().norm();
  for (Index i = 0; i < p; ++i) {
    for (Index k = 0; k <= n; ++k) {
      const double dn = d.row(i).norm();
      const double cn = c.row(i).norm();
      if (dn > 1e-10 * (dn + cn * bnorm / out.shift)) break;
      if (k == n || cn == 0.0) {
        throw InfeasibleError("co_inner_outer: a row of the system is identically zero");
      }
      d.row(i) = c.row(i) * g.b();
      c.row(i) = c.row(i) * shifted;
      ++out.relative_degree[static_cast<std::size_t>(i)];
    }
  }

  const Matrix rr = symmetric_part(d * d.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(rr);
  const auto& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * std::max(ev.maxCoeff(), 1e-300))) {
    throw InfeasibleError("co_inner_outer: feedthrough is row-rank deficient "
                          "(quasi-outer case unsupported)");
  }
  const Matrix r_half = es.operatorSqrt();
  const Matrix r_half_inv = es.operatorInverseSqrt();
  const Matrix rinv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                      es.eigenvectors().transpose();

  Matrix l;
  if (n > 0) {
    const Matrix abar = g.a() - g.b() * d.transpose() * rinv * c;
    const Matrix proj = Matrix::Identity(m, m) - d.transpose() * rinv * d;
    const Matrix q = symmetric_part(g.b() * proj * g.b().transpose());
    const Matrix y = solve_care(abar.transpose(), c.transpose(), q, rr);
    l = (y * c.transpose() + g.b() * d.transpose()) * rinv;
  } else {
    l = Matrix(0, p);
  }
  StateSpaceModel core(g.a(), l * r_half, c, r_half);
  StateSpaceModel inner(g.a() - l * c, g.b() - l * d, r_half_inv * c, r_half_inv * d);

  if (p == 1 && evaluate(core, 0.0).real()(0, 0) < 0.0) {
    core = scaled(core, -1.0);
    inner = scaled(inner, -1.0);
  }

  // diag((s + shift)^{-r_i}) in front of the biproper core.
  StateSpaceModel outer = core;
  bool any = false;
  for (int r : out.relative_degree) any = any || r > 0;
  if (any) {
    StateSpaceModel lag;
    for (Index i = 0; i < p; ++i) {
      StateSpaceModel row = StateSpaceModel::identity(1);
      const int r = out.relative_degree[static_cast<std::size_t>(i)];
      for (int k = 0; k < r; ++k) {
        row = series(row, StateSpaceModel(Matrix::Constant(1, 1, -out.shift),
                                          Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                                          Matrix::Zero(1, 1)));
      }
      lag = i == 0 ? row : stack(lag, row);
    }
    outer = series(core, lag);
  }
  out.outer = std::move(outer);
  out.inner = std::move(inner);
  out.outer_core = std::move(core);
  return out;
}

StateSpaceModel regularized_outer_inverse(const InnerOuterPair& pair, double tau) {
  if (!(tau > 0.0)) throw DimensionError("regularized_outer_inverse: tau must be positive");
  const StateSpaceModel core_inv = inverse(pair.outer_core);
  const Index p = pair.outer_core.outputs();
  StateSpaceModel lead;
  for (Index i = 0; i < p; ++i) {
    StateSpaceModel row = StateSpaceModel::identity(1);
    const int r = pair.relative_degree[static_cast<std::size_t>(i)];
    for (int k = 0; k < r; ++k) row = series(row, roll_off_lead(pair.shift, tau));
    lead = i == 0 ? row : stack(lead, row);
  }
  return balanced(series(lead, core_inv));
}

}  // namespace fdi
