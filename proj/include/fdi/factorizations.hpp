#pragma once

#include <vector>

#include "fdi/lti.hpp"

namespace fdi {

/// Stabilizing solution of a^T x + x a - x b r^{-1} b^T x + q = 0 from the
/// ordered complex Schur form of the Hamiltonian, optionally polished with
/// Newton-Kleinman steps. Throws NumericalError when the Hamiltonian has
/// eigenvalues on the imaginary axis or the subspace is ill-conditioned.
Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q,
                  const Matrix& r, bool refine = true);

/// Frobenius norm of the CARE residual at x.
double care_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r, const Matrix& x);

/// Solves a^T x + x a + q = 0 for stable a (Bartels-Stewart on the complex
/// Schur form).
Matrix solve_continuous_lyapunov(const Matrix& a, const Matrix& q);

/// G = M^{-1} N with M = (A+KC, K, C, I), N = (A+KC, B+KD, C, D).
struct CoprimePair {
  StateSpaceModel m_factor;
  StateSpaceModel n_factor;
  Matrix gain;  // K
};

/// K from the unit-weight filter Riccati equation
/// A Y + Y A^T - Y C^T C Y + I = 0, K = -Y C^T.
/// Throws NumericalError if (C, A) is not detectable.
CoprimePair left_coprime_factorization(const StateSpaceModel& g);

/// Same formulas with a caller-chosen injection gain. Throws NumericalError
/// when A + KC is not stable.
CoprimePair left_coprime_factorization(const StateSpaceModel& g, const Matrix& gain);

/// G = outer * inner with inner co-inner (inner inner^H = I on the axis) and
/// outer stable with stable finite zeros.
///
/// Rows with zero feedthrough are first multiplied by (s + shift)^{r_i} until
/// the feedthrough has full row rank; then
///   outer = diag((s + shift)^{-r_i}) * outer_core
/// where outer_core is biproper. outer_core is what gets inverted.
struct InnerOuterPair {
  StateSpaceModel outer;
  StateSpaceModel inner;
  StateSpaceModel outer_core;
  std::vector<int> relative_degree;
  double shift = 1.0;
};

/// Requires g stable with full normal row rank. Throws InfeasibleError for
/// row-rank-deficient g and NumericalError if a zero lies on the axis.
InnerOuterPair co_inner_outer(const StateSpaceModel& g);

/// Default roll-off time constant used to keep outer inverses proper.
inline constexpr double kRollOffHz = 2000.0;
double default_roll_off_tau();

/// outer_core^{-1} * diag(((s + shift) / (tau s + 1))^{r_i}): a stable proper
/// approximation of outer^{-1} that is exact below 1/tau.
StateSpaceModel regularized_outer_inverse(const InnerOuterPair& pair, double tau);

}  // namespace fdi
