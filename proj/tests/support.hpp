#pragma once

#include <random>

#include <Eigen/Eigenvalues>

#include "fdi/lti.hpp"

namespace fdi::test {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline StateSpaceModel random_stable(std::mt19937_64& rng, Index n, Index p, Index m,
                                     bool feedthrough = true) {
  Matrix a = random_matrix(rng, n, n);
  if (n > 0) {
    Eigen::EigenSolver<Matrix> es(a, false);
    const double top = es.eigenvalues().real().maxCoeff();
    std::uniform_real_distribution<double> extra(0.2, 1.5);
    a -= (top + extra(rng)) * Matrix::Identity(n, n);
  }
  Matrix d = feedthrough ? random_matrix(rng, p, m) : Matrix(Matrix::Zero(p, m));
  return {a, random_matrix(rng, n, m), random_matrix(rng, p, n), d};
}

inline StateSpaceModel first_order(double pole, double gain = 1.0) {
  return {Matrix::Constant(1, 1, -pole), Matrix::Ones(1, 1),
          Matrix::Constant(1, 1, gain), Matrix::Zero(1, 1)};
}

inline std::vector<Complex> random_points(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> mag(-1.0, 2.0);
  std::uniform_real_distribution<double> ph(0.0, 6.283185307179586);
  std::vector<Complex> pts;
  for (int i = 0; i < count; ++i) pts.push_back(std::polar(std::pow(10.0, mag(rng)), ph(rng)));
  return pts;
}

inline double rel_diff(const CMatrix& lhs, const CMatrix& rhs) {
  return (lhs - rhs).norm() / std::max(1.0, rhs.norm());
}

}  // namespace fdi::test
