#include "fdi/nullspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "fdi/factorizations.hpp"
#include "fdi/plant.hpp"

namespace fdi {
namespace {

constexpr double kStructuralZero = 1e-12;

// Output index k when column j is a pure sensor column (zero B column, D
// column a multiple of e_k); -1 otherwise.
Index sensor_output(const StateSpaceModel& model, Index j) {
  const double scale = std::max(1.0, model.b().norm());
  if (model.states() > 0 && model.b().col(j).norm() > kStructuralZero * scale) return -1;
  const auto col = model.d().col(j);
  Index k = -1;
  const double top = col.cwiseAbs().maxCoeff(&k);
  if (!(top > 0.0)) return -1;
  for (Index i = 0; i < col.size(); ++i) {
    if (i != k && std::abs(col(i)) > kStructuralZero * top) return -1;
  }
  return k;
}

Matrix selection_rows(const std::vector<Index>& rows, Index total) {
  Matrix e = Matrix::Zero(static_cast<Index>(rows.size()), total);
  for (std::size_t i = 0; i < rows.size(); ++i) e(static_cast<Index>(i), rows[i]) = 1.0;
  return e;
}

// N restricted to `columns` on the kept outputs: (A+KC, B+KD, C, D).
StateSpaceModel coprime_columns(const NullspaceBasis& basis,
                                std::span<const Index> columns) {
  const StateSpaceModel reduced =
      select_inputs(select_outputs(basis.source, basis.kept_outputs), columns);
  return left_coprime_factorization(reduced, basis.injection).n_factor;
}

// Row of signed q x q minors of nd over the rows in `lead` (q + 1 of them),
// placed at those positions of a 1 x p row. Every minor of
// C (sI - A)^{-1} B + D equals m(s) / det(sI - A) with deg m <= n, so the row
// is realized on A itself: C is a fixed observable row and B, D are fitted to
// sampled minors.
StateSpaceModel minor_row(const StateSpaceModel& nd, const std::vector<Index>& lead, Index p) {
  const Index n = nd.states();
  const Index q = nd.inputs();
  const auto value_at = [&](Complex s) {
    const CMatrix g = evaluate(nd, s);
    CMatrix row = CMatrix::Zero(1, p);
    for (Index k = 0; k <= q; ++k) {
      CMatrix minor(q, q);
      Index r = 0;
      for (Index i = 0; i <= q; ++i) {
        if (i == k) continue;
        minor.row(r++) = g.row(lead[static_cast<std::size_t>(i)]);
      }
      const Complex det = minor.determinant();
      row(0, lead[static_cast<std::size_t>(k)]) = k % 2 == 1 ? -det : det;
    }
    return row;
  };
  if (n == 0) return StateSpaceModel::gain(value_at(Complex(0.0, 0.0)).real());

  std::mt19937_64 rng(0x5eed + static_cast<std::uint64_t>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix c(1, n);
  for (Index j = 0; j < n; ++j) c(0, j) = normal(rng);

  Eigen::ComplexEigenSolver<CMatrix> es(nd.a().cast<Complex>(), false);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = std::abs(es.eigenvalues()(i));
    if (m > 0.0) lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  if (!std::isfinite(lo)) lo = hi = 1.0;
  std::vector<Complex> points{Complex(0.0, 0.0)};
  const Index count = 4 * (n + 1);
  for (Index k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(count - 1);
    points.emplace_back(0.0, 0.01 * lo * std::pow(1e4 * hi / lo, t));
  }

  const CMatrix ca = c.cast<Complex>();
  const CMatrix ac = nd.a().cast<Complex>();
  Matrix design(2 * static_cast<Index>(points.size()), n + 1);
  Matrix target(design.rows(), p);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const CMatrix resolvent =
        ca * (points[k] * CMatrix::Identity(n, n) - ac).partialPivLu().inverse();
    const CMatrix row = value_at(points[k]);
    const Index re = 2 * static_cast<Index>(k), im = re + 1;
    design.block(re, 0, 1, n) = resolvent.real();
    design.block(im, 0, 1, n) = resolvent.imag();
    design(re, n) = 1.0;
    design(im, n) = 0.0;
    target.row(re) = row.real();
    target.row(im) = row.imag();
  }
  for (Index r = 0; r < design.rows(); r += 2) {
    const double w = 1.0 / design.middleRows(r, 2).norm();
    design.middleRows(r, 2) *= w;
    target.middleRows(r, 2) *= w;
  }
  const Matrix x = design.completeOrthogonalDecomposition().solve(target);
  return StateSpaceModel(nd.a(), x.topRows(n), c, x.bottomRows(1));
}

StateSpaceModel stack_rows(const std::vector<StateSpaceModel>& rows) {
  StateSpaceModel out = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i) out = col_concat(out, rows[i]);
  return out;
}

StateSpaceModel linear_annihilator(const NullspaceBasis& basis, const Matrix& weights) {
  std::vector<StateSpaceModel> rows;
  for (Index k = 0; k < weights.rows(); ++k) {
    Matrix map = Matrix::Zero(basis.row_maps.front().rows(), basis.row_maps.front().cols());
    for (Index i = 0; i < weights.cols(); ++i) {
      map += weights(k, i) * basis.row_maps[static_cast<std::size_t>(i)];
    }
    rows.push_back(postmultiply(*basis.column_transpose, map));
  }
  return stack_rows(rows);
}

void check_weights(const NullspaceBasis& basis, const Matrix& weights) {
  if (weights.cols() != basis.rows()) {
    throw DimensionError("weights have " + std::to_string(weights.cols()) +
                         " columns, basis has " + std::to_string(basis.rows()) + " rows");
  }
  if (weights.rows() == 0 ||
      numerical_rank(weights.cast<Complex>(), 1e-10) != weights.rows()) {
    throw InfeasibleError("combination weights are rank deficient");
  }
}

}  // namespace

Matrix seeded_weights(Index rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(1, rows);
  for (Index i = 0; i < rows; ++i) w(0, i) = normal(rng);
  const double n = w.norm();
  if (n > 0.0) w /= n;
  return w;
}

double annihilation_error(const StateSpaceModel& filter, const StateSpaceModel& model,
                          Index n_u, std::span<const Index> extra_columns,
                          const FrequencyGrid& grid) {
  const Index n_y = model.outputs();
  if (filter.inputs() != n_y + n_u) {
    throw DimensionError("annihilation_error: filter must act on [y; u]");
  }
  std::vector<Index> cols = index_range(0, n_u);
  cols.insert(cols.end(), extra_columns.begin(), extra_columns.end());
  const Index nc = static_cast<Index>(cols.size());
  ResponseEvaluator fq(filter), fg(model);
  double worst = 0.0, qmax = 0.0, gmax = 0.0;
  for (double w : grid.points()) {
    const CMatrix g = fg.at_frequency(w);
    CMatrix comp = CMatrix::Zero(n_y + n_u, nc);
    for (Index j = 0; j < nc; ++j) comp.col(j).head(n_y) = g.col(cols[static_cast<std::size_t>(j)]);
    comp.bottomLeftCorner(n_u, n_u).setIdentity();
    const CMatrix q = fq.at_frequency(w);
    if (nc > 0) {
      worst = std::max(worst, (q * comp).cwiseAbs().maxCoeff());
      gmax = std::max(gmax, comp.cwiseAbs().maxCoeff());
    }
    if (q.size() > 0) qmax = std::max(qmax, q.cwiseAbs().maxCoeff());
  }
  return worst / ((1.0 + gmax) * std::max(1.0, qmax));
}

NullspaceBasis left_nullspace(const StateSpaceModel& model, Index n_u,
                              std::span<const Index> extra_columns,
                              const NullspaceOptions& options) {
  const Index n_y = model.outputs();
  if (n_y < 1) throw DimensionError("left_nullspace: need at least one output");
  if (n_u < 0 || n_u > model.inputs()) {
    throw DimensionError("left_nullspace: n_u exceeds the number of inputs");
  }
  if (model.is_discrete()) throw DimensionError("left_nullspace: continuous models only");

  NullspaceBasis basis;
  basis.n_y = n_y;
  basis.n_u = n_u;
  basis.source = model;
  basis.decoupled_columns.assign(extra_columns.begin(), extra_columns.end());

  std::vector<Index> dynamic;
  for (Index j : extra_columns) {
    if (j < 0 || j >= model.inputs()) {
      throw DimensionError("left_nullspace: extra column index out of range");
    }
    const Index k = sensor_output(model, j);
    if (k >= 0) {
      if (std::find(basis.sensor_outputs.begin(), basis.sensor_outputs.end(), k) ==
          basis.sensor_outputs.end()) {
        basis.sensor_outputs.push_back(k);
      }
    } else {
      dynamic.push_back(j);
    }
  }
  std::sort(basis.sensor_outputs.begin(), basis.sensor_outputs.end());
  for (Index i = 0; i < n_y; ++i) {
    if (!std::binary_search(basis.sensor_outputs.begin(), basis.sensor_outputs.end(), i)) {
      basis.kept_outputs.push_back(i);
    }
  }
  const Index p = static_cast<Index>(basis.kept_outputs.size());
  if (p == 0) {
    throw InfeasibleError("no residual generator exists: every output is decoupled");
  }

  const StateSpaceModel reduced = select_outputs(model, basis.kept_outputs);
  const CoprimePair lcf = left_coprime_factorization(reduced);
  basis.injection = lcf.gain;

  // [M, -N_u] on one shared realization, then embedded into [y; u].
  {
    const Matrix bu = reduced.b().leftCols(n_u) + lcf.gain * reduced.d().leftCols(n_u);
    Matrix b(reduced.states(), p + n_u);
    b << lcf.gain, -bu;
    Matrix d(p, p + n_u);
    d << Matrix::Identity(p, p), -reduced.d().leftCols(n_u);
    StateSpaceModel mn(lcf.m_factor.a(), b, reduced.c(), d);
    std::vector<Index> embed = basis.kept_outputs;
    for (Index j = 0; j < n_u; ++j) embed.push_back(n_y + j);
    basis.base = postmultiply(mn, selection_rows(embed, n_y + n_u));
  }

  // Independent subset of the dynamic columns of N_d.
  std::vector<Index> independent;
  Index rank = 0;
  if (!dynamic.empty()) {
    const StateSpaceModel nd = coprime_columns(basis, dynamic);
    for (Index j = 0; j < static_cast<Index>(dynamic.size()); ++j) {
      std::vector<Index> trial = independent;
      trial.push_back(j);
      const Index r = normal_rank(nd, trial, options.rank);
      if (r > rank) {
        rank = r;
        independent.push_back(j);
      }
    }
  }
  const Index q = rank;
  if (p - q <= 0) {
    throw InfeasibleError("no residual generator exists: decoupled columns have rank " +
                          std::to_string(q + static_cast<Index>(basis.sensor_outputs.size())) +
                          " with " + std::to_string(n_y) + " outputs");
  }

  if (q == 0) {
    basis.annihilator = StateSpaceModel::identity(p);
  } else {
    std::vector<Index> chosen;
    for (Index j : independent) chosen.push_back(dynamic[static_cast<std::size_t>(j)]);
    const StateSpaceModel nd = coprime_columns(basis, chosen);

    // Pivot rows: the best conditioned q x q block at a generic point.
    const Complex s0 = rank_sample_points(nd, options.rank).front();
    Eigen::ColPivHouseholderQR<CMatrix> qr(evaluate(nd, s0).transpose());
    std::vector<Index> pivots;
    for (Index k = 0; k < q; ++k) pivots.push_back(qr.colsPermutation().indices()(k));
    std::vector<Index> others;
    for (Index i = 0; i < p; ++i) {
      if (std::find(pivots.begin(), pivots.end(), i) == pivots.end()) others.push_back(i);
    }

    if (q == 1) {
      const Index piv = pivots.front();
      basis.column_transpose = transpose(nd);
      for (Index i : others) {
        Matrix map = Matrix::Zero(p, p);
        map(piv, i) = 1.0;
        map(i, piv) = -1.0;
        basis.row_maps.push_back(map);
      }
      basis.annihilator = linear_annihilator(
          basis, Matrix::Identity(static_cast<Index>(others.size()),
                                  static_cast<Index>(others.size())));
    } else {
      std::vector<StateSpaceModel> rows;
      for (Index i : others) {
        std::vector<Index> lead = pivots;
        lead.push_back(i);
        rows.push_back(minor_row(nd, lead, p));
      }
      basis.annihilator = stack_rows(rows);
    }
  }
  basis.filter = series(basis.base, basis.annihilator);

  const FrequencyGrid grid = FrequencyGrid::standard().with_random_points(
      options.random_check_points, options.rank.seed);
  const double err = annihilation_error(basis.filter, model, n_u, extra_columns, grid);
  if (!(err < options.annihilation_tolerance)) {
    throw NumericalError("left_nullspace: annihilation check failed (relative residual " +
                         std::to_string(err) + ")");
  }
  return basis;
}

NullspaceBasis left_nullspace(const StateSpaceModel& g_u, const StateSpaceModel& extras,
                              const NullspaceOptions& options) {
  if (extras.inputs() == 0) return left_nullspace(g_u, g_u.inputs(), {}, options);
  if (extras.outputs() != g_u.outputs()) {
    throw DimensionError("left_nullspace: extras must share the output dimension");
  }
  const StateSpaceModel model = minimal_realization(row_concat(g_u, extras));
  return left_nullspace(model, g_u.inputs(), index_range(g_u.inputs(), extras.inputs()),
                        options);
}

StateSpaceModel combine_rows(const NullspaceBasis& basis, const Matrix& weights) {
  check_weights(basis, weights);
  if (basis.column_transpose) {
    return series(basis.base, linear_annihilator(basis, weights));
  }
  return premultiply(weights, basis.filter);
}

StateSpaceModel projected_channel(const NullspaceBasis& basis, const Matrix& weights,
                                  std::span<const Index> columns) {
  check_weights(basis, weights);
  const StateSpaceModel n_cols = coprime_columns(basis, columns);
  if (basis.column_transpose) return series(n_cols, linear_annihilator(basis, weights));
  return series(n_cols, premultiply(weights, basis.annihilator));
}

}  // namespace fdi
