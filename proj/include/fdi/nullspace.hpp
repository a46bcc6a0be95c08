#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fdi/lti.hpp"

namespace fdi {

struct NullspaceOptions {
  RankOptions rank;
  /// Relative annihilation tolerance checked on the standard grid plus
  /// random frequencies; exceeding it raises NumericalError.
  double annihilation_tolerance = 1e-7;
  std::size_t random_check_points = 10;
};

/// Proper stable left annihilator of [G_u extras; I 0] acting on [y; u],
/// built as N_ld [M, -N_u] from a left coprime factorization.
struct NullspaceBasis {
  StateSpaceModel filter;  // rows x (n_y + n_u)
  Index n_y = 0;
  Index n_u = 0;
  std::vector<Index> decoupled_columns;  // extra columns of `source`
  std::vector<Index> sensor_outputs;     // outputs removed by elimination
  std::vector<Index> kept_outputs;

  // Pieces kept so that weighted combinations and projected channels can be
  // formed without series cancellations.
  StateSpaceModel source;       // model the columns refer to
  Matrix injection;             // K on the kept outputs
  StateSpaceModel base;         // [M, -N_u] E, kept x (n_y + n_u)
  StateSpaceModel annihilator;  // N_ld, rows x kept

  // Set when exactly one dynamic column is decoupled: row i of N_ld is
  // n(s)^T row_maps[i] with n the decoupled column of N.
  std::optional<StateSpaceModel> column_transpose;
  std::vector<Matrix> row_maps;

  Index rows() const { return annihilator.outputs(); }
};

/// Decouples the first n_u columns of `model` (as control inputs, appearing in
/// both y and u) and the listed extra columns (appearing in y only).
/// Throws InfeasibleError when the nullspace is empty.
NullspaceBasis left_nullspace(const StateSpaceModel& model, Index n_u,
                              std::span<const Index> extra_columns,
                              const NullspaceOptions& options = {});

/// Convenience form on separate models; extras may have zero columns.
NullspaceBasis left_nullspace(const StateSpaceModel& g_u,
                              const StateSpaceModel& extras,
                              const NullspaceOptions& options = {});

/// weights * basis.filter. Throws DimensionError for a column-count mismatch
/// and InfeasibleError for rank-deficient weights.
StateSpaceModel combine_rows(const NullspaceBasis& basis, const Matrix& weights);

/// weights * N_ld * M * G[:, columns] realized from the factorization
/// directly (the internal-form channel of those columns).
StateSpaceModel projected_channel(const NullspaceBasis& basis, const Matrix& weights,
                                  std::span<const Index> columns);

/// Deterministic unit-norm 1 x rows combination for a given seed.
Matrix seeded_weights(Index rows, std::uint64_t seed);

/// max |Q [G; I]| over the grid, relative to (1 + max|G|) max(1, max|Q|),
/// where the I block covers the first n_u columns only.
double annihilation_error(const StateSpaceModel& filter, const StateSpaceModel& model,
                          Index n_u, std::span<const Index> extra_columns,
                          const FrequencyGrid& grid);

}  // namespace fdi
