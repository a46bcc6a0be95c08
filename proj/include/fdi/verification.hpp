#pragma once

#include <cstdint>
#include <string>

#include "fdi/closed_loop.hpp"

namespace fdi {

struct PlantDims {
  Index n_y = 2;
  Index n_u = 1;
  Index n_d = 0;
  Index n_w = 0;
  Index n_f = 1;
  Index order = 3;
};

struct RandomLoop {
  PartitionedPlant plant;
  StateSpaceModel controller;
};

/// Stable random plant and a strictly proper, full-rank stabilizing
/// controller k K0 a/(s+a). Deterministic per seed.
RandomLoop random_plant(std::uint64_t seed, const PlantDims& dims);

struct TheoremReport {
  std::string theorem;
  Index n_y = 0, n_u = 0, r_d = 0;
  Index null_open = 0;          // measured dim of the left nullspace of [G_u G_d; I 0]
  Index null_closed = 0;        // measured dim of the left nullspace of G^cl
  Index null_closed_formula = 0;
  Index basis_rows = 0;         // rows of the synthesized open-loop basis
  double decoupling = 0.0;      // max grid |R_r^cl|, |R_d^cl| relative
  double discrepancy = 0.0;     // max grid |R^ol - R^cl| over f and w, relative
  double containment = 0.0;     // max grid |Q G^cl| relative
  bool verdict = false;
};

/// Closed-loop composite [G_u C S, S G_d; C S, -C S G_d]: (r, d) -> (y, u).
StateSpaceModel closed_loop_composite(const ClosedLoopSystem& system);
/// [G_u G_d; I 0].
StateSpaceModel open_loop_composite(const PartitionedPlant& plant);

/// Requires n_y >= n_u and a controller of full normal rank.
TheoremReport check_theorem1(const PartitionedPlant& plant, const StateSpaceModel& controller);
TheoremReport check_theorem1(std::uint64_t seed, const PlantDims& dims);
/// Requires n_y < n_u and a controller of full normal rank.
TheoremReport check_theorem2(const PartitionedPlant& plant, const StateSpaceModel& controller);
TheoremReport check_theorem2(std::uint64_t seed, const PlantDims& dims);

inline constexpr double kTheoremTolerance = 1e-6;

/// Seeded dimensions in each regime: n_y >= n_u (orders 2-10) and n_y < n_u.
PlantDims square_or_tall_dims(std::uint64_t seed);
PlantDims wide_dims(std::uint64_t seed);

}  // namespace fdi
