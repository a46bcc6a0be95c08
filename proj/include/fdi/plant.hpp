#pragma once

#include <vector>

#include "fdi/lti.hpp"

namespace fdi {

/// One realization whose input columns are grouped, in order, as
/// control u, disturbance d, noise w and fault f.
struct PartitionedPlant {
  StateSpaceModel model;
  Index n_u = 0;
  Index n_d = 0;
  Index n_w = 0;
  Index n_f = 0;

  PartitionedPlant() = default;
  PartitionedPlant(StateSpaceModel model, Index n_u, Index n_d, Index n_w, Index n_f);

  Index n_y() const { return model.outputs(); }

  std::vector<Index> u_columns() const;
  std::vector<Index> d_columns() const;
  std::vector<Index> w_columns() const;
  std::vector<Index> f_columns() const;
  /// Model column of fault j (0-based).
  Index fault_column(Index j) const;

  StateSpaceModel g_u() const;
  StateSpaceModel g_d() const;
  StateSpaceModel g_w() const;
  StateSpaceModel g_f() const;
};

/// Builds a plant from separate channel models by concatenating their
/// realizations and removing the duplicated states.
PartitionedPlant make_plant(const StateSpaceModel& g_u, const StateSpaceModel& g_d,
                            const StateSpaceModel& g_w, const StateSpaceModel& g_f);

std::vector<Index> index_range(Index begin, Index count);

}  // namespace fdi
