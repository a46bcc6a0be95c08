#include "fdi/plant.hpp"

#include <numeric>

namespace fdi {

std::vector<Index> index_range(Index begin, Index count) {
  std::vector<Index> out(static_cast<std::size_t>(std::max<Index>(count, 0)));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

PartitionedPlant::PartitionedPlant(StateSpaceModel m, Index nu, Index nd, Index nw,
                                   Index nf)
    : model(std::move(m)), n_u(nu), n_d(nd), n_w(nw), n_f(nf) {
  if (n_u < 0 || n_d < 0 || n_w < 0 || n_f < 0) {
    throw DimensionError("partition sizes must be non-negative");
  }
  if (n_u + n_d + n_w + n_f != model.inputs()) {
    throw DimensionError("partition sizes " + std::to_string(n_u) + "+" +
                         std::to_string(n_d) + "+" + std::to_string(n_w) + "+" +
                         std::to_string(n_f) + " do not add up to " +
                         std::to_string(model.inputs()) + " inputs");
  }
}

std::vector<Index> PartitionedPlant::u_columns() const { return index_range(0, n_u); }
std::vector<Index> PartitionedPlant::d_columns() const { return index_range(n_u, n_d); }
std::vector<Index> PartitionedPlant::w_columns() const {
  return index_range(n_u + n_d, n_w);
}
std::vector<Index> PartitionedPlant::f_columns() const {
  return index_range(n_u + n_d + n_w, n_f);
}

Index PartitionedPlant::fault_column(Index j) const {
  if (j < 0 || j >= n_f) throw DimensionError("fault index out of range");
  return n_u + n_d + n_w + j;
}

StateSpaceModel PartitionedPlant::g_u() const { return select_inputs(model, u_columns()); }
StateSpaceModel PartitionedPlant::g_d() const { return select_inputs(model, d_columns()); }
StateSpaceModel PartitionedPlant::g_w() const { return select_inputs(model, w_columns()); }
StateSpaceModel PartitionedPlant::g_f() const { return select_inputs(model, f_columns()); }

PartitionedPlant make_plant(const StateSpaceModel& g_u, const StateSpaceModel& g_d,
                            const StateSpaceModel& g_w, const StateSpaceModel& g_f) {
  const Index p = g_u.outputs();
  auto fit = [p](const StateSpaceModel& g) {
    return g.outputs() == p ? g : StateSpaceModel::zero(p, g.inputs(), g.sample_time());
  };
  StateSpaceModel all = row_concat(row_concat(row_concat(g_u, fit(g_d)), fit(g_w)), fit(g_f));
  return {minimal_realization(all), g_u.inputs(), g_d.inputs(), g_w.inputs(), g_f.inputs()};
}

}  // namespace fdi
