#include "fdi/verification.hpp"

#include <algorithm>
#include <random>

#include <Eigen/Eigenvalues>

#include "fdi/nullspace.hpp"

namespace fdi {
namespace {

Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

FrequencyGrid check_grid(std::uint64_t seed) {
  return FrequencyGrid::standard().with_random_points(20, seed);
}

// max over the grid of |lhs - rhs| at each frequency, relative to the larger
// response there (floored at 1e-9 of the overall peak).
double relative_gap(const StateSpaceModel& lhs, const StateSpaceModel& rhs,
                    const FrequencyGrid& grid) {
  if (lhs.inputs() == 0 || lhs.outputs() == 0) return 0.0;
  ResponseEvaluator el(lhs), er(rhs);
  std::vector<double> diff, size;
  double peak = 0.0;
  for (double w : grid.points()) {
    const CMatrix a = el.at_frequency(w), b = er.at_frequency(w);
    diff.push_back((a - b).cwiseAbs().maxCoeff());
    size.push_back(std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
    peak = std::max(peak, size.back());
  }
  if (peak == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    worst = std::max(worst, diff[i] / std::max(size[i], 1e-9 * peak));
  }
  return worst;
}

// Grid maximum of |filter * composite| relative to |filter| |composite|.
double annihilation(const StateSpaceModel& filter, const StateSpaceModel& composite,
                    const FrequencyGrid& grid) {
  ResponseEvaluator ef(filter), eg(composite);
  double worst = 0.0;
  for (double w : grid.points()) {
    const CMatrix q = ef.at_frequency(w), g = eg.at_frequency(w);
    const double scale = std::max(q.cwiseAbs().maxCoeff() * g.cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, (q * g).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

void require_full_rank(const StateSpaceModel& controller) {
  const Index want = std::min(controller.inputs(), controller.outputs());
  if (normal_rank(controller) != want) {
    throw DimensionError("controller must have full normal rank");
  }
}

TheoremReport common_checks(const PartitionedPlant& plant, const StateSpaceModel& controller,
                            const char* name, std::uint64_t seed) {
  require_full_rank(controller);
  TheoremReport rep;
  rep.theorem = name;
  rep.n_y = plant.n_y();
  rep.n_u = plant.n_u;
  rep.r_d = plant.n_d > 0 ? normal_rank(plant.model, plant.d_columns()) : 0;

  const ClosedLoopSystem sys = build_closed_loop(plant, controller);
  const StateSpaceModel g_ol = open_loop_composite(plant);
  const StateSpaceModel g_cl = closed_loop_composite(sys);
  rep.null_open = g_ol.outputs() - normal_rank(g_ol);
  rep.null_closed = g_cl.outputs() - normal_rank(g_cl);

  const NullspaceBasis basis = left_nullspace(plant.model, plant.n_u, plant.d_columns());
  rep.basis_rows = basis.rows();
  const FrequencyGrid grid = check_grid(seed);
  rep.containment = annihilation(basis.filter, g_cl, grid);

  const ClosedLoopSystem with_bank = build_closed_loop(plant, controller, {basis.filter});
  const InternalForm cl = internal_form(with_bank, Formulation::kClosedLoop);
  const InternalForm ol = internal_form(with_bank, Formulation::kOpenLoop);
  rep.decoupling = std::max(annihilation(basis.filter, select_inputs(g_cl, index_range(0, rep.n_y)), grid),
                            plant.n_d > 0 ? annihilation(basis.filter,
                                                         select_inputs(g_cl, index_range(rep.n_y, plant.n_d)), grid)
                                          : 0.0);
  rep.discrepancy = std::max(relative_gap(ol.fault, cl.fault, grid),
                             relative_gap(ol.noise, cl.noise, grid));
  return rep;
}

}  // namespace

RandomLoop random_plant(std::uint64_t seed, const PlantDims& dims) {
  if (dims.order < 1) throw DimensionError("random_plant: order must be at least 1");
  if (dims.n_y < 1 || dims.n_u < 1 || dims.n_d < 0 || dims.n_w < 0 || dims.n_f < 0) {
    throw DimensionError("random_plant: need n_y, n_u >= 1 and non-negative channel counts");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> margin(0.2, 1.5);
  const Index n = dims.order, p = dims.n_y;
  const Index m = dims.n_u + dims.n_d + dims.n_w + dims.n_f;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Matrix a = gaussian(rng, n, n);
    Eigen::EigenSolver<Matrix> es(a, false);
    a -= (es.eigenvalues().real().maxCoeff() + margin(rng)) * Matrix::Identity(n, n);
    Matrix d = gaussian(rng, p, m);
    d.leftCols(dims.n_u).setZero();
    StateSpaceModel g(a, gaussian(rng, n, m), gaussian(rng, p, n), d);
    PartitionedPlant plant(g, dims.n_u, dims.n_d, dims.n_w, dims.n_f);

    const Matrix k0 = gaussian(rng, dims.n_u, p);
    const Eigen::JacobiSVD<Matrix> svd(k0);
    if (svd.singularValues().minCoeff() < 1e-3 * svd.singularValues().maxCoeff()) continue;
    const double pole = 1.0 + margin(rng);
    double gain = 1.0;
    for (int halving = 0; halving < 30; ++halving, gain /= 2.0) {
      const Matrix ac = -pole * Matrix::Identity(dims.n_u, dims.n_u);
      const Matrix bc = gain * pole * k0;
      StateSpaceModel controller(ac, bc, Matrix::Identity(dims.n_u, dims.n_u),
                                 Matrix::Zero(dims.n_u, p));
      try {
        build_closed_loop(plant, controller);
        return {plant, controller};
      } catch (const NumericalError&) {
      }
    }
  }
  throw NumericalError("random_plant: no stabilizing controller after bounded retries");
}

StateSpaceModel open_loop_composite(const PartitionedPlant& plant) {
  Matrix lower = Matrix::Zero(plant.n_u, plant.n_u + plant.n_d);
  lower.leftCols(plant.n_u).setIdentity();
  const std::vector<Index> cols = index_range(0, plant.n_u + plant.n_d);
  return col_concat(select_inputs(plant.model, cols), StateSpaceModel::gain(lower));
}

StateSpaceModel closed_loop_composite(const ClosedLoopSystem& system) {
  std::vector<Index> rows = system.rows(Measured::kOutput);
  for (Index r : system.rows(Measured::kControl)) rows.push_back(r);
  std::vector<Index> cols = system.columns(Channel::kReference);
  for (Index c : system.columns(Channel::kDisturbance)) cols.push_back(c);
  return select_inputs(select_outputs(system.map, rows), cols);
}

TheoremReport check_theorem1(const PartitionedPlant& plant, const StateSpaceModel& controller) {
  if (plant.n_y() < plant.n_u) throw DimensionError("check_theorem1: needs n_y >= n_u");
  TheoremReport rep = common_checks(plant, controller, "theorem1", 1);
  rep.null_closed_formula = rep.n_y - rep.r_d;
  rep.verdict = rep.null_open == rep.n_y - rep.r_d && rep.null_closed == rep.n_y - rep.r_d &&
                rep.basis_rows == rep.n_y - rep.r_d && rep.decoupling < kTheoremTolerance &&
                rep.discrepancy < kTheoremTolerance && rep.containment < kTheoremTolerance;
  return rep;
}

TheoremReport check_theorem2(const PartitionedPlant& plant, const StateSpaceModel& controller) {
  if (plant.n_y() >= plant.n_u) throw DimensionError("check_theorem2: needs n_y < n_u");
  TheoremReport rep = common_checks(plant, controller, "theorem2", 2);
  rep.null_closed_formula = rep.n_u - rep.r_d;
  rep.verdict = rep.null_open == rep.n_y - rep.r_d && rep.null_closed == rep.n_u - rep.r_d &&
                rep.containment < kTheoremTolerance;
  return rep;
}

TheoremReport check_theorem1(std::uint64_t seed, const PlantDims& dims) {
  if (dims.n_y < dims.n_u) throw DimensionError("check_theorem1: needs n_y >= n_u");
  const RandomLoop loop = random_plant(seed, dims);
  return check_theorem1(loop.plant, loop.controller);
}

TheoremReport check_theorem2(std::uint64_t seed, const PlantDims& dims) {
  if (dims.n_y >= dims.n_u) throw DimensionError("check_theorem2: needs n_y < n_u");
  const RandomLoop loop = random_plant(seed, dims);
  return check_theorem2(loop.plant, loop.controller);
}

PlantDims square_or_tall_dims(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dULL + 1);
  auto pick = [&rng](Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  };
  PlantDims d;
  d.n_u = pick(1, 3);
  d.n_y = pick(d.n_u, 4);
  d.n_d = pick(0, d.n_y - 1);
  d.n_w = pick(0, 1);
  d.n_f = pick(1, 2);
  d.order = pick(2, 10);
  return d;
}

PlantDims wide_dims(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 3);
  auto pick = [&rng](Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  };
  PlantDims d;
  d.n_y = pick(1, 3);
  d.n_u = pick(d.n_y + 1, 4);
  d.n_d = pick(0, d.n_y - 1);
  d.n_w = pick(0, 1);
  d.n_f = 1;
  d.order = pick(2, 10);
  return d;
}

}  // namespace fdi
