#include "fdi/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fdi {
namespace {

bool is_zero_channel(const StateSpaceModel& channel) {
  if (channel.inputs() == 0) return true;
  return max_abs_over_grid(channel, FrequencyGrid::standard()) <= 1e-12;
}

double column_norm(const StateSpaceModel& channel, Index j) {
  const std::vector<Index> col{j};
  return h_inf_norm(select_inputs(channel, col));
}

}  // namespace

double FilterBank::beta() const {
  if (betas.empty()) return 0.0;
  return *std::min_element(betas.begin(), betas.end());
}

GapResult optimize_gap(const StateSpaceModel& fault_channel,
                       const StateSpaceModel& noise_channel, double gamma, double tau) {
  if (!(gamma > 0.0)) throw DimensionError("optimize_gap: gamma must be positive");
  if (fault_channel.outputs() != 1 || noise_channel.outputs() != 1) {
    throw DimensionError("optimize_gap: channels must be scalar-output");
  }
  GapResult out;
  if (is_zero_channel(noise_channel)) {
    out.q3 = StateSpaceModel::identity(1);
    out.beta = fault_channel.inputs() > 0 ? h_inf_norm(fault_channel) : 0.0;
    return out;
  }
  const InnerOuterPair io = co_inner_outer(noise_channel);
  out.q3 = scaled(regularized_outer_inverse(io, tau), gamma);
  out.unbounded = false;
  out.beta = h_inf_norm_cascade(fault_channel, out.q3);
  out.noise_norm = h_inf_norm_cascade(noise_channel, out.q3);
  out.eta = out.beta / out.noise_norm;
  return out;
}

GapResult optimize_gap(const StateSpaceModel& q12, const StateSpaceModel& g_f,
                       const StateSpaceModel& g_w, double gamma, double tau) {
  const Index n_y = g_f.outputs();
  const Index n_u = q12.inputs() - n_y;
  if (n_u < 0 || g_w.outputs() != n_y) {
    throw DimensionError("optimize_gap: q12 must act on [y; u] of the plant columns");
  }
  auto channel = [&](const StateSpaceModel& g) {
    return series(col_concat(g, StateSpaceModel::zero(n_u, g.inputs())), q12);
  };
  return optimize_gap(channel(g_f), channel(g_w), gamma, tau);
}

FilterBank synthesize_bank(const PartitionedPlant& plant, const StructureMatrix& s,
                           const SynthesisOptions& options) {
  if (plant.n_u + plant.n_d == 0) {
    throw DimensionError("synthesize_bank: needs control or disturbance inputs");
  }
  if (s.cols() != plant.n_f) {
    throw DimensionError("synthesize_bank: structure does not match the fault count");
  }
  if (!(options.gamma > 0.0)) throw DimensionError("synthesize_bank: gamma must be positive");
  const bool exact = options.mode == SynthesisMode::kExact;

  if (exact) {
    const IsolabilityReport report = is_s_isolable(plant, s, options.rank);
    if (!report.isolable) {
      throw InfeasibleError("structure is not achievable: rank condition fails at " +
                            report.first_failure());
    }
  } else {
    const std::vector<RankTest> det = is_completely_detectable(plant, options.rank);
    for (Index i = 0; i < s.rows(); ++i)
      for (Index j = 0; j < s.cols(); ++j)
        if (s(i, j) == 1 && !det[static_cast<std::size_t>(j)].pass) {
          throw InfeasibleError("fault " + std::to_string(j + 1) +
                                " is not completely detectable");
        }
  }

  FilterBank bank;
  bank.spec = s;
  bank.n_y = plant.n_y();
  bank.n_u = plant.n_u;
  bank.fault_sensitivity = Matrix::Zero(s.rows(), s.cols());
  Eigen::MatrixXi achieved = Eigen::MatrixXi::Zero(s.rows(), s.cols());

  NullspaceOptions ns_options;
  ns_options.rank = options.rank;
  const std::vector<Index> faults = plant.f_columns();

  for (Index i = 0; i < s.rows(); ++i) {
    std::vector<Index> extras = plant.d_columns();
    std::vector<Index> noise = plant.w_columns();
    for (Index j : s.zeros_in_row(i)) {
      (exact ? extras : noise).push_back(plant.fault_column(j));
    }
    const NullspaceBasis basis = left_nullspace(plant.model, plant.n_u, extras, ns_options);
    const Matrix weights = basis.rows() == 1
                               ? Matrix(Matrix::Ones(1, 1))
                               : seeded_weights(basis.rows(), options.seed + static_cast<std::uint64_t>(i));
    const StateSpaceModel q12 = combine_rows(basis, weights);
    const StateSpaceModel fault_channel = projected_channel(basis, weights, faults);
    const StateSpaceModel noise_channel = projected_channel(basis, weights, noise);

    std::vector<Index> designated;
    for (Index j = 0; j < s.cols(); ++j)
      if (s(i, j) == 1) designated.push_back(j);

    StateSpaceModel filter;
    StateSpaceModel scaled_faults;
    double gap = std::numeric_limits<double>::infinity();
    if (is_zero_channel(noise_channel)) {
      double weakest = std::numeric_limits<double>::infinity();
      for (Index j : designated) weakest = std::min(weakest, column_norm(fault_channel, j));
      double c = 1.0;
      if (options.normalize && std::isfinite(weakest) && weakest > 0.0) c = 1.0 / weakest;
      filter = scaled(q12, c);
      scaled_faults = scaled(fault_channel, c);
    } else {
      const GapResult g = optimize_gap(select_inputs(fault_channel, designated),
                                       noise_channel, options.gamma, options.roll_off_tau);
      filter = series(q12, g.q3);
      scaled_faults = series(fault_channel, g.q3);
      gap = g.eta;
    }

    // Q3 is scalar, so zero columns are judged before it, relative to the
    // weakest designated fault; a large Q3 would otherwise magnify round-off.
    std::vector<double> raw(static_cast<std::size_t>(s.cols()));
    double reference = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < s.cols(); ++j) {
      raw[static_cast<std::size_t>(j)] = column_norm(fault_channel, j);
      if (s(i, j) == 1) reference = std::min(reference, raw[static_cast<std::size_t>(j)]);
    }
    if (!std::isfinite(reference) || !(reference > 0.0)) reference = 1.0;
    for (Index j = 0; j < s.cols(); ++j) {
      bank.fault_sensitivity(i, j) = column_norm(scaled_faults, j);
      achieved(i, j) = raw[static_cast<std::size_t>(j)] > options.nonzero_threshold * reference ? 1 : 0;
    }
    bank.betas.push_back(designated.empty()
                             ? 0.0
                             : h_inf_norm(select_inputs(scaled_faults, designated)));
    bank.gaps.push_back(gap);

    if (!is_stable(filter)) {
      throw NumericalError("synthesize_bank: filter " + std::to_string(i + 1) +
                           " is not stable");
    }
    const double decoupling = annihilation_error(filter, plant.model, plant.n_u,
                                                 plant.d_columns(), FrequencyGrid::standard());
    if (!(decoupling < 1e-6)) {
      std::ostringstream os;
      os << "synthesize_bank: filter " << i + 1 << " leaks control/disturbance inputs ("
         << decoupling << ")";
      throw NumericalError(os.str());
    }
    bank.filters.push_back(std::move(filter));
  }
  bank.achieved = StructureMatrix(achieved);

  if (exact && !(bank.achieved == s)) {
    for (Index i = 0; i < s.rows(); ++i)
      for (Index j = 0; j < s.cols(); ++j)
        if (achieved(i, j) != s(i, j)) {
          std::ostringstream os;
          os << "synthesize_bank: achieved structure differs at row " << i + 1 << ", fault "
             << j + 1 << " (sensitivity " << bank.fault_sensitivity(i, j) << ")";
          throw NumericalError(os.str());
        }
  }
  return bank;
}

FilterBank synthesize_detector(const PartitionedPlant& plant, const SynthesisOptions& options) {
  if (plant.n_f < 1) throw DimensionError("synthesize_detector: no fault columns");
  const std::vector<RankTest> det = is_completely_detectable(plant, options.rank);
  for (std::size_t j = 0; j < det.size(); ++j) {
    if (!det[j].pass) {
      throw InfeasibleError("fault " + std::to_string(j + 1) +
                            " is not completely detectable (rank " +
                            std::to_string(det[j].rank_with) + " vs " +
                            std::to_string(det[j].rank_without) + ")");
    }
  }
  return synthesize_bank(plant, StructureMatrix(Eigen::MatrixXi::Ones(1, plant.n_f)), options);
}

}  // namespace fdi
