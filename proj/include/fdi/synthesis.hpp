#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "fdi/factorizations.hpp"
#include "fdi/isolability.hpp"
#include "fdi/nullspace.hpp"

namespace fdi {

enum class SynthesisMode { kExact, kSoft };

struct SynthesisOptions {
  SynthesisMode mode = SynthesisMode::kExact;
  double gamma = 1.0;               // admissible noise gain
  double nonzero_threshold = 1e-6;  // fault channel norm relative to the weakest designated one
  bool normalize = true;            // void noise: weakest designated fault -> 1
  std::uint64_t seed = 1;           // row combinations use seed + row index
  double roll_off_tau = default_roll_off_tau();
  RankOptions rank;
};

/// Scalar residual filters acting on [y; u].
struct FilterBank {
  std::vector<StateSpaceModel> filters;
  StructureMatrix spec;
  StructureMatrix achieved;
  std::vector<double> gaps;   // eta per filter, +inf without a noise channel
  std::vector<double> betas;  // H-inf norm of each filter's designated fault channel
  Matrix fault_sensitivity;   // H-infinity norm of every (filter, fault) channel
  Index n_y = 0;
  Index n_u = 0;

  std::size_t size() const { return filters.size(); }
  /// Smallest per-filter beta.
  double beta() const;
};

struct GapResult {
  StateSpaceModel q3;
  double beta = 0.0;
  double eta = std::numeric_limits<double>::infinity();
  double noise_norm = 0.0;  // ||q3 noise||_inf
  bool unbounded = true;
};

/// Q3 = gamma * (co-outer factor of the noise channel)^{-1}, made proper with
/// a roll-off. `fault_channel` and `noise_channel` are the filtered channels
/// Q2 Q1 [G; 0] (one output each). A zero noise channel leaves q3 = 1 and
/// marks the gap unbounded.
GapResult optimize_gap(const StateSpaceModel& fault_channel,
                       const StateSpaceModel& noise_channel, double gamma,
                       double tau = default_roll_off_tau());

/// Same, starting from a filter q12 on [y; u] and plant columns g_f, g_w.
GapResult optimize_gap(const StateSpaceModel& q12, const StateSpaceModel& g_f,
                       const StateSpaceModel& g_w, double gamma,
                       double tau = default_roll_off_tau());

/// One filter per row of s. Exact mode decouples u, d and the faults with
/// S_ij = 0; soft mode decouples only u and d and treats those faults as
/// noise. Throws InfeasibleError naming the failing entry when the rank
/// conditions fail.
FilterBank synthesize_bank(const PartitionedPlant& plant, const StructureMatrix& s,
                           const SynthesisOptions& options = {});

/// Single residual sensitive to every fault.
FilterBank synthesize_detector(const PartitionedPlant& plant,
                               const SynthesisOptions& options = {});

}  // namespace fdi
