#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdi/isolability.hpp"
#include "fdi/plant.hpp"
#include "fdi/synthesis.hpp"

namespace fdi {

enum class Channel { kReference, kDisturbance, kNoise, kFault };
enum class Measured { kOutput, kControl, kResidual };

/// Plant under u = C (r - y) with an optional residual bank reading [y; u].
struct ClosedLoopSystem {
  PartitionedPlant plant;
  StateSpaceModel controller;
  std::vector<StateSpaceModel> filter_blocks;  // as given, each reading [y; u]
  StateSpaceModel filters;      // stacked blocks; no outputs without a bank
  StateSpaceModel map;          // [r; d; w; f] -> [y; u; eps]
  StateSpaceModel sensitivity;  // (I + G_u C)^{-1}

  Index n_residuals() const { return filters.outputs(); }
  std::vector<Index> columns(Channel c) const;
  std::vector<Index> rows(Measured m) const;
  StateSpaceModel response(Measured to, Channel from) const;
};

/// Filters stacked into one model with one output per filter.
StateSpaceModel stack_filters(const std::vector<StateSpaceModel>& filters);

/// Throws NumericalError when the loop is ill-posed or not internally stable.
ClosedLoopSystem build_closed_loop(const PartitionedPlant& plant,
                                   const StateSpaceModel& controller,
                                   const FilterBank* bank = nullptr);
ClosedLoopSystem build_closed_loop(const PartitionedPlant& plant,
                                   const StateSpaceModel& controller,
                                   const std::vector<StateSpaceModel>& filters);

enum class Formulation { kOpenLoop, kClosedLoop };

/// Residual maps. `drive` is R_u in open loop and R_r in closed loop.
struct InternalForm {
  StateSpaceModel drive;
  StateSpaceModel disturbance;
  StateSpaceModel noise;
  StateSpaceModel fault;
};

InternalForm internal_form(const ClosedLoopSystem& system, Formulation formulation);
InternalForm open_loop_internal_form(const PartitionedPlant& plant,
                                     const StateSpaceModel& filters);

enum class Discretization { kZoh, kTustin };

/// Continuous to discrete. Throws NumericalError for tustin when
/// I - A ts/2 is singular.
StateSpaceModel discretize(const StateSpaceModel& model, double sample_time,
                           Discretization method = Discretization::kZoh);

// ---------------------------------------------------------------------------
// Scenarios and simulation
// ---------------------------------------------------------------------------

/// Point-to-point profile with zero velocity, acceleration and jerk at the
/// ends: rise over 0.4/f, dwell 0.1/f, return over 0.4/f, dwell 0.1/f.
double fourth_order_profile(double t, double stroke, double freq_hz);

struct Reference {
  double stroke = 0.0;   // metres
  double freq_hz = 1.0;
  Vector direction;      // output units per metre of stroke; empty means no reference
  bool active() const { return direction.size() > 0 && stroke != 0.0; }
};

enum class FaultShape { kStep, kSine };

struct FaultEvent {
  Index fault = 1;  // 1-based
  double start = 0.0;
  double end = 0.0;
  double magnitude = 0.0;
  FaultShape shape = FaultShape::kStep;
  double frequency_hz = 0.0;
  double value(double t) const;
};

struct FaultScenario {
  double duration = 0.0;
  double sample_time = 1e-4;
  Reference reference;
  std::vector<FaultEvent> events;
  double noise_rms = 0.0;  // white noise on every w channel
  std::uint64_t noise_seed = 1;

  Index samples() const;
  /// Throws DimensionError for bad timing or fault indices.
  void validate(Index n_f, Index n_y) const;
};

struct DecisionConfig {
  double window_s = 0.05;
  double threshold_factor = 5.0;
  double percentile = 0.99;
  int debounce = 10;
  double threshold_floor = 1e-4;
  Vector thresholds;  // filled by calibration
};

struct DecisionTrace {
  static constexpr int kNone = -1;
  static constexpr int kAmbiguous = -2;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> fired;  // samples x residuals
  std::vector<int> isolated;  // 0-based fault, kNone or kAmbiguous
  DecisionConfig config;
  std::string pattern(Index k) const;
};

struct SimulationResult {
  Vector time;
  Matrix y;          // samples x n_y
  Matrix u;          // samples x n_u
  Matrix residuals;  // samples x bank size
  DecisionTrace decisions;
};

struct SimulationOptions {
  // kZoh discretizes plant and filter jointly so decoupling survives sampling;
  // kTustin discretizes the filters on their own, fed by sampled [y; u].
  Discretization filters = Discretization::kZoh;
};

/// Fixed-step closed-loop recursion. `actual`, when given, replaces the
/// plant used for the dynamics while the bank stays the nominal design.
SimulationResult simulate(const ClosedLoopSystem& system, const FaultScenario& scenario,
                          const PartitionedPlant* actual = nullptr,
                          const SimulationOptions& options = {});

/// Moving RMS over `window` samples per column (zeros before the start).
Matrix moving_rms(const Matrix& traces, Index window);
Index window_samples(const DecisionConfig& config, double sample_time);

/// factor x percentile of the fault-free moving RMS, floored.
Vector calibrate_thresholds(const Matrix& fault_free_residuals, double sample_time,
                            const DecisionConfig& config);

/// Fires residual i once its moving RMS exceeds threshold i for `debounce`
/// consecutive samples; isolates fault j when the fired pattern equals
/// column j of `s` and no other column.
DecisionTrace decide(const Matrix& residuals, double sample_time, const StructureMatrix& s,
                     const DecisionConfig& config);

/// Residual traces normalised by their peak over the run (display only).
Matrix normalized_residuals(const Matrix& residuals);

}  // namespace fdi
