#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fdi/closed_loop.hpp"

namespace fdi {

struct Mode {
  double freq_hz = 1.0;
  double damping = 0.02;
  Vector actuator_shape;  // 13
  Vector sensor_shape;    // 4
};

/// 10 modes on a rectangular plate: three suspension modes (z, Rx, Ry)
/// followed by seven flexible ones.
struct ModalPlantSpec {
  std::uint64_t seed = 7;
  std::vector<Mode> modes;
  Matrix actuators;  // 13 x 2 positions [x y] in metres
  Matrix sensors;    // 4 x 2
};

inline constexpr Index kWaferActuators = 13;
inline constexpr Index kWaferSensors = 4;
inline constexpr double kOutputUnit = 1e3;  // outputs are in millimetres

ModalPlantSpec wafer_plant_spec(std::uint64_t seed);
/// Every modal frequency scaled by 1 +- pct/100 with a seeded sign per mode.
/// Scales each modal frequency by 1 +- pct/100 and damping by 1 +- damping_pct/100
/// with seeded signs.
ModalPlantSpec perturbed(const ModalPlantSpec& spec, double pct, double damping_pct = 20.0);
/// Modal model with fault columns [G_u, I_4].
PartitionedPlant modal_plant(const ModalPlantSpec& spec);
PartitionedPlant generate_wafer_plant(std::uint64_t seed);

struct StageController {
  Matrix t_u;                      // 13 x 3
  Matrix t_y;                      // 3 x 4
  std::vector<StateSpaceModel> pid;  // one per DOF (z, Rx, Ry)
  StateSpaceModel model;           // t_u diag(pid) t_y, 13 x 4
  double bandwidth_hz = 20.0;
  double decoupling_ratio = 0.0;   // off-diagonal / diagonal of t_y G_u(0) t_u
  double sensitivity_peak = 0.0;
};

/// Throws NumericalError with the achieved margin when the loop is unstable
/// or the sensitivity peak exceeds `max_sensitivity`.
StageController design_stage_controller(const PartitionedPlant& plant,
                                        const ModalPlantSpec& spec,
                                        double bandwidth_hz = 20.0,
                                        double max_sensitivity = 2.5);

/// Sampled fourth_order_profile over one period.
Vector fourth_order_setpoint(double stroke, double freq_hz, double sample_time);

struct CaseStudyOptions {
  std::uint64_t seed = 7;
  double mismatch_pct = 0.0;
  double rate_hz = 10000.0;
  double stroke = 100e-6;
  double reference_hz = 1.0;
  double actuator_fault = 0.1;            // N
  double sensor_fault = 0.01;             // output units (mm), i.e. 10 um
  double calibration_s = 5.0;
  double settle_s = 1.0;                  // isolation judged after this
  double threshold_factor = 2.0;          // times the fault-free 99th percentile RMS
  double detect_within_s = 0.1;
  double sensor_hold_s = 0.5;
  std::filesystem::path out_dir;          // empty: no artifacts
};

struct FaultOutcome {
  Index fault = 0;  // 1-based
  double onset = 0.0;
  double end = 0.0;
  double latency = -1.0;    // all designated residuals fired, -1 if never
  double isolation_latency = -1.0;  // first correct isolation, -1 if none
  int verdict = DecisionTrace::kNone;  // dominant isolation after settling
  bool isolated = false;    // verdict == fault and no other label after settling
  bool signature_held = false;  // designated residuals stay fired from detection on
  double decay_ratio = 0.0;     // designated residual RMS at the end over its peak
};

struct CaseStudyReport {
  CaseStudyOptions options;
  PartitionedPlant plant;
  PartitionedPlant actual;
  StageController controller;
  FilterBank bank;
  Vector thresholds;
  std::vector<FaultOutcome> faults;
  Index false_isolations = 0;     // samples with an isolation before the first fault
  double fault_free_peak_ratio = 0.0;  // max moving RMS / threshold, fault-free run
  double leakage_rms = 0.0;            // largest fault-free residual RMS
  double leakage_periodicity = 0.0;    // |e(t + T) - e(t)| / |e| over the calibration run
  Index filter_order = 0;
  SimulationResult run;
  std::vector<std::string> artifacts;
  double seconds = 0.0;

  Index isolated_count() const;
  /// No false isolation, fault-free residuals below thresholds, every fault
  /// isolated with its designated residuals held, sensor faults detected in time.
  bool isolation_pass() const;
  /// Designated residuals of every sensor fault fall below half their peak by
  /// the end of the hold.
  bool sensor_decay_pass() const;
  bool pass() const { return isolation_pass() && sensor_decay_pass(); }
};

CaseStudyReport run_case_study(const CaseStudyOptions& options);

}  // namespace fdi
