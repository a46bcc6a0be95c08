#include "fdi/wafer.hpp"

#include "fdi/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <fstream>
#include <random>


namespace fdi {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMass = 4.0;         // kg
constexpr double kHalfWidth = 0.18;   // m, square plate

Matrix actuator_grid() {
  Matrix p(kWaferActuators, 2);
  Index k = 0;
  const double rows[3] = {-0.12, 0.0, 0.12};
  const int counts[3] = {4, 5, 4};
  for (int r = 0; r < 3; ++r) {
    const double half = counts[r] == 5 ? 0.16 : 0.135;
    for (int i = 0; i < counts[r]; ++i, ++k) {
      p(k, 0) = -half + 2.0 * half * i / (counts[r] - 1);
      p(k, 1) = rows[r];
    }
  }
  return p;
}

Matrix sensor_corners() {
  Matrix p(kWaferSensors, 2);
  p << -kHalfWidth, -kHalfWidth, kHalfWidth, -kHalfWidth, kHalfWidth, kHalfWidth,
      -kHalfWidth, kHalfWidth;
  return p;
}

// Low-order polynomial plate shapes on normalised coordinates.
Vector flexible_basis(double x, double y) {
  const double s = x / kHalfWidth, t = y / kHalfWidth;
  Vector b(6);
  b << s * t, s * s - t * t, s * s + t * t - 0.5, s * (t * t - 1.0 / 3.0),
      t * (s * s - 1.0 / 3.0), s * t * (s * s - t * t);
  return b;
}

Vector evaluate_shape(const Matrix& points, const std::function<double(double, double)>& f) {
  Vector v(points.rows());
  for (Index i = 0; i < points.rows(); ++i) v(i) = f(points(i, 0), points(i, 1));
  return v;
}

// (s + wz)/(s + wp) * wp/wz
StateSpaceModel lead(double wz, double wp) {
  return StateSpaceModel(Matrix::Constant(1, 1, -wp), Matrix::Ones(1, 1),
                         Matrix::Constant(1, 1, (wz - wp) * wp / wz),
                         Matrix::Constant(1, 1, wp / wz));
}

// k (1 + wi/s)
StateSpaceModel proportional_integral(double k, double wi) {
  return StateSpaceModel(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Constant(1, 1, k * wi),
                         Matrix::Constant(1, 1, k));
}

// w^2 / (s^2 + 2 z w s + w^2)
StateSpaceModel low_pass(double w, double zeta) {
  Matrix a(2, 2);
  a << 0.0, 1.0, -w * w, -2.0 * zeta * w;
  Matrix b(2, 1);
  b << 0.0, w * w;
  Matrix c(1, 2);
  c << 1.0, 0.0;
  return StateSpaceModel(a, b, c, Matrix::Zero(1, 1));
}

Matrix pinv(const Matrix& m) { return m.completeOrthogonalDecomposition().pseudoInverse(); }

Matrix dof_geometry(const Matrix& points) {
  Matrix h(points.rows(), 3);
  h.col(0).setOnes();
  h.col(1) = points.col(1);
  h.col(2) = points.col(0);
  return h;
}

}  // namespace

ModalPlantSpec wafer_plant_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModalPlantSpec spec;
  spec.seed = seed;
  spec.actuators = actuator_grid();
  spec.sensors = sensor_corners();

  const double inertia = kMass * kHalfWidth * kHalfWidth / 3.0;
  std::vector<double> rigid(3), flex(7);
  for (double& f : rigid) f = 1.0 + 4.0 * unit(rng);
  for (double& f : flex) f = 80.0 * std::pow(600.0 / 80.0, unit(rng));
  std::sort(rigid.begin(), rigid.end());
  std::sort(flex.begin(), flex.end());

  const std::function<double(double, double)> rigid_shapes[3] = {
      [](double, double) { return 1.0 / std::sqrt(kMass); },
      [inertia](double, double y) { return y / std::sqrt(inertia); },
      [inertia](double x, double) { return x / std::sqrt(inertia); }};
  std::vector<int> order = {0, 1, 2};
  std::shuffle(order.begin(), order.end(), rng);
  for (int k = 0; k < 3; ++k) {
    Mode m;
    m.freq_hz = rigid[k];
    m.damping = 0.02 + 0.03 * unit(rng);
    m.actuator_shape = evaluate_shape(spec.actuators, rigid_shapes[order[k]]);
    m.sensor_shape = evaluate_shape(spec.sensors, rigid_shapes[order[k]]);
    spec.modes.push_back(m);
  }
  for (int k = 0; k < 7; ++k) {
    Vector c(6);
    for (Index j = 0; j < 6; ++j) c(j) = normal(rng);
    c *= 0.3 / (std::sqrt(kMass) * c.norm());
    const auto shape = [&c](double x, double y) { return flexible_basis(x, y).dot(c); };
    Mode m;
    m.freq_hz = flex[k];
    m.damping = 0.02 + 0.03 * unit(rng);
    m.actuator_shape = evaluate_shape(spec.actuators, shape);
    m.sensor_shape = evaluate_shape(spec.sensors, shape);
    spec.modes.push_back(m);
  }
  return spec;
}

ModalPlantSpec perturbed(const ModalPlantSpec& spec, double pct, double damping_pct) {
  ModalPlantSpec out = spec;
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution sign(0.5);
  for (Mode& m : out.modes) {
    m.freq_hz *= 1.0 + (sign(rng) ? pct : -pct) / 100.0;
    m.damping *= 1.0 + (sign(rng) ? damping_pct : -damping_pct) / 100.0;
  }
  return out;
}

PartitionedPlant modal_plant(const ModalPlantSpec& spec) {
  const Index n = 2 * static_cast<Index>(spec.modes.size());
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, kWaferActuators);
  Matrix c = Matrix::Zero(kWaferSensors, n);
  for (std::size_t k = 0; k < spec.modes.size(); ++k) {
    const Mode& m = spec.modes[k];
    const Index i = 2 * static_cast<Index>(k);
    const double w = kTwoPi * m.freq_hz;
    // States (w q, dq/dt) keep A of order w instead of w^2.
    a(i, i + 1) = w;
    a(i + 1, i) = -w;
    a(i + 1, i + 1) = -2.0 * m.damping * w;
    b.row(i + 1) = m.actuator_shape.transpose();
    c.col(i) = kOutputUnit / w * m.sensor_shape;
  }
  // Columns: u (13), f (13 actuator + 4 sensor).
  Matrix full_b(n, 2 * kWaferActuators + kWaferSensors);
  full_b << b, b, Matrix::Zero(n, kWaferSensors);
  Matrix d = Matrix::Zero(kWaferSensors, full_b.cols());
  d.rightCols(kWaferSensors).setIdentity();
  return PartitionedPlant(StateSpaceModel(a, full_b, c, d), kWaferActuators, 0, 0,
                          kWaferActuators + kWaferSensors);
}

PartitionedPlant generate_wafer_plant(std::uint64_t seed) {
  return modal_plant(wafer_plant_spec(seed));
}

StageController design_stage_controller(const PartitionedPlant& plant, const ModalPlantSpec& spec,
                                        double bandwidth_hz, double max_sensitivity) {
  if (plant.n_u != kWaferActuators || plant.n_y() != kWaferSensors) {
    throw DimensionError("design_stage_controller: expects a 13-input, 4-output stage");
  }
  StageController out;
  out.bandwidth_hz = bandwidth_hz;
  out.t_y = pinv(dof_geometry(spec.sensors));
  out.t_u = pinv(dof_geometry(spec.actuators).transpose());

  const StateSpaceModel g_u = plant.g_u();
  const Matrix dc = out.t_y * evaluate(g_u, Complex(0.0, 0.0)).real() * out.t_u;
  const Vector diag = dc.diagonal().cwiseAbs();
  out.decoupling_ratio = (dc.cwiseAbs() - Matrix(diag.asDiagonal())).maxCoeff() / diag.minCoeff();

  const double wc = kTwoPi * bandwidth_hz;
  const CMatrix at_wc = Matrix(out.t_y).cast<Complex>() * frequency_response(g_u, wc) *
                        Matrix(out.t_u).cast<Complex>();
  StateSpaceModel blocks;
  for (Index k = 0; k < 3; ++k) {
    const StateSpaceModel shape =
        series(series(proportional_integral(1.0, wc / 5.0), lead(wc / 3.0, 3.0 * wc)),
               low_pass(6.0 * wc, 0.5));
    const double gain = 1.0 / (std::abs(at_wc(k, k)) * std::abs(frequency_response(shape, wc)(0, 0)));
    out.pid.push_back(scaled(shape, gain));
    blocks = k == 0 ? out.pid.back() : stack(blocks, out.pid.back());
  }
  out.model = premultiply(out.t_u, postmultiply(blocks, out.t_y));

  ClosedLoopSystem loop;
  try {
    loop = build_closed_loop(plant, out.model);
  } catch (const NumericalError&) {
    double abscissa = -std::numeric_limits<double>::infinity();
    for (const Complex& p : poles(feedback(g_u, out.model))) abscissa = std::max(abscissa, p.real());
    throw NumericalError("design_stage_controller: closed loop unstable, largest pole real part " +
                         std::to_string(abscissa));
  }
  out.sensitivity_peak = h_inf_norm(loop.sensitivity);
  if (!(out.sensitivity_peak < max_sensitivity)) {
    throw NumericalError("design_stage_controller: sensitivity peak " +
                         std::to_string(out.sensitivity_peak) + " exceeds " +
                         std::to_string(max_sensitivity) + " (modulus margin " +
                         std::to_string(1.0 / out.sensitivity_peak) + ")");
  }
  return out;
}

Vector fourth_order_setpoint(double stroke, double freq_hz, double sample_time) {
  if (!(freq_hz > 0.0) || !(sample_time > 0.0) || !(stroke >= 0.0)) {
    throw DimensionError("fourth_order_setpoint: need stroke >= 0, freq > 0, sample time > 0");
  }
  const double period = 1.0 / freq_hz;
  if (sample_time * 20.0 > period) {
    throw DimensionError("fourth_order_setpoint: fewer than 20 samples per period");
  }
  const Index n = static_cast<Index>(std::floor(period / sample_time + 0.5));
  Vector v(n);
  for (Index k = 0; k < n; ++k) v(k) = fourth_order_profile(k * sample_time, stroke, freq_hz);
  return v;
}

}  // namespace fdi

namespace fdi {
namespace {

constexpr double kFirstOnset = 2.5;
constexpr double kSpacing = 5.0;

Index sample_at(double t, double ts) { return static_cast<Index>(std::llround(t / ts)); }

bool designated_fired(const DecisionTrace& trace, Index k, const StructureMatrix& s, Index fault) {
  for (Index i = 0; i < s.rows(); ++i) {
    if (s(i, fault) == 1 && trace.fired(k, i) == 0) return false;
  }
  return true;
}

FaultScenario case_scenario(const CaseStudyOptions& o, double duration, bool with_faults) {
  FaultScenario s;
  s.duration = duration;
  s.sample_time = 1.0 / o.rate_hz;
  s.reference.stroke = o.stroke;
  s.reference.freq_hz = o.reference_hz;
  s.reference.direction = Vector::Constant(kWaferSensors, kOutputUnit);
  if (with_faults) {
    for (Index k = 1; k <= kWaferActuators + kWaferSensors; ++k) {
      FaultEvent e;
      e.fault = k;
      e.start = kFirstOnset + kSpacing * static_cast<double>(k - 1);
      e.end = e.start + kSpacing;
      e.magnitude = k <= kWaferActuators ? o.actuator_fault : o.sensor_fault;
      s.events.push_back(e);
    }
  }
  return s;
}

// |e(t + T) - e(t)| / |e(t)| over the last full period pair of the run.
double periodicity(const Matrix& residuals, Index period) {
  const Index n = residuals.rows();
  if (period <= 0 || n < 3 * period) return 0.0;
  const auto late = residuals.middleRows(n - period, period);
  const auto early = residuals.middleRows(n - 2 * period, period);
  const double size = late.norm();
  return size > 0.0 ? (late - early).norm() / size : 0.0;
}

void write_artifacts(CaseStudyReport& rep, const SimulationResult& run, const DecisionTrace& trace,
                     const Matrix& rms) {
  namespace fs = std::filesystem;
  const fs::path dir = rep.options.out_dir;
  fs::create_directories(dir);
  const Index nr = run.residuals.cols();
  const Index stride = std::max<Index>(1, sample_at(1e-3, 1.0 / rep.options.rate_hz));

  write_json(dir / "plant.json", to_json(rep.plant));
  write_json(dir / "controller.json", to_json(rep.controller.model));
  write_json(dir / "bank.json", to_json(rep.bank));
  {
    std::ofstream out(dir / "structure.csv");
    out << structure_to_csv(rep.bank.spec);
  }
  std::vector<std::string> header = {"t"};
  for (Index i = 0; i < nr; ++i) header.push_back("e" + std::to_string(i + 1));
  for (Index i = 0; i < nr; ++i) header.push_back("rms" + std::to_string(i + 1));
  Matrix cols(run.time.size(), 1 + 2 * nr);
  cols << run.time, run.residuals, rms;
  write_csv(dir / "residuals.csv", header, cols, stride);

  write_decisions_csv(dir / "decisions.csv", run.time, trace, stride);
  {
    std::ofstream out(dir / "plot.gp");
    out << residual_plot_script(nr, "residuals.csv", rep.thresholds);
  }
  rep.artifacts = {"plant.json",    "controller.json", "bank.json", "structure.csv",
                   "residuals.csv", "decisions.csv",   "plot.gp",   "report.json"};

  Report report;
  report.command = "case-study";
  report.inputs = {{"seed", rep.options.seed},
                   {"mismatch_pct", rep.options.mismatch_pct},
                   {"rate_hz", rep.options.rate_hz}};
  for (const FaultOutcome& f : rep.faults) {
    report.verdict("fault " + std::to_string(f.fault), f.isolated && f.signature_held,
                   "verdict " + std::to_string(f.verdict >= 0 ? f.verdict + 1 : f.verdict));
  }
  report.verdict("no false isolation", rep.false_isolations == 0);
  report.verdict("fault-free residuals below thresholds", rep.fault_free_peak_ratio < 1.0);
  bool timely = true;
  for (const FaultOutcome& f : rep.faults) {
    if (f.fault > kWaferActuators) {
      timely = timely && f.latency >= 0.0 && f.latency <= rep.options.detect_within_s;
    }
  }
  report.verdict("sensor faults detected in time", timely);
  Json faults = Json::array();
  for (const FaultOutcome& f : rep.faults) {
    faults.push_back({{"fault", f.fault},
                      {"onset", f.onset},
                      {"end", f.end},
                      {"latency", f.latency},
                      {"isolation_latency", f.isolation_latency},
                      {"verdict", f.verdict >= 0 ? f.verdict + 1 : f.verdict},
                      {"isolated", f.isolated},
                      {"signature_held", f.signature_held},
                      {"decay_ratio", f.decay_ratio}});
  }
  std::vector<double> thresholds(rep.thresholds.data(), rep.thresholds.data() + rep.thresholds.size());
  report.metrics = {{"isolated", rep.isolated_count()},
                    {"faults", static_cast<Index>(rep.faults.size())},
                    {"false_isolations", rep.false_isolations},
                    {"fault_free_peak_ratio", rep.fault_free_peak_ratio},
                    {"leakage_rms", rep.leakage_rms},
                    {"leakage_periodicity", rep.leakage_periodicity},
                    {"sensor_residuals_decay", rep.sensor_decay_pass()},
                    {"filter_order", rep.filter_order},
                    {"sensitivity_peak", rep.controller.sensitivity_peak},
                    {"decoupling_ratio", rep.controller.decoupling_ratio},
                    {"thresholds", thresholds},
                    {"per_fault", faults}};
  report.artifacts = rep.artifacts;
  write_json(dir / "report.json", report.to_json());
}

}  // namespace

Index CaseStudyReport::isolated_count() const {
  return std::count_if(faults.begin(), faults.end(), [](const FaultOutcome& f) { return f.isolated; });
}

bool CaseStudyReport::isolation_pass() const {
  if (faults.empty() || false_isolations != 0 || !(fault_free_peak_ratio < 1.0)) return false;
  for (const FaultOutcome& f : faults) {
    if (!f.isolated || !f.signature_held) return false;
    if (f.fault > kWaferActuators && (f.latency < 0.0 || f.latency > options.detect_within_s)) {
      return false;
    }
  }
  return true;
}

bool CaseStudyReport::sensor_decay_pass() const {
  bool any = false;
  for (const FaultOutcome& f : faults) {
    if (f.fault <= kWaferActuators) continue;
    any = true;
    if (!(f.decay_ratio < 0.5)) return false;
  }
  return any;
}

CaseStudyReport run_case_study(const CaseStudyOptions& options) {
  if (!(options.rate_hz > 0.0)) throw DimensionError("run_case_study: rate must be positive");
  const auto started = std::chrono::steady_clock::now();
  CaseStudyReport rep;
  rep.options = options;
  const ModalPlantSpec spec = wafer_plant_spec(options.seed);
  rep.plant = modal_plant(spec);
  rep.actual = options.mismatch_pct != 0.0 ? modal_plant(perturbed(spec, options.mismatch_pct)) : rep.plant;
  rep.controller = design_stage_controller(rep.plant, spec);

  const StructureMatrix s = make_structure(StructureKind::kWafer17, kWaferActuators + kWaferSensors);
  rep.bank = synthesize_bank(rep.plant, s);
  for (const StateSpaceModel& f : rep.bank.filters) rep.filter_order = std::max(rep.filter_order, f.states());
  const ClosedLoopSystem system = build_closed_loop(rep.plant, rep.controller.model, &rep.bank);
  const PartitionedPlant* actual = options.mismatch_pct != 0.0 ? &rep.actual : nullptr;
  const double ts = 1.0 / options.rate_hz;

  DecisionConfig config;
  config.threshold_factor = options.threshold_factor;
  const SimulationResult calibration =
      simulate(system, case_scenario(options, options.calibration_s, false), actual);
  config.thresholds = calibrate_thresholds(calibration.residuals, ts, config);
  rep.thresholds = config.thresholds;
  const Index period = sample_at(1.0 / options.reference_hz, ts);
  rep.leakage_periodicity = periodicity(calibration.residuals, period);
  const Index tail = std::min<Index>(period, calibration.residuals.rows());
  for (Index i = 0; i < calibration.residuals.cols(); ++i) {
    const double rms = calibration.residuals.col(i).tail(tail).norm() / std::sqrt(double(tail));
    rep.leakage_rms = std::max(rep.leakage_rms, rms);
  }

  const double duration = kFirstOnset + kSpacing * static_cast<double>(s.cols());
  rep.run = simulate(system, case_scenario(options, duration, true), actual);
  const DecisionTrace trace = decide(rep.run.residuals, ts, s, config);
  rep.run.decisions = trace;
  const Matrix rms = moving_rms(rep.run.residuals, window_samples(config, ts));

  const Index first = sample_at(kFirstOnset, ts);
  for (Index k = 0; k < first; ++k) {
    if (trace.isolated[static_cast<std::size_t>(k)] >= 0) ++rep.false_isolations;
    for (Index i = 0; i < rms.cols(); ++i) {
      rep.fault_free_peak_ratio = std::max(rep.fault_free_peak_ratio, rms(k, i) / config.thresholds(i));
    }
  }

  for (Index j = 0; j < s.cols(); ++j) {
    FaultOutcome f;
    f.fault = j + 1;
    f.onset = kFirstOnset + kSpacing * static_cast<double>(j);
    f.end = f.onset + kSpacing;
    const Index k0 = sample_at(f.onset, ts);
    const Index k1 = std::min<Index>(sample_at(f.end, ts), rep.run.residuals.rows());
    const Index ks = std::min(k1, k0 + sample_at(options.settle_s, ts));
    for (Index k = k0; k < k1; ++k) {
      if (designated_fired(trace, k, s, j)) {
        f.latency = static_cast<double>(k - k0) * ts;
        break;
      }
    }
    for (Index k = k0; k < k1; ++k) {
      if (trace.isolated[static_cast<std::size_t>(k)] == j) {
        f.isolation_latency = static_cast<double>(k - k0) * ts;
        break;
      }
    }
    std::vector<Index> counts(static_cast<std::size_t>(s.cols()), 0);
    bool other = false;
    for (Index k = ks; k < k1; ++k) {
      const int label = trace.isolated[static_cast<std::size_t>(k)];
      if (label >= 0) {
        ++counts[static_cast<std::size_t>(label)];
        other = other || label != j;
      }
    }
    const auto best = std::max_element(counts.begin(), counts.end());
    f.verdict = *best > 0 ? static_cast<int>(best - counts.begin()) : DecisionTrace::kNone;
    f.isolated = f.verdict == j && !other;

    const bool sensor = j >= kWaferActuators;
    const Index hold_end = sensor ? std::min(k1, k0 + sample_at(options.sensor_hold_s, ts)) : k1;
    const Index detected = f.latency < 0.0 ? k1 : k0 + sample_at(f.latency, ts);
    f.signature_held = detected < hold_end;
    for (Index k = detected; k < hold_end && f.signature_held; ++k) {
      f.signature_held = designated_fired(trace, k, s, j);
    }
    for (Index i = 0; i < s.rows(); ++i) {
      if (s(i, j) == 0) continue;
      const double peak = rms.col(i).segment(k0, k1 - k0).maxCoeff();
      if (peak > 0.0) f.decay_ratio = std::max(f.decay_ratio, rms(k1 - 1, i) / peak);
    }
    rep.faults.push_back(f);
  }

  if (!options.out_dir.empty()) write_artifacts(rep, rep.run, trace, rms);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

}  // namespace fdi
