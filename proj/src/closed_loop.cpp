#include "fdi/closed_loop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "fdi/kernels.hpp"

namespace fdi {
namespace {

// Plant with inputs [u; r; d; w; f] and outputs [e = r - y; y; u].
StateSpaceModel tracking_plant(const PartitionedPlant& plant) {
  const StateSpaceModel& g = plant.model;
  const Index n = g.states(), p = g.outputs(), nu = plant.n_u, m = g.inputs();
  const Index rest = m - nu;
  Matrix b(n, m + p);
  b << g.b().leftCols(nu), Matrix::Zero(n, p), g.b().rightCols(rest);
  Matrix c(2 * p + nu, n);
  c << -g.c(), g.c(), Matrix::Zero(nu, n);
  Matrix d = Matrix::Zero(2 * p + nu, m + p);
  d.block(0, 0, p, nu) = -g.d().leftCols(nu);
  d.block(0, nu, p, p).setIdentity();
  d.block(0, nu + p, p, rest) = -g.d().rightCols(rest);
  d.block(p, 0, p, nu) = g.d().leftCols(nu);
  d.block(p, nu + p, p, rest) = g.d().rightCols(rest);
  d.block(2 * p, 0, nu, nu).setIdentity();
  return StateSpaceModel(g.a(), b, c, d);
}

// [G; I 0]: maps plant inputs to [y; u].
StateSpaceModel output_and_control(const PartitionedPlant& plant) {
  Matrix sel = Matrix::Zero(plant.n_u, plant.model.inputs());
  sel.leftCols(plant.n_u).setIdentity();
  return col_concat(plant.model, StateSpaceModel::gain(sel));
}

void gemv(const kernels::KernelTable& k, const Matrix& a, const double* x, double* y) {
  if (a.rows() == 0 || a.cols() == 0) return;
  k.gemv(a.rows(), a.cols(), a.data(), a.rows(), x, y);
}

// Discrete update of one filter block driven by the plant state and the
// plant inputs: xi+ = phi_x x + phi xi + gamma v, eps = c xi + d_y y + d_u u.
struct FilterBlock {
  Matrix phi_x;
  Matrix phi;
  Matrix gamma;
  Matrix c;
  Matrix d_y;
  Matrix d_u;
};

FilterBlock discretize_block(const StateSpaceModel& plant, Index n_u,
                             const StateSpaceModel& filter, double ts,
                             Discretization method) {
  const Index n = plant.states(), m = plant.inputs(), p = plant.outputs();
  const Index nf = filter.states();
  const Matrix bf_y = filter.b().leftCols(p), bf_u = filter.b().rightCols(n_u);
  Matrix bv = bf_y * plant.d();
  bv.leftCols(n_u) += bf_u;
  FilterBlock out;
  out.c = filter.c();
  out.d_y = filter.d().leftCols(p);
  out.d_u = filter.d().rightCols(n_u);
  if (method == Discretization::kZoh) {
    Matrix a = Matrix::Zero(n + nf, n + nf);
    a.topLeftCorner(n, n) = plant.a();
    a.bottomLeftCorner(nf, n) = bf_y * plant.c();
    a.bottomRightCorner(nf, nf) = filter.a();
    Matrix b(n + nf, m);
    b << plant.b(), bv;
    const StateSpaceModel joint =
        discretize(StateSpaceModel(a, b, Matrix::Zero(0, n + nf), Matrix::Zero(0, m)), ts);
    out.phi_x = joint.a().bottomLeftCorner(nf, n);
    out.phi = joint.a().bottomRightCorner(nf, nf);
    out.gamma = joint.b().bottomRows(nf);
  } else {
    const StateSpaceModel fd = discretize(filter, ts, Discretization::kTustin);
    const Matrix by = fd.b().leftCols(p), bu = fd.b().rightCols(n_u);
    out.phi_x = by * plant.c();
    out.phi = fd.a();
    out.gamma = by * plant.d();
    out.gamma.leftCols(n_u) += bu;
    out.c = fd.c();
    out.d_y = fd.d().leftCols(p);
    out.d_u = fd.d().rightCols(n_u);
  }
  return out;
}

}  // namespace

std::vector<Index> ClosedLoopSystem::columns(Channel c) const {
  const Index p = plant.n_y();
  switch (c) {
    case Channel::kReference: return index_range(0, p);
    case Channel::kDisturbance: return index_range(p, plant.n_d);
    case Channel::kNoise: return index_range(p + plant.n_d, plant.n_w);
    case Channel::kFault: return index_range(p + plant.n_d + plant.n_w, plant.n_f);
  }
  return {};
}

std::vector<Index> ClosedLoopSystem::rows(Measured m) const {
  const Index p = plant.n_y();
  switch (m) {
    case Measured::kOutput: return index_range(0, p);
    case Measured::kControl: return index_range(p, plant.n_u);
    case Measured::kResidual: return index_range(p + plant.n_u, n_residuals());
  }
  return {};
}

StateSpaceModel ClosedLoopSystem::response(Measured to, Channel from) const {
  return select_inputs(select_outputs(map, rows(to)), columns(from));
}

StateSpaceModel stack_filters(const std::vector<StateSpaceModel>& filters) {
  if (filters.empty()) throw DimensionError("stack_filters: no filters");
  StateSpaceModel out = filters.front();
  for (std::size_t i = 1; i < filters.size(); ++i) out = col_concat(out, filters[i]);
  return out;
}

ClosedLoopSystem build_closed_loop(const PartitionedPlant& plant,
                                   const StateSpaceModel& controller,
                                   const std::vector<StateSpaceModel>& filters) {
  const Index p = plant.n_y(), nu = plant.n_u;
  if (controller.inputs() != p || controller.outputs() != nu) {
    throw DimensionError("build_closed_loop: controller must be n_u x n_y");
  }
  if (!same_domain(plant.model, controller)) {
    throw DimensionError("build_closed_loop: plant and controller time domains differ");
  }
  ClosedLoopSystem sys;
  sys.plant = plant;
  sys.controller = controller;
  sys.filter_blocks = filters;
  if (filters.empty()) {
    sys.filters = StateSpaceModel::zero(0, p + nu, plant.model.sample_time());
  } else {
    for (const auto& f : filters) {
      if (f.inputs() != p + nu) {
        throw DimensionError("build_closed_loop: filters must read [y; u]");
      }
    }
    sys.filters = stack_filters(filters);
  }

  const StateSpaceModel loop = close_loop(tracking_plant(plant), controller, nu, p);
  if (!is_stable(loop)) {
    throw NumericalError("build_closed_loop: closed loop is not internally stable");
  }
  sys.sensitivity = select_inputs(select_outputs(loop, index_range(0, p)), index_range(0, p));
  const StateSpaceModel yu = select_outputs(loop, index_range(p, p + nu));
  if (sys.filters.outputs() == 0) {
    sys.map = yu;
  } else {
    sys.map = series(yu, col_concat(StateSpaceModel::identity(p + nu), sys.filters));
  }
  return sys;
}

ClosedLoopSystem build_closed_loop(const PartitionedPlant& plant,
                                   const StateSpaceModel& controller, const FilterBank* bank) {
  if (bank == nullptr) return build_closed_loop(plant, controller, std::vector<StateSpaceModel>{});
  return build_closed_loop(plant, controller, bank->filters);
}

InternalForm open_loop_internal_form(const PartitionedPlant& plant,
                                     const StateSpaceModel& filters) {
  if (filters.inputs() != plant.n_y() + plant.n_u) {
    throw DimensionError("internal_form: filters must read [y; u]");
  }
  const StateSpaceModel r = series(output_and_control(plant), filters);
  return {select_inputs(r, plant.u_columns()), select_inputs(r, plant.d_columns()),
          select_inputs(r, plant.w_columns()), select_inputs(r, plant.f_columns())};
}

InternalForm internal_form(const ClosedLoopSystem& system, Formulation formulation) {
  if (formulation == Formulation::kOpenLoop) {
    return open_loop_internal_form(system.plant, system.filters);
  }
  return {system.response(Measured::kResidual, Channel::kReference),
          system.response(Measured::kResidual, Channel::kDisturbance),
          system.response(Measured::kResidual, Channel::kNoise),
          system.response(Measured::kResidual, Channel::kFault)};
}

StateSpaceModel discretize(const StateSpaceModel& model, double sample_time,
                           Discretization method) {
  if (model.is_discrete()) throw DimensionError("discretize: model is already discrete");
  if (!(sample_time > 0.0) || !std::isfinite(sample_time)) {
    throw DimensionError("discretize: sample time must be positive");
  }
  const Index n = model.states(), m = model.inputs();
  if (n == 0) return StateSpaceModel::gain(model.d(), sample_time);
  if (method == Discretization::kZoh) {
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = model.a() * sample_time;
    aug.topRightCorner(n, m) = model.b() * sample_time;
    const Matrix e = aug.exp();
    return StateSpaceModel(e.topLeftCorner(n, n), e.topRightCorner(n, m), model.c(),
                           model.d(), sample_time);
  }
  const Matrix id = Matrix::Identity(n, n);
  const Matrix left = id - model.a() * (sample_time / 2.0);
  Eigen::PartialPivLU<Matrix> lu(left);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-13)) {
    throw NumericalError("discretize: tustin map is singular (pole at 2/ts)");
  }
  const Matrix inv = lu.inverse();
  const Matrix ad = inv * (id + model.a() * (sample_time / 2.0));
  const Matrix bd = inv * model.b() * sample_time;
  const Matrix cd = model.c() * inv;
  const Matrix dd = model.d() + cd * model.b() * (sample_time / 2.0);
  return StateSpaceModel(ad, bd, cd, dd, sample_time);
}

double fourth_order_profile(double t, double stroke, double freq_hz) {
  if (!(freq_hz > 0.0)) throw DimensionError("fourth_order_profile: frequency must be positive");
  if (stroke == 0.0 || t <= 0.0) return 0.0;
  auto septic = [](double x) {
    return x * x * x * x * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
  };
  const double phase = std::fmod(t * freq_hz, 1.0);
  double s = 0.0;
  if (phase < 0.4) {
    s = septic(phase / 0.4);
  } else if (phase < 0.5) {
    s = 1.0;
  } else if (phase < 0.9) {
    s = 1.0 - septic((phase - 0.5) / 0.4);
  }
  return stroke * s;
}

double FaultEvent::value(double t) const {
  if (t < start || t >= end) return 0.0;
  if (shape == FaultShape::kSine) {
    return magnitude * std::sin(2.0 * std::numbers::pi * frequency_hz * (t - start));
  }
  return magnitude;
}

Index FaultScenario::samples() const {
  return static_cast<Index>(std::floor(duration / sample_time + 0.5)) + 1;
}

void FaultScenario::validate(Index n_f, Index n_y) const {
  if (!(duration > 0.0) || !(sample_time > 0.0) || sample_time > duration) {
    throw DimensionError("scenario: need 0 < sample_time <= duration");
  }
  if (reference.direction.size() != 0 && reference.direction.size() != n_y) {
    throw DimensionError("scenario: reference direction must have one entry per output");
  }
  if (reference.active() && !(reference.freq_hz > 0.0)) {
    throw DimensionError("scenario: reference frequency must be positive");
  }
  if (noise_rms < 0.0) throw DimensionError("scenario: noise_rms must be non-negative");
  for (const FaultEvent& e : events) {
    if (e.fault < 1 || e.fault > n_f) {
      throw DimensionError("scenario: fault index " + std::to_string(e.fault) +
                           " outside [1, " + std::to_string(n_f) + "]");
    }
    if (!(0.0 <= e.start && e.start < e.end && e.end <= duration)) {
      throw DimensionError("scenario: event for fault " + std::to_string(e.fault) +
                           " needs 0 <= start < end <= duration");
    }
    if (e.shape == FaultShape::kSine && !(e.frequency_hz > 0.0)) {
      throw DimensionError("scenario: sine fault needs a positive frequency");
    }
  }
}

SimulationResult simulate(const ClosedLoopSystem& system, const FaultScenario& scenario,
                          const PartitionedPlant* actual, const SimulationOptions& options) {
  const PartitionedPlant& nominal = system.plant;
  const PartitionedPlant& sim = actual != nullptr ? *actual : nominal;
  if (sim.n_u != nominal.n_u || sim.n_d != nominal.n_d || sim.n_w != nominal.n_w ||
      sim.n_f != nominal.n_f || sim.n_y() != nominal.n_y()) {
    throw DimensionError("simulate: perturbed plant must keep the partition");
  }
  if (sim.model.is_discrete() || system.controller.is_discrete()) {
    throw DimensionError("simulate: expects continuous plant and controller");
  }
  scenario.validate(sim.n_f, sim.n_y());
  const double ts = scenario.sample_time;
  const Index steps = scenario.samples();
  const Index p = sim.n_y(), nu = sim.n_u, m = sim.model.inputs();
  const Index f0 = nu + sim.n_d + sim.n_w;

  const StateSpaceModel plant_d = discretize(sim.model, ts);
  const StateSpaceModel ctrl_d = discretize(system.controller, ts, Discretization::kTustin);
  const Matrix d_u = sim.model.d().leftCols(nu);
  const Matrix d_rest = sim.model.d().rightCols(m - nu);
  const Matrix dc = ctrl_d.d();
  const Eigen::PartialPivLU<Matrix> loop_lu(Matrix::Identity(nu, nu) + dc * d_u);
  const bool algebraic = (dc * d_u).cwiseAbs().maxCoeff() > 0.0;

  std::vector<FilterBlock> blocks;
  for (const StateSpaceModel& f : system.filter_blocks) {
    blocks.push_back(discretize_block(sim.model, nu, f, ts, options.filters));
  }

  const kernels::KernelTable& k = kernels::active_kernels();
  SimulationResult out;
  out.time = Vector::LinSpaced(steps, 0.0, static_cast<double>(steps - 1) * ts);
  out.y.resize(steps, p);
  out.u.resize(steps, nu);
  out.residuals.resize(steps, system.n_residuals());

  Vector x = Vector::Zero(plant_d.states()), xn(x.size());
  Vector xc = Vector::Zero(ctrl_d.states()), xcn(xc.size());
  std::vector<Vector> xi, xin;
  for (const FilterBlock& b : blocks) {
    xi.push_back(Vector::Zero(b.phi.rows()));
    xin.push_back(Vector::Zero(b.phi.rows()));
  }
  Vector v = Vector::Zero(m), r = Vector::Zero(p), y(p), e(p), u(nu), rhs(nu), eps;
  std::mt19937_64 rng(scenario.noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (Index step = 0; step < steps; ++step) {
    const double t = out.time(step);
    if (scenario.reference.active()) {
      r = scenario.reference.direction *
          fourth_order_profile(t, scenario.reference.stroke, scenario.reference.freq_hz);
    }
    v.setZero();
    for (Index j = 0; j < sim.n_w; ++j) v(nu + sim.n_d + j) = scenario.noise_rms * normal(rng);
    for (const FaultEvent& ev : scenario.events) v(f0 + ev.fault - 1) += ev.value(t);

    // y without the u feedthrough, then the controller output.
    y.setZero();
    gemv(k, plant_d.c(), x.data(), y.data());
    gemv(k, d_rest, v.data() + nu, y.data());
    e = r - y;
    rhs.setZero();
    gemv(k, ctrl_d.c(), xc.data(), rhs.data());
    gemv(k, dc, e.data(), rhs.data());
    u = algebraic ? Vector(loop_lu.solve(rhs)) : rhs;
    v.head(nu) = u;
    gemv(k, d_u, u.data(), y.data());
    e = r - y;
    out.y.row(step) = y.transpose();
    out.u.row(step) = u.transpose();

    Index row = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const FilterBlock& fb = blocks[b];
      eps = Vector::Zero(fb.c.rows());
      gemv(k, fb.c, xi[b].data(), eps.data());
      gemv(k, fb.d_y, y.data(), eps.data());
      gemv(k, fb.d_u, u.data(), eps.data());
      out.residuals.block(step, row, 1, eps.size()) = eps.transpose();
      row += eps.size();

      xin[b].setZero();
      gemv(k, fb.phi_x, x.data(), xin[b].data());
      gemv(k, fb.phi, xi[b].data(), xin[b].data());
      gemv(k, fb.gamma, v.data(), xin[b].data());
      std::swap(xi[b], xin[b]);
    }

    xn.setZero();
    gemv(k, plant_d.a(), x.data(), xn.data());
    gemv(k, plant_d.b(), v.data(), xn.data());
    std::swap(x, xn);
    xcn.setZero();
    gemv(k, ctrl_d.a(), xc.data(), xcn.data());
    gemv(k, ctrl_d.b(), e.data(), xcn.data());
    std::swap(xc, xcn);
  }
  return out;
}

Index window_samples(const DecisionConfig& config, double sample_time) {
  return std::max<Index>(1, static_cast<Index>(std::lround(config.window_s / sample_time)));
}

Matrix moving_rms(const Matrix& traces, Index window) {
  if (window < 1) throw DimensionError("moving_rms: window must be positive");
  const kernels::KernelTable& k = kernels::active_kernels();
  Matrix out(traces.rows(), traces.cols());
  for (Index j = 0; j < traces.cols(); ++j) {
    k.window_sum_squares(traces.col(j).data(), static_cast<std::size_t>(traces.rows()),
                         static_cast<std::size_t>(window), out.col(j).data());
  }
  return (out / static_cast<double>(window)).cwiseSqrt();
}

Vector calibrate_thresholds(const Matrix& fault_free_residuals, double sample_time,
                            const DecisionConfig& config) {
  if (fault_free_residuals.rows() == 0) throw DimensionError("calibrate_thresholds: empty run");
  if (!(config.percentile >= 0.0 && config.percentile <= 1.0)) {
    throw DimensionError("calibrate_thresholds: percentile must lie in [0, 1]");
  }
  const Matrix rms = moving_rms(fault_free_residuals, window_samples(config, sample_time));
  Vector out(rms.cols());
  for (Index j = 0; j < rms.cols(); ++j) {
    std::vector<double> col(rms.col(j).data(), rms.col(j).data() + rms.rows());
    const auto pos = static_cast<std::size_t>(
        std::floor(config.percentile * static_cast<double>(col.size() - 1)));
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(pos), col.end());
    out(j) = std::max(config.threshold_factor * col[pos], config.threshold_floor);
  }
  return out;
}

DecisionTrace decide(const Matrix& residuals, double sample_time, const StructureMatrix& s,
                     const DecisionConfig& config) {
  const Index n = residuals.rows(), q = residuals.cols();
  if (q != s.rows()) throw DimensionError("decide: residual count must equal rows of S");
  if (config.thresholds.size() != q) {
    throw DimensionError("decide: one threshold per residual is required");
  }
  DecisionTrace trace;
  trace.config = config;
  trace.fired.setZero(n, q);
  trace.isolated.assign(static_cast<std::size_t>(n), DecisionTrace::kNone);
  const Matrix rms = moving_rms(residuals, window_samples(config, sample_time));
  const int debounce = std::max(config.debounce, 1);
  for (Index i = 0; i < q; ++i) {
    int run = 0;
    for (Index t = 0; t < n; ++t) {
      run = rms(t, i) > config.thresholds(i) ? run + 1 : 0;
      trace.fired(t, i) = run >= debounce ? 1 : 0;
    }
  }
  for (Index t = 0; t < n; ++t) {
    if (trace.fired.row(t).cast<int>().sum() == 0) continue;
    int match = DecisionTrace::kNone;
    int count = 0;
    for (Index j = 0; j < s.cols(); ++j) {
      bool equal = true;
      for (Index i = 0; i < q && equal; ++i) equal = trace.fired(t, i) == s(i, j);
      if (equal) {
        match = static_cast<int>(j);
        ++count;
      }
    }
    trace.isolated[static_cast<std::size_t>(t)] = count == 1 ? match : DecisionTrace::kAmbiguous;
  }
  return trace;
}

std::string DecisionTrace::pattern(Index k) const {
  std::string out(static_cast<std::size_t>(fired.cols()), '0');
  for (Index i = 0; i < fired.cols(); ++i) {
    if (fired(k, i) != 0) out[static_cast<std::size_t>(i)] = '1';
  }
  return out;
}

Matrix normalized_residuals(const Matrix& residuals) {
  Matrix out = residuals;
  for (Index j = 0; j < out.cols(); ++j) {
    const double peak = out.col(j).cwiseAbs().maxCoeff();
    if (peak > 0.0) out.col(j) /= peak;
  }
  return out;
}

}  // namespace fdi
