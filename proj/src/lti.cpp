#include "fdi/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace fdi {
namespace {

constexpr double kSingularResolvent = 1e-13;

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_domain(const StateSpaceModel& lhs, const StateSpaceModel& rhs,
                         const char* what) {
  if (!same_domain(lhs, rhs)) {
    throw DimensionError(std::string(what) +
                         ": models live in different time domains");
  }
}

Matrix block_diag(const Matrix& lhs, const Matrix& rhs) {
  Matrix out = Matrix::Zero(lhs.rows() + rhs.rows(), lhs.cols() + rhs.cols());
  out.topLeftCorner(lhs.rows(), lhs.cols()) = lhs;
  out.bottomRightCorner(rhs.rows(), rhs.cols()) = rhs;
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), std::max(top.cols(), bottom.cols()));
  out << top, bottom;
  return out;
}

Matrix hstack(const Matrix& left, const Matrix& right) {
  Matrix out(std::max(left.rows(), right.rows()), left.cols() + right.cols());
  out << left, right;
  return out;
}

Complex boundary_point(const StateSpaceModel& model, double omega) {
  if (model.is_discrete()) {
    return std::polar(1.0, omega * *model.sample_time());
  }
  return {0.0, omega};
}

double largest_singular_value(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

double smallest_singular_value(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

// Orthogonal staircase: returns the basis of the controllable subspace of
// (a, b) as the leading columns of an orthogonal transform.
std::pair<Matrix, Index> controllable_basis(const Matrix& a, const Matrix& b,
                                            double tolerance) {
  const Index n = a.rows();
  Matrix transform = Matrix::Identity(n, n);
  if (n == 0) return {transform, 0};
  Matrix at = a;
  const double scale =
      std::max({a.norm(), b.norm(), std::numeric_limits<double>::min()});
  Matrix input = b;
  Index offset = 0;
  while (offset < n && input.cols() > 0) {
    const Index remaining = n - offset;
    Eigen::JacobiSVD<Matrix> svd(input, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > tolerance * scale) ++rank;
    }
    if (rank == 0) break;
    Matrix u = Matrix::Identity(n, n);
    u.bottomRightCorner(remaining, remaining) = svd.matrixU();
    at = u.transpose() * at * u;
    transform = transform * u;
    const Index found = offset + rank;
    if (found >= n) {
      offset = n;
      break;
    }
    input = at.block(found, offset, n - found, rank);
    offset = found;
  }
  return {transform, offset};
}

}  // namespace

StateSpaceModel::StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d,
                                 std::optional<double> sample_time)
    : a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)),
      d_(std::move(d)),
      sample_time_(sample_time) {
  const Index n = a_.rows();
  if (a_.cols() != n) {
    throw DimensionError("state matrix must be square, got " + dims(a_));
  }
  if (b_.rows() != n || c_.cols() != n || c_.rows() != d_.rows() ||
      b_.cols() != d_.cols()) {
    throw DimensionError("inconsistent realization: a " + dims(a_) + ", b " +
                         dims(b_) + ", c " + dims(c_) + ", d " + dims(d_));
  }
  if (!a_.allFinite() || !b_.allFinite() || !c_.allFinite() || !d_.allFinite()) {
    throw DimensionError("realization contains non-finite entries");
  }
  if (sample_time_ && !(*sample_time_ > 0.0 && std::isfinite(*sample_time_))) {
    throw DimensionError("sample time must be positive and finite");
  }
}

StateSpaceModel StateSpaceModel::gain(Matrix d, std::optional<double> sample_time) {
  const Index p = d.rows();
  const Index m = d.cols();
  return {Matrix(0, 0), Matrix(0, m), Matrix(p, 0), std::move(d), sample_time};
}

StateSpaceModel StateSpaceModel::zero(Index outputs, Index inputs,
                                      std::optional<double> sample_time) {
  return gain(Matrix::Zero(outputs, inputs), sample_time);
}

StateSpaceModel StateSpaceModel::identity(Index size,
                                          std::optional<double> sample_time) {
  return gain(Matrix::Identity(size, size), sample_time);
}

bool same_domain(const StateSpaceModel& lhs, const StateSpaceModel& rhs) {
  if (lhs.is_discrete() != rhs.is_discrete()) return false;
  if (!lhs.is_discrete()) return true;
  const double tl = *lhs.sample_time();
  const double tr = *rhs.sample_time();
  return std::abs(tl - tr) <= 1e-12 * std::max(tl, tr);
}

// ---------------------------------------------------------------------------

CMatrix evaluate(const StateSpaceModel& model, Complex s) {
  const Index n = model.states();
  CMatrix out = model.d().cast<Complex>();
  if (n == 0) return out;
  CMatrix resolvent = -model.a().cast<Complex>();
  resolvent.diagonal().array() += s;
  Eigen::PartialPivLU<CMatrix> lu(resolvent);
  if (!(lu.rcond() > kSingularResolvent)) {
    std::ostringstream os;
    os << "evaluation point " << s << " is numerically a pole (rcond "
       << lu.rcond() << ")";
    throw NumericalError(os.str());
  }
  out += model.c().cast<Complex>() * lu.solve(model.b().cast<Complex>());
  return out;
}

CMatrix frequency_response(const StateSpaceModel& model, double omega) {
  return evaluate(model, boundary_point(model, omega));
}

ResponseEvaluator::ResponseEvaluator(const StateSpaceModel& original)
    : d_(original.d()), sample_time_(original.sample_time()) {
  const StateSpaceModel model = balanced(original);
  const Index n = model.states();
  if (n == 0) {
    hessenberg_ = Matrix(0, 0);
    b_ = Matrix(0, model.inputs());
    c_ = Matrix(model.outputs(), 0);
    return;
  }
  Eigen::HessenbergDecomposition<Matrix> hd(model.a());
  hessenberg_ = hd.matrixH();
  const Matrix q = hd.matrixQ();
  b_ = q.transpose() * model.b();
  c_ = model.c() * q;
  scale_ = std::max(hessenberg_.norm(), 1.0);
}

CMatrix ResponseEvaluator::at(Complex s) const {
  const Index n = hessenberg_.rows();
  CMatrix out = d_.cast<Complex>();
  if (n == 0) return out;
  CMatrix m = -hessenberg_.cast<Complex>();
  m.diagonal().array() += s;
  CMatrix rhs = b_.cast<Complex>();
  // Gaussian elimination with partial pivoting specialised to the single
  // subdiagonal of an upper Hessenberg matrix.
  for (Index k = 0; k + 1 < n; ++k) {
    if (std::abs(m(k + 1, k)) > std::abs(m(k, k))) {
      m.row(k).segment(k, n - k).swap(m.row(k + 1).segment(k, n - k));
      rhs.row(k).swap(rhs.row(k + 1));
    }
    if (m(k + 1, k) == Complex(0.0)) continue;
    const Complex factor = m(k + 1, k) / m(k, k);
    m.row(k + 1).segment(k, n - k) -= factor * m.row(k).segment(k, n - k);
    rhs.row(k + 1) -= factor * rhs.row(k);
  }
  const double threshold = kSingularResolvent * std::max(scale_, std::abs(s));
  for (Index k = 0; k < n; ++k) {
    if (!(std::abs(m(k, k)) > threshold)) {
      std::ostringstream os;
      os << "evaluation point " << s << " is numerically a pole";
      throw NumericalError(os.str());
    }
  }
  m.triangularView<Eigen::Upper>().solveInPlace(rhs);
  out += c_.cast<Complex>() * rhs;
  return out;
}

CMatrix ResponseEvaluator::at_frequency(double omega) const {
  if (sample_time_) return at(std::polar(1.0, omega * *sample_time_));
  return at({0.0, omega});
}

std::vector<Complex> poles(const StateSpaceModel& model) {
  if (model.states() == 0) return {};
  // Balance A alone; B and C weights can distort the spectrum of models with
  // uncontrollable or unobservable parts.
  const Index n = model.states();
  const StateSpaceModel bare(model.a(), Matrix(n, 0), Matrix(0, n), Matrix(0, 0));
  Eigen::EigenSolver<Matrix> es(balanced(bare).a(), false);
  const CVector& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

bool is_stable(const StateSpaceModel& model, double margin) {
  for (const Complex& p : poles(model)) {
    if (model.is_discrete()) {
      if (!(std::abs(p) < 1.0 - margin)) return false;
    } else if (!(p.real() < -margin)) {
      return false;
    }
  }
  return true;
}

std::vector<Complex> transmission_zeros(const StateSpaceModel& model) {
  if (model.inputs() != model.outputs()) {
    throw DimensionError("transmission zeros require a square system");
  }
  const Index n = model.states();
  const Index m = model.inputs();
  if (n == 0) return {};
  Matrix pencil(n + m, n + m);
  pencil << model.a(), model.b(), model.c(), model.d();
  Matrix mass = Matrix::Zero(n + m, n + m);
  mass.topLeftCorner(n, n).setIdentity();
  Eigen::GeneralizedEigenSolver<Matrix> ges(pencil, mass, false);
  std::vector<Complex> zeros;
  const double scale = std::max(pencil.norm(), 1.0);
  for (Index i = 0; i < ges.alphas().size(); ++i) {
    const Complex alpha = ges.alphas()(i);
    const double beta = ges.betas()(i);
    if (std::abs(beta) * scale * 1e10 > std::abs(alpha) &&
        std::abs(beta) > 1e-12) {
      zeros.push_back(alpha / beta);
    }
  }
  return zeros;
}

// ---------------------------------------------------------------------------

StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second) {
  require_same_domain(first, second, "series");
  if (first.outputs() != second.inputs()) {
    throw DimensionError("series: first has " + std::to_string(first.outputs()) +
                         " outputs, second expects " +
                         std::to_string(second.inputs()) + " inputs");
  }
  const Index n1 = first.states();
  const Index n2 = second.states();
  Matrix a = Matrix::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = first.a();
  a.bottomLeftCorner(n2, n1) = second.b() * first.c();
  a.bottomRightCorner(n2, n2) = second.a();
  Matrix b = vstack(first.b(), second.b() * first.d());
  Matrix c = hstack(second.d() * first.c(), second.c());
  Matrix d = second.d() * first.d();
  return {std::move(a), std::move(b), std::move(c), std::move(d),
          first.sample_time()};
}

StateSpaceModel parallel(const StateSpaceModel& lhs, const StateSpaceModel& rhs) {
  require_same_domain(lhs, rhs, "parallel");
  if (lhs.inputs() != rhs.inputs() || lhs.outputs() != rhs.outputs()) {
    throw DimensionError("parallel: dimension mismatch");
  }
  return {block_diag(lhs.a(), rhs.a()), vstack(lhs.b(), rhs.b()),
          hstack(lhs.c(), rhs.c()), lhs.d() + rhs.d(), lhs.sample_time()};
}

StateSpaceModel row_concat(const StateSpaceModel& lhs, const StateSpaceModel& rhs) {
  require_same_domain(lhs, rhs, "row_concat");
  if (lhs.outputs() != rhs.outputs()) {
    throw DimensionError("row_concat: output counts differ");
  }
  return {block_diag(lhs.a(), rhs.a()), block_diag(lhs.b(), rhs.b()),
          hstack(lhs.c(), rhs.c()), hstack(lhs.d(), rhs.d()), lhs.sample_time()};
}

StateSpaceModel col_concat(const StateSpaceModel& lhs, const StateSpaceModel& rhs) {
  require_same_domain(lhs, rhs, "col_concat");
  if (lhs.inputs() != rhs.inputs()) {
    throw DimensionError("col_concat: input counts differ");
  }
  return {block_diag(lhs.a(), rhs.a()), vstack(lhs.b(), rhs.b()),
          block_diag(lhs.c(), rhs.c()), vstack(lhs.d(), rhs.d()),
          lhs.sample_time()};
}

StateSpaceModel stack(const StateSpaceModel& lhs, const StateSpaceModel& rhs) {
  require_same_domain(lhs, rhs, "stack");
  return {block_diag(lhs.a(), rhs.a()), block_diag(lhs.b(), rhs.b()),
          block_diag(lhs.c(), rhs.c()), block_diag(lhs.d(), rhs.d()),
          lhs.sample_time()};
}

StateSpaceModel close_loop(const StateSpaceModel& plant,
                           const StateSpaceModel& controller, Index fed_inputs,
                           Index measured_outputs) {
  require_same_domain(plant, controller, "close_loop");
  if (controller.inputs() != measured_outputs ||
      controller.outputs() != fed_inputs || fed_inputs > plant.inputs() ||
      measured_outputs > plant.outputs()) {
    throw DimensionError("close_loop: controller does not fit the plant ports");
  }
  const Index n = plant.states();
  const Index nk = controller.states();
  const Index nv = fed_inputs;
  const Index nm = measured_outputs;
  const Index nw = plant.inputs() - nv;
  const Index nz = plant.outputs();

  const Matrix b1 = plant.b().leftCols(nv);
  const Matrix b2 = plant.b().rightCols(nw);
  const Matrix c1 = plant.c().topRows(nm);
  const Matrix d11 = plant.d().topLeftCorner(nm, nv);
  const Matrix d12 = plant.d().topRightCorner(nm, nw);

  const Matrix loop = Matrix::Identity(nm, nm) - d11 * controller.d();
  Eigen::FullPivLU<Matrix> lu(loop);
  if (nm > 0 && (!lu.isInvertible() || lu.rcond() < 1e-12)) {
    throw NumericalError("close_loop: algebraic loop is ill-posed");
  }
  const Matrix f = nm > 0 ? Matrix(lu.inverse()) : Matrix(0, 0);

  // Measured output and controller output as maps of [x; xi; w].
  Matrix zm(nm, n + nk + nw);
  zm << f * c1, f * d11 * controller.c(), f * d12;
  Matrix v(nv, n + nk + nw);
  v << controller.d() * f * c1,
      controller.c() + controller.d() * f * d11 * controller.c(),
      controller.d() * f * d12;

  Matrix a = Matrix::Zero(n + nk, n + nk);
  a.topLeftCorner(n, n) = plant.a();
  a.bottomRightCorner(nk, nk) = controller.a();
  a.topRows(n) += b1 * v.leftCols(n + nk);
  a.bottomRows(nk) += controller.b() * zm.leftCols(n + nk);

  Matrix b = Matrix::Zero(n + nk, nw);
  b.topRows(n) = b2 + b1 * v.rightCols(nw);
  b.bottomRows(nk) = controller.b() * zm.rightCols(nw);

  // All plant outputs: z = C x + D [v; w].
  Matrix zc(nz, n + nk + nw);
  zc.setZero();
  zc.leftCols(n) = plant.c();
  zc.rightCols(nw) = plant.d().rightCols(nw);
  zc += plant.d().leftCols(nv) * v;

  Matrix c(nz + nv, n + nk);
  c << zc.leftCols(n + nk), v.leftCols(n + nk);
  Matrix d(nz + nv, nw);
  d << zc.rightCols(nw), v.rightCols(nw);
  return {std::move(a), std::move(b), std::move(c), std::move(d),
          plant.sample_time()};
}

StateSpaceModel feedback(const StateSpaceModel& plant,
                         const StateSpaceModel& controller) {
  require_same_domain(plant, controller, "feedback");
  const Index p = plant.outputs();
  const Index m = plant.inputs();
  if (controller.inputs() != p || controller.outputs() != m) {
    throw DimensionError("feedback: controller must map plant outputs to inputs");
  }
  // Augmented plant: inputs [v; r] with u = v + r, outputs [y; y].
  Matrix b(plant.states(), 2 * m);
  b << plant.b(), plant.b();
  Matrix c(2 * p, plant.states());
  c << plant.c(), plant.c();
  Matrix d(2 * p, 2 * m);
  d << plant.d(), plant.d(), plant.d(), plant.d();
  StateSpaceModel augmented(plant.a(), b, c, d, plant.sample_time());
  StateSpaceModel loop;
  try {
    loop = close_loop(augmented, scaled(controller, -1.0), m, p);
  } catch (const NumericalError&) {
    throw NumericalError("feedback: I + P(inf) K(inf) is singular (ill-posed loop)");
  }
  std::vector<Index> rows(p);
  for (Index i = 0; i < p; ++i) rows[i] = p + i;
  return select_outputs(loop, rows);
}

StateSpaceModel connect(Connection kind, std::span<const StateSpaceModel> parts) {
  if (parts.empty()) throw DimensionError("connect: no parts given");
  if (kind == Connection::kFeedback) {
    if (parts.size() != 2) {
      throw DimensionError("connect: feedback takes exactly two parts");
    }
    return feedback(parts[0], parts[1]);
  }
  StateSpaceModel out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    switch (kind) {
      case Connection::kSeries: out = series(out, parts[i]); break;
      case Connection::kRowConcat: out = row_concat(out, parts[i]); break;
      case Connection::kColConcat: out = col_concat(out, parts[i]); break;
      case Connection::kStack: out = stack(out, parts[i]); break;
      case Connection::kFeedback: break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

StateSpaceModel transpose(const StateSpaceModel& model) {
  return {model.a().transpose(), model.c().transpose(), model.b().transpose(),
          model.d().transpose(), model.sample_time()};
}

StateSpaceModel scaled(const StateSpaceModel& model, double factor) {
  return {model.a(), model.b(), factor * model.c(), factor * model.d(),
          model.sample_time()};
}

StateSpaceModel premultiply(const Matrix& weights, const StateSpaceModel& model) {
  if (weights.cols() != model.outputs()) {
    throw DimensionError("premultiply: weight columns must equal outputs");
  }
  return {model.a(), model.b(), weights * model.c(), weights * model.d(),
          model.sample_time()};
}

StateSpaceModel postmultiply(const StateSpaceModel& model, const Matrix& weights) {
  if (weights.rows() != model.inputs()) {
    throw DimensionError("postmultiply: weight rows must equal inputs");
  }
  return {model.a(), model.b() * weights, model.c(), model.d() * weights,
          model.sample_time()};
}

StateSpaceModel select_inputs(const StateSpaceModel& model,
                              std::span<const Index> columns) {
  Matrix b(model.states(), static_cast<Index>(columns.size()));
  Matrix d(model.outputs(), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const Index col = columns[j];
    if (col < 0 || col >= model.inputs()) {
      throw DimensionError("select_inputs: column index out of range");
    }
    b.col(static_cast<Index>(j)) = model.b().col(col);
    d.col(static_cast<Index>(j)) = model.d().col(col);
  }
  return {model.a(), std::move(b), model.c(), std::move(d), model.sample_time()};
}

StateSpaceModel select_outputs(const StateSpaceModel& model,
                               std::span<const Index> rows) {
  Matrix c(static_cast<Index>(rows.size()), model.states());
  Matrix d(static_cast<Index>(rows.size()), model.inputs());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index row = rows[i];
    if (row < 0 || row >= model.outputs()) {
      throw DimensionError("select_outputs: row index out of range");
    }
    c.row(static_cast<Index>(i)) = model.c().row(row);
    d.row(static_cast<Index>(i)) = model.d().row(row);
  }
  return {model.a(), model.b(), std::move(c), std::move(d), model.sample_time()};
}

StateSpaceModel inverse(const StateSpaceModel& model) {
  if (model.inputs() != model.outputs()) {
    throw DimensionError("inverse: system must be square");
  }
  Eigen::FullPivLU<Matrix> lu(model.d());
  if (!lu.isInvertible() || lu.rcond() < 1e-12) {
    throw NumericalError("inverse: feedthrough matrix is singular");
  }
  const Matrix dinv = lu.inverse();
  return {model.a() - model.b() * dinv * model.c(), model.b() * dinv,
          -dinv * model.c(), dinv, model.sample_time()};
}

StateSpaceModel balanced(const StateSpaceModel& model) {
  const Index n = model.states();
  if (n == 0) return model;
  Matrix a = model.a(), b = model.b(), c = model.c();
  // Input and output weights are normalised so that rescaling B or C does
  // not change the chosen similarity.
  const double a_size = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  const double b_weight = b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0 ? a_size / b.cwiseAbs().maxCoeff() : 0.0;
  const double c_weight = c.size() > 0 && c.cwiseAbs().maxCoeff() > 0.0 ? a_size / c.cwiseAbs().maxCoeff() : 0.0;
  // Block-triangular A has no balancing equilibrium and the scales would
  // drift without bound, so each state's exponent is clamped.
  constexpr int kMaxExponent = 24;
  std::vector<int> exponent(static_cast<std::size_t>(n), 0);
  bool changed = true;
  for (int sweep = 0; changed && sweep < 100; ++sweep) {
    changed = false;
    for (Index i = 0; i < n; ++i) {
      const double col = a.col(i).lpNorm<1>() - std::abs(a(i, i)) + c_weight * c.col(i).lpNorm<1>();
      const double row = a.row(i).lpNorm<1>() - std::abs(a(i, i)) + b_weight * b.row(i).lpNorm<1>();
      if (col == 0.0 || row == 0.0) continue;
      int& e = exponent[static_cast<std::size_t>(i)];
      int step = 0;
      double f = 1.0, cs = col, rs = row;
      while (cs < rs / 2.0 && e + step < kMaxExponent) { cs *= 2.0; rs /= 2.0; f *= 2.0; ++step; }
      while (cs >= rs * 2.0 && e + step > -kMaxExponent) { cs /= 2.0; rs *= 2.0; f /= 2.0; --step; }
      if (step != 0 && cs + rs < 0.95 * (col + row)) {
        e += step;
        a.col(i) *= f;
        c.col(i) *= f;
        a.row(i) /= f;
        b.row(i) /= f;
        changed = true;
      }
    }
  }
  return StateSpaceModel(a, b, c, model.d(), model.sample_time());
}

StateSpaceModel similarity_transform(const StateSpaceModel& model,
                                     const Matrix& transform) {
  Eigen::FullPivLU<Matrix> lu(transform);
  if (!lu.isInvertible()) {
    throw NumericalError("similarity_transform: transform is singular");
  }
  const Matrix tinv = lu.inverse();
  return {tinv * model.a() * transform, tinv * model.b(), model.c() * transform,
          model.d(), model.sample_time()};
}

StateSpaceModel minimal_realization(const StateSpaceModel& model, double tolerance) {
  if (model.states() == 0) return model;
  auto [tc, nc] = controllable_basis(model.a(), model.b(), tolerance);
  const Matrix vc = tc.leftCols(nc);
  Matrix a = vc.transpose() * model.a() * vc;
  Matrix b = vc.transpose() * model.b();
  Matrix c = model.c() * vc;
  auto [to, no] = controllable_basis(a.transpose(), c.transpose(), tolerance);
  const Matrix vo = to.leftCols(no);
  return {vo.transpose() * a * vo, vo.transpose() * b, c * vo, model.d(),
          model.sample_time()};
}

// ---------------------------------------------------------------------------

FrequencyGrid::FrequencyGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw DimensionError("frequency grid must not be empty");
  std::sort(points_.begin(), points_.end());
  points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  for (double w : points_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw DimensionError("frequency grid points must be positive and finite");
    }
  }
}

FrequencyGrid FrequencyGrid::log_spaced(double low, double high, std::size_t count) {
  if (!(low > 0.0) || !(high > low) || count < 2) {
    throw DimensionError("log_spaced: need 0 < low < high and count >= 2");
  }
  std::vector<double> pts(count);
  const double l0 = std::log10(low);
  const double step = (std::log10(high) - l0) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    pts[i] = std::pow(10.0, l0 + step * static_cast<double>(i));
  }
  pts.back() = high;
  return FrequencyGrid(std::move(pts));
}

FrequencyGrid FrequencyGrid::standard() {
  static const FrequencyGrid grid = log_spaced(1e-2, 1e5, 400);
  return grid;
}

FrequencyGrid FrequencyGrid::with_random_points(std::size_t count,
                                                std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(std::log10(points_.front()),
                                             std::log10(points_.back()));
  std::vector<double> pts = points_;
  for (std::size_t i = 0; i < count; ++i) pts.push_back(std::pow(10.0, uni(rng)));
  return FrequencyGrid(std::move(pts));
}

FrequencyGrid FrequencyGrid::restricted_to(const StateSpaceModel& model) const {
  if (!model.is_discrete()) return *this;
  const double nyquist = std::numbers::pi / *model.sample_time();
  std::vector<double> pts;
  for (double w : points_) {
    if (w < nyquist) pts.push_back(w);
  }
  if (pts.empty()) pts.push_back(0.5 * nyquist);
  return FrequencyGrid(std::move(pts));
}

std::vector<double> singular_value_peaks(const StateSpaceModel& model,
                                         const FrequencyGrid& grid) {
  const FrequencyGrid g = grid.restricted_to(model);
  ResponseEvaluator eval(model);
  std::vector<double> out;
  out.reserve(g.size());
  for (double w : g.points()) out.push_back(largest_singular_value(eval.at_frequency(w)));
  return out;
}

namespace {

// Peak of a frequency-wise gain: grid, the given edge values, then
// golden-section refinement around the strongest local maxima.
template <typename Gain>
double peak_gain(const Gain& gain, const std::vector<double>& pts, double edges) {
  std::vector<double> values(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) values[i] = gain(pts[i]);
  double best = std::max(edges, *std::max_element(values.begin(), values.end()));

  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool left = i == 0 || values[i] >= values[i - 1];
    const bool right = i + 1 == pts.size() || values[i] >= values[i + 1];
    if (left && right) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(),
            [&](std::size_t l, std::size_t r) { return values[l] > values[r]; });
  if (peaks.size() > 8) peaks.resize(8);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t k : peaks) {
    double lo = std::log(pts[k > 0 ? k - 1 : k]);
    double hi = std::log(pts[k + 1 < pts.size() ? k + 1 : k]);
    if (hi <= lo) continue;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = gain(std::exp(x1));
    double f2 = gain(std::exp(x2));
    for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = gain(std::exp(x2));
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = gain(std::exp(x1));
      }
    }
    best = std::max({best, f1, f2});
  }
  return best;
}

}  // namespace

double h_inf_norm(const StateSpaceModel& model, const FrequencyGrid& grid) {
  if (!is_stable(model)) {
    double abscissa = -std::numeric_limits<double>::infinity();
    for (const Complex& p : poles(model)) abscissa = std::max(abscissa, p.real());
    throw NumericalError("h_inf_norm: model is not stable (largest pole real part " +
                         std::to_string(abscissa) + ")");
  }
  if (model.outputs() == 0 || model.inputs() == 0) return 0.0;
  const FrequencyGrid g = grid.restricted_to(model);
  ResponseEvaluator eval(model);
  auto gain = [&](double w) { return largest_singular_value(eval.at_frequency(w)); };
  double edges = gain(0.0);
  if (model.is_discrete()) {
    edges = std::max(edges, gain(std::numbers::pi / *model.sample_time()));
  } else {
    edges = std::max(edges, largest_singular_value(model.d().cast<Complex>()));
  }
  return peak_gain(gain, g.points(), edges);
}

double h_inf_norm_cascade(const StateSpaceModel& first, const StateSpaceModel& second,
                          const FrequencyGrid& grid) {
  if (second.inputs() != first.outputs() || first.sample_time() != second.sample_time()) {
    throw DimensionError("h_inf_norm_cascade: incompatible models");
  }
  if (!is_stable(first) || !is_stable(second)) {
    throw NumericalError("h_inf_norm_cascade: model is not stable");
  }
  if (second.outputs() == 0 || first.inputs() == 0) return 0.0;
  const FrequencyGrid g = grid.restricted_to(first);
  ResponseEvaluator e1(first), e2(second);
  auto gain = [&](double w) {
    return largest_singular_value(e2.at_frequency(w) * e1.at_frequency(w));
  };
  double edges = gain(0.0);
  if (first.is_discrete()) {
    edges = std::max(edges, gain(std::numbers::pi / *first.sample_time()));
  } else {
    edges = std::max(edges, largest_singular_value((second.d() * first.d()).cast<Complex>()));
  }
  return peak_gain(gain, g.points(), edges);
}

double h_minus_over_grid(const StateSpaceModel& model, const FrequencyGrid& grid) {
  if (model.outputs() == 0 || model.inputs() == 0) return 0.0;
  const FrequencyGrid g = grid.restricted_to(model);
  ResponseEvaluator eval(model);
  double worst = std::numeric_limits<double>::infinity();
  for (double w : g.points()) {
    worst = std::min(worst, smallest_singular_value(eval.at_frequency(w)));
  }
  return worst;
}

double max_abs_over_grid(const StateSpaceModel& model, const FrequencyGrid& grid) {
  if (model.outputs() == 0 || model.inputs() == 0) return 0.0;
  const FrequencyGrid g = grid.restricted_to(model);
  ResponseEvaluator eval(model);
  double worst = 0.0;
  for (double w : g.points()) {
    worst = std::max(worst, eval.at_frequency(w).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::vector<Complex> rank_sample_points(const StateSpaceModel& model,
                                        const RankOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<Complex> pts;
  pts.reserve(static_cast<std::size_t>(options.samples));
  if (model.is_discrete()) {
    std::uniform_real_distribution<double> radius(std::log(0.5), std::log(2.0));
    for (int i = 0; i < options.samples; ++i) {
      pts.push_back(std::polar(std::exp(radius(rng)), phase(rng)));
    }
  } else {
    std::uniform_real_distribution<double> magnitude(-2.0, 4.0);
    for (int i = 0; i < options.samples; ++i) {
      pts.push_back(std::polar(std::pow(10.0, magnitude(rng)), phase(rng)));
    }
  }
  return pts;
}

Index numerical_rank(const CMatrix& value, double relative_tolerance) {
  if (value.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(value);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return 0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > relative_tolerance * sv(0)) ++rank;
  }
  return rank;
}

RankProbe probe_rank(const StateSpaceModel& model, std::span<const Index> columns,
                     const RankOptions& options) {
  RankProbe probe;
  if (model.outputs() == 0) return probe;
  std::vector<Index> cols(columns.begin(), columns.end());
  if (columns.empty()) {
    cols.resize(static_cast<std::size_t>(model.inputs()));
    for (Index j = 0; j < model.inputs(); ++j) cols[static_cast<std::size_t>(j)] = j;
  }
  if (cols.empty()) return probe;
  ResponseEvaluator eval(model);
  for (const Complex& s : rank_sample_points(model, options)) {
    const CMatrix full = eval.at(s);
    CMatrix value(full.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      value.col(static_cast<Index>(j)) = full.col(cols[j]);
    }
    Eigen::JacobiSVD<CMatrix> svd(value);
    const auto& sv = svd.singularValues();
    if (!(sv(0) > 0.0)) continue;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > options.relative_tolerance * sv(0)) ++rank;
    }
    const double margin = sv(rank - 1) / sv(0);
    if (rank > probe.rank || (rank == probe.rank && margin > probe.relative_margin)) {
      probe.rank = rank;
      probe.relative_margin = margin;
    }
  }
  return probe;
}

Index normal_rank(const StateSpaceModel& model, std::span<const Index> columns,
                  const RankOptions& options) {
  return probe_rank(model, columns, options).rank;
}

}  // namespace fdi
