#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fdi/error.hpp"

namespace fdi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Dense real state-space realization (A, B, C, D).
///
/// A model without a sample time is continuous; otherwise it is discrete with
/// the given period in seconds. n = 0 is allowed and denotes a static gain D.
/// Values are immutable after construction.
class StateSpaceModel {
 public:
  StateSpaceModel() = default;
  StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d,
                  std::optional<double> sample_time = std::nullopt);

  static StateSpaceModel gain(Matrix d,
                              std::optional<double> sample_time = std::nullopt);
  static StateSpaceModel zero(Index outputs, Index inputs,
                              std::optional<double> sample_time = std::nullopt);
  static StateSpaceModel identity(Index size,
                                  std::optional<double> sample_time = std::nullopt);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& d() const { return d_; }

  Index states() const { return a_.rows(); }
  Index inputs() const { return d_.cols(); }
  Index outputs() const { return d_.rows(); }

  bool is_discrete() const { return sample_time_.has_value(); }
  std::optional<double> sample_time() const { return sample_time_; }

 private:
  Matrix a_{0, 0};
  Matrix b_{0, 0};
  Matrix c_{0, 0};
  Matrix d_{0, 0};
  std::optional<double> sample_time_;
};

bool same_domain(const StateSpaceModel& lhs, const StateSpaceModel& rhs);

// ---------------------------------------------------------------------------
// Evaluation and spectra
// ---------------------------------------------------------------------------

/// D + C (sI - A)^{-1} B. For discrete models `s` is interpreted as z.
/// Throws NumericalError when sI - A is numerically singular.
CMatrix evaluate(const StateSpaceModel& model, Complex s);

/// Response on the stability boundary: s = jw (continuous) or
/// z = exp(jwT) (discrete).
CMatrix frequency_response(const StateSpaceModel& model, double omega);

/// Evaluates many points sharing one Hessenberg reduction of A, so each
/// point costs O(n^2 m) instead of a dense factorization.
class ResponseEvaluator {
 public:
  explicit ResponseEvaluator(const StateSpaceModel& model);
  CMatrix at(Complex s) const;
  CMatrix at_frequency(double omega) const;

 private:
  Matrix hessenberg_;
  Matrix b_;  // Q^T B
  Matrix c_;  // C Q
  Matrix d_;
  std::optional<double> sample_time_;
  double scale_ = 1.0;
};

std::vector<Complex> poles(const StateSpaceModel& model);

inline constexpr double kStabilityMargin = 1e-9;

/// Continuous: every Re(pole) < -margin. Discrete: every |pole| < 1 - margin.
bool is_stable(const StateSpaceModel& model, double margin = kStabilityMargin);

/// Finite transmission zeros of a square system from the Rosenbrock pencil.
std::vector<Complex> transmission_zeros(const StateSpaceModel& model);

// ---------------------------------------------------------------------------
// Interconnections
// ---------------------------------------------------------------------------

/// y = second(first(u)).
StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second);
/// y = lhs(u) + rhs(u).
StateSpaceModel parallel(const StateSpaceModel& lhs, const StateSpaceModel& rhs);
/// [lhs rhs]: shared output, concatenated inputs.
StateSpaceModel row_concat(const StateSpaceModel& lhs, const StateSpaceModel& rhs);
/// [lhs; rhs]: shared input, stacked outputs.
StateSpaceModel col_concat(const StateSpaceModel& lhs, const StateSpaceModel& rhs);
/// diag(lhs, rhs).
StateSpaceModel stack(const StateSpaceModel& lhs, const StateSpaceModel& rhs);
/// Negative feedback around `plant` with `controller` in the return path:
/// (I + P K)^{-1} P. Throws NumericalError if I + D_P D_K is singular.
StateSpaceModel feedback(const StateSpaceModel& plant,
                         const StateSpaceModel& controller);

enum class Connection { kSeries, kRowConcat, kColConcat, kStack, kFeedback };

/// Left fold of the binary interconnection over `parts` (feedback takes
/// exactly two parts).
StateSpaceModel connect(Connection kind, std::span<const StateSpaceModel> parts);

/// Lower loop closure: the first `fed_inputs` inputs of `plant` are driven by
/// `controller`, whose input is the first `measured_outputs` outputs of
/// `plant` (positive sign; put any negation into the plant or controller).
/// The closed loop keeps the remaining plant inputs as inputs and returns
/// [plant outputs; controller outputs].
StateSpaceModel close_loop(const StateSpaceModel& plant,
                           const StateSpaceModel& controller, Index fed_inputs,
                           Index measured_outputs);

// ---------------------------------------------------------------------------
// Elementary transformations
// ---------------------------------------------------------------------------

StateSpaceModel transpose(const StateSpaceModel& model);
StateSpaceModel scaled(const StateSpaceModel& model, double factor);
/// W * G for a constant matrix W.
StateSpaceModel premultiply(const Matrix& weights, const StateSpaceModel& model);
/// G * W for a constant matrix W.
StateSpaceModel postmultiply(const StateSpaceModel& model, const Matrix& weights);
StateSpaceModel select_inputs(const StateSpaceModel& model,
                              std::span<const Index> columns);
StateSpaceModel select_outputs(const StateSpaceModel& model,
                               std::span<const Index> rows);
/// Inverse of a system with square invertible D.
StateSpaceModel inverse(const StateSpaceModel& model);
/// Applies a state transformation x = T z.
StateSpaceModel similarity_transform(const StateSpaceModel& model,
                                     const Matrix& transform);

/// Diagonal power-of-two similarity that equalises row and column norms of
/// [A B; C 0]. Exact in floating point.
StateSpaceModel balanced(const StateSpaceModel& model);

/// Removes uncontrollable and unobservable states with orthogonal staircase
/// reductions. Never applied implicitly by other operations.
StateSpaceModel minimal_realization(const StateSpaceModel& model,
                                    double tolerance = 1e-8);

// ---------------------------------------------------------------------------
// Frequency grids and norms
// ---------------------------------------------------------------------------

/// Strictly increasing positive angular frequencies (rad/s).
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> points);

  /// `count` log-spaced points on [low, high] rad/s.
  static FrequencyGrid log_spaced(double low, double high, std::size_t count);
  /// The default analysis grid: 400 points on [1e-2, 1e5] rad/s.
  static FrequencyGrid standard();

  /// Adds `count` log-uniform random points on the same span.
  FrequencyGrid with_random_points(std::size_t count, std::uint64_t seed) const;
  /// Drops points at or above the Nyquist frequency of a discrete model.
  FrequencyGrid restricted_to(const StateSpaceModel& model) const;

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<double> points_;
};

/// Peak largest singular value: grid, DC and infinity, then golden-section
/// refinement around the strongest local maxima. Throws for unstable models.
double h_inf_norm(const StateSpaceModel& model,
                  const FrequencyGrid& grid = FrequencyGrid::standard());

/// H-infinity norm of series(first, second), evaluated factor by factor so
/// pole/zero cancellations between the two never enter one realization.
double h_inf_norm_cascade(const StateSpaceModel& first, const StateSpaceModel& second,
                          const FrequencyGrid& grid = FrequencyGrid::standard());

/// Smallest singular value minimised over the grid points.
double h_minus_over_grid(const StateSpaceModel& model,
                         const FrequencyGrid& grid = FrequencyGrid::standard());

/// Largest entry magnitude over the grid points.
double max_abs_over_grid(const StateSpaceModel& model, const FrequencyGrid& grid);

/// Largest singular value at every grid point.
std::vector<double> singular_value_peaks(const StateSpaceModel& model,
                                         const FrequencyGrid& grid);

// ---------------------------------------------------------------------------
// Normal rank
// ---------------------------------------------------------------------------

struct RankOptions {
  int samples = 5;
  double relative_tolerance = 1e-8;
  std::uint64_t seed = 0x5eedf00dULL;
};

/// Random evaluation points used by the sampled rank tests.
std::vector<Complex> rank_sample_points(const StateSpaceModel& model,
                                        const RankOptions& options = {});

/// Numerical rank of a complex matrix with relative tolerance.
Index numerical_rank(const CMatrix& value, double relative_tolerance);

/// Normal rank as the maximum numerical rank over random complex points,
/// restricted to the selected columns (all columns when empty).
Index normal_rank(const StateSpaceModel& model,
                  std::span<const Index> columns = {},
                  const RankOptions& options = {});

/// Same as normal_rank, also reporting the (rank)-th singular value relative
/// to the largest at the point that attained the rank; 0 when rank is 0.
struct RankProbe {
  Index rank = 0;
  double relative_margin = 0.0;
};
RankProbe probe_rank(const StateSpaceModel& model,
                     std::span<const Index> columns = {},
                     const RankOptions& options = {});

}  // namespace fdi
