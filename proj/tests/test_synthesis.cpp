#include <doctest.h>

#include "fdi/synthesis.hpp"
#include "support.hpp"

using namespace fdi;
using fdi::test::first_order;
using fdi::test::random_stable;

namespace {

PartitionedPlant plant_of(const StateSpaceModel& gu, const StateSpaceModel& gd,
                          const StateSpaceModel& gw, const StateSpaceModel& gf) {
  auto fit = [&](const StateSpaceModel& g) {
    return g.inputs() == 0 ? StateSpaceModel::zero(gu.outputs(), 0) : g;
  };
  return make_plant(gu, fit(gd), fit(gw), fit(gf));
}

double grid_peak(const StateSpaceModel& g) {
  return max_abs_over_grid(g, FrequencyGrid::standard());
}

// Filter applied to plant columns (internal form of those columns).
StateSpaceModel apply(const StateSpaceModel& filter, const PartitionedPlant& p,
                      std::vector<Index> cols, bool control) {
  auto g = select_inputs(p.model, cols);
  Matrix lower = Matrix::Zero(p.n_u, static_cast<Index>(cols.size()));
  if (control) lower.setIdentity();
  return series(col_concat(g, StateSpaceModel::gain(lower)), filter);
}

}  // namespace

TEST_CASE("hollow bank on sensor faults") {
  std::mt19937_64 rng(51);
  auto gu = random_stable(rng, 3, 2, 1);
  auto p = plant_of(gu, {}, {}, StateSpaceModel::identity(2));
  auto bank = synthesize_bank(p, make_structure(StructureKind::kHollow, 2));
  REQUIRE(bank.size() == 2);
  CHECK(bank.achieved == bank.spec);
  auto r1 = apply(bank.filters[0], p, p.f_columns(), false);
  CHECK(grid_peak(select_inputs(r1, std::vector<Index>{0})) < 1e-9);
  CHECK(h_inf_norm(select_inputs(r1, std::vector<Index>{1})) > 1e-6);
  auto r2 = apply(bank.filters[1], p, p.f_columns(), false);
  CHECK(grid_peak(select_inputs(r2, std::vector<Index>{1})) < 1e-9);
  CHECK(h_inf_norm(select_inputs(r2, std::vector<Index>{0})) > 1e-6);
  for (auto& f : bank.filters) {
    CHECK(is_stable(f));
    CHECK(f.outputs() == 1);
    CHECK(f.inputs() == 3);
    CHECK(grid_peak(apply(f, p, p.u_columns(), true)) < 1e-6 * (1 + grid_peak(p.model)));
    CHECK(std::isinf(bank.gaps.front()));
  }
}

TEST_CASE("combined faults cannot be strongly isolated") {
  std::mt19937_64 rng(52);
  auto gu = random_stable(rng, 3, 2, 2);
  auto p = plant_of(gu, {}, {}, row_concat(gu, StateSpaceModel::identity(2)));
  CHECK_THROWS_AS(synthesize_bank(p, make_structure(StructureKind::kStrong, 4)), InfeasibleError);
  CHECK_THROWS_AS(synthesize_bank(plant_of(StateSpaceModel::zero(2, 0), {}, {},
                                           StateSpaceModel::identity(2)),
                                  make_structure(StructureKind::kHollow, 2)),
                  DimensionError);
}

TEST_CASE("detector") {
  std::mt19937_64 rng(53);
  auto gu = random_stable(rng, 3, 2, 2);
  auto bank = synthesize_detector(plant_of(gu, {}, {}, gu));
  CHECK(bank.size() == 1);
  CHECK(bank.achieved.entries() == Eigen::MatrixXi::Ones(1, 2));
  auto zero = row_concat(gu, StateSpaceModel::zero(2, 1));
  CHECK_THROWS_AS(synthesize_detector(plant_of(gu, {}, {}, zero)), InfeasibleError);

  for (int t = 0; t < 10; ++t) {
    const Index ny = 2 + t % 3, nu = 1 + t % ny;
    auto g = random_stable(rng, 2 + t % 6, ny, nu + 1 + 2, t % 2 == 0);
    PartitionedPlant p(g, nu, ny > nu ? 1 : 0, ny > nu ? 0 : 1, 2);
    auto det = synthesize_detector(p);
    auto f = det.filters.front();
    const double scale = grid_peak(f) * (1 + grid_peak(p.model));
    CHECK(grid_peak(apply(f, p, p.u_columns(), true)) < 1e-6 * scale);
    if (p.n_d > 0) CHECK(grid_peak(apply(f, p, p.d_columns(), false)) < 1e-6 * scale);
  }
}

TEST_CASE("gap optimization") {
  std::mt19937_64 rng(54);
  auto g = random_stable(rng, 3, 1, 2);
  auto none = optimize_gap(g, StateSpaceModel::zero(1, 0), 1.0);
  CHECK(none.unbounded);
  CHECK(std::isinf(none.eta));

  auto noise = random_stable(rng, 3, 1, 1);
  auto twice = optimize_gap(scaled(noise, 2.0), noise, 0.7);
  CHECK(twice.eta == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(twice.noise_norm == doctest::Approx(0.7).epsilon(1e-4));

  for (int t = 0; t < 10; ++t) {
    auto fault = random_stable(rng, 3, 1, 2, t % 2 == 0);
    auto w = random_stable(rng, 3, 1, 2, t % 3 == 0);
    const double gamma = 0.5 + t;
    auto r = optimize_gap(fault, w, gamma);
    CHECK(std::abs(r.noise_norm - gamma) < 1e-4 * gamma);
    CHECK(is_stable(r.q3));
    const double alpha = 3.7;
    auto q3a = scaled(r.q3, alpha);
    const double eta = h_inf_norm_cascade(fault, q3a) / h_inf_norm_cascade(w, q3a);
    CHECK(std::abs(eta - r.eta) < 1e-12 * std::max(1.0, r.eta));
  }
}

TEST_CASE("bank with noise reaches the noise bound") {
  std::mt19937_64 rng(55);
  auto g = random_stable(rng, 4, 3, 1 + 1 + 2 + 2, false);
  PartitionedPlant p(g, 1, 1, 2, 2);
  SynthesisOptions opts;
  opts.gamma = 2.0;
  auto bank = synthesize_bank(p, make_structure(StructureKind::kHollow, 2), opts);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto rw = apply(bank.filters[i], p, p.w_columns(), false);
    CHECK(std::abs(h_inf_norm(rw) - 2.0) < 1e-4 * 2.0);
    CHECK(std::isfinite(bank.gaps[i]));
    CHECK(bank.gaps[i] > 0.0);
  }
  CHECK(bank.beta() > 0.0);
}

TEST_CASE("soft mode keeps u and d decoupled") {
  std::mt19937_64 rng(56);
  auto g = random_stable(rng, 4, 3, 1 + 1 + 3);
  PartitionedPlant p(g, 1, 1, 0, 3);
  SynthesisOptions opts;
  opts.mode = SynthesisMode::kSoft;
  auto bank = synthesize_bank(p, make_structure(StructureKind::kHollow, 3), opts);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double scale = grid_peak(bank.filters[i]) * (1 + grid_peak(p.model));
    CHECK(grid_peak(apply(bank.filters[i], p, p.u_columns(), true)) < 1e-6 * scale);
    CHECK(grid_peak(apply(bank.filters[i], p, p.d_columns(), false)) < 1e-6 * scale);
    // The soft-decoupled fault is attenuated to the noise bound.
    auto rf = apply(bank.filters[i], p, std::vector<Index>{p.fault_column(static_cast<Index>(i))}, false);
    CHECK(h_inf_norm(rf) <= opts.gamma * (1 + 1e-4));
  }
}

TEST_CASE("positive rescaling keeps the structure") {
  std::mt19937_64 rng(57);
  auto gu = random_stable(rng, 3, 3, 2);
  auto p = plant_of(gu, {}, {}, gu);
  auto bank = synthesize_bank(p, make_structure(StructureKind::kHollow, 2));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    auto scaled_filter = scaled(bank.filters[i], 1e-3);
    auto rf = apply(scaled_filter, p, p.f_columns(), false);
    for (Index j = 0; j < 2; ++j) {
      const double h = h_inf_norm(select_inputs(rf, std::vector<Index>{j}));
      CHECK((h > 1e-6 * 1e-3) == (bank.spec(static_cast<Index>(i), j) == 1));
    }
  }
}
