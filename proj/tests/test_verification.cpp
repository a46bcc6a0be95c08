#include <doctest.h>

#include "fdi/verification.hpp"

using namespace fdi;

TEST_CASE("random plants are deterministic and stabilized") {
  const PlantDims dims{3, 2, 1, 1, 2, 4};
  const RandomLoop a = random_plant(7, dims);
  const RandomLoop b = random_plant(7, dims);
  CHECK(a.plant.model.a().isApprox(b.plant.model.a()));
  CHECK(a.controller.b().isApprox(b.controller.b()));
  CHECK(is_stable(a.plant.model));
  CHECK_NOTHROW(build_closed_loop(a.plant, a.controller));
  CHECK(normal_rank(a.controller) == 2);
  CHECK_THROWS_AS(random_plant(1, PlantDims{0, 1, 0, 0, 1, 2}), DimensionError);
}

TEST_CASE("square and tall loops keep the open-loop nullspace") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const PlantDims dims{Index(3 + seed % 2), Index(1 + seed % 3), Index(seed % 2), 1, 2,
                         Index(2 + seed % 4)};
    const TheoremReport rep = check_theorem1(seed, dims);
    CAPTURE(seed);
    CAPTURE(rep.decoupling);
    CAPTURE(rep.discrepancy);
    CAPTURE(rep.containment);
    CHECK(rep.null_open == rep.n_y - rep.r_d);
    CHECK(rep.null_closed == rep.null_closed_formula);
    CHECK(rep.basis_rows == rep.n_y - rep.r_d);
    CHECK(rep.verdict);
  }
}

TEST_CASE("wide loops enlarge the closed-loop nullspace") {
  for (std::uint64_t seed = 11; seed <= 16; ++seed) {
    const PlantDims dims{2, Index(3 + seed % 2), Index(seed % 2), 1, 1, 3};
    const TheoremReport rep = check_theorem2(seed, dims);
    CAPTURE(seed);
    CAPTURE(rep.containment);
    CHECK(rep.null_open == rep.n_y - rep.r_d);
    CHECK(rep.null_closed == rep.n_u - rep.r_d);
    CHECK(rep.verdict);
  }
}

TEST_CASE("regime and controller rank are enforced") {
  CHECK_THROWS_AS(check_theorem1(3, PlantDims{2, 3, 0, 0, 1, 3}), DimensionError);
  CHECK_THROWS_AS(check_theorem2(3, PlantDims{3, 2, 0, 0, 1, 3}), DimensionError);
  const RandomLoop loop = random_plant(5, PlantDims{3, 2, 1, 0, 1, 3});
  const StateSpaceModel zero = StateSpaceModel::zero(2, 3);
  CHECK_THROWS_AS(check_theorem1(loop.plant, zero), DimensionError);
}
