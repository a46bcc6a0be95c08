#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fdi/io.hpp"
#include "fdi/wafer.hpp"

using namespace fdi;

TEST_CASE("wafer plant dimensions and determinism") {
  const PartitionedPlant p = generate_wafer_plant(7);
  CHECK(p.model.states() == 20);
  CHECK(p.n_u == kWaferActuators);
  CHECK(p.n_y() == kWaferSensors);
  CHECK(p.n_f == kWaferActuators + kWaferSensors);
  CHECK(p.n_d == 0);
  CHECK(p.n_w == 0);
  CHECK(is_stable(p.model));
  const PartitionedPlant q = generate_wafer_plant(7);
  CHECK(p.model.a() == q.model.a());
  CHECK(p.model.c() == q.model.c());
  CHECK_FALSE(generate_wafer_plant(8).model.a() == p.model.a());

  const ModalPlantSpec spec = wafer_plant_spec(7);
  REQUIRE(spec.modes.size() == 10);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(spec.modes[k].freq_hz >= 1.0);
    CHECK(spec.modes[k].freq_hz <= 5.0);
  }
  for (std::size_t k = 3; k < 10; ++k) {
    CHECK(spec.modes[k].freq_hz >= 80.0);
    CHECK(spec.modes[k].freq_hz <= 600.0);
  }
}

TEST_CASE("mismatch perturbs every mode by the requested fraction") {
  const ModalPlantSpec spec = wafer_plant_spec(3);
  const ModalPlantSpec off = perturbed(spec, 2.0);
  for (std::size_t k = 0; k < spec.modes.size(); ++k) {
    CHECK(std::abs(off.modes[k].freq_hz / spec.modes[k].freq_hz - 1.0) == doctest::Approx(0.02));
    CHECK(std::abs(off.modes[k].damping / spec.modes[k].damping - 1.0) == doctest::Approx(0.2));
  }
  CHECK(is_stable(modal_plant(off).model));
}

TEST_CASE("stage controller decouples and stabilizes") {
  for (std::uint64_t seed : {1, 7, 12}) {
    const ModalPlantSpec spec = wafer_plant_spec(seed);
    const PartitionedPlant p = modal_plant(spec);
    const StageController c = design_stage_controller(p, spec);
    CAPTURE(seed);
    CHECK(c.model.inputs() == kWaferSensors);
    CHECK(c.model.outputs() == kWaferActuators);
    CHECK(c.decoupling_ratio < 0.1);
    CHECK(c.sensitivity_peak < 2.5);
    CHECK_NOTHROW(build_closed_loop(p, c.model));
  }
}

TEST_CASE("fourth-order setpoint") {
  const double ts = 1e-4;
  const Vector v = fourth_order_setpoint(100e-6, 1.0, ts);
  CHECK(v.size() == 10000);
  CHECK(v.maxCoeff() == doctest::Approx(100e-6).epsilon(1e-9));
  CHECK(v.minCoeff() >= 0.0);
  const double h = 1e-6;
  CHECK(std::abs(fourth_order_profile(h, 100e-6, 1.0) - fourth_order_profile(0.0, 100e-6, 1.0)) / h <
        1e-12);
  CHECK(std::abs(fourth_order_profile(0.4, 100e-6, 1.0) -
                 fourth_order_profile(0.4 - h, 100e-6, 1.0)) / h < 1e-12);
  CHECK(fourth_order_setpoint(0.0, 1.0, ts).isZero());
  CHECK((fourth_order_setpoint(2e-6, 1.0, ts) - 2.0 * fourth_order_setpoint(1e-6, 1.0, ts))
            .isZero(1e-20));
  CHECK_THROWS_AS(fourth_order_setpoint(1e-6, 1.0, 0.1), DimensionError);
  CHECK_THROWS_AS(fourth_order_setpoint(1e-6, 0.0, ts), DimensionError);
}

TEST_CASE("wafer bank has one single-output filter per signature") {
  const PartitionedPlant p = generate_wafer_plant(7);
  const StructureMatrix s = make_structure(StructureKind::kWafer17, p.n_f);
  const FilterBank bank = synthesize_bank(p, s);
  REQUIRE(bank.filters.size() == 17);
  for (const StateSpaceModel& f : bank.filters) {
    CHECK(f.outputs() == 1);
    CHECK(f.inputs() == kWaferSensors + kWaferActuators);
    CHECK(is_stable(f));
  }
  CHECK(bank.achieved == s);
}

TEST_CASE("case study at 1 kHz isolates every fault") {
  CaseStudyOptions o;
  o.rate_hz = 1000.0;
  o.out_dir = std::filesystem::temp_directory_path() / "fdi_case_study_test";
  std::filesystem::remove_all(o.out_dir);
  const CaseStudyReport rep = run_case_study(o);
  CHECK(rep.false_isolations == 0);
  CHECK(rep.fault_free_peak_ratio < 1.0);
  CHECK(rep.isolated_count() == 17);
  CHECK(rep.isolation_pass());
  for (const FaultOutcome& f : rep.faults) {
    CAPTURE(f.fault);
    CHECK(f.latency >= 0.0);
    CHECK(f.latency <= 0.1);
  }
  for (const std::string& name : rep.artifacts) CHECK(std::filesystem::exists(o.out_dir / name));
  const Json report = read_json(o.out_dir / "report.json");
  CHECK(report["metrics"]["isolated"] == 17);
  std::filesystem::remove_all(o.out_dir);
}
