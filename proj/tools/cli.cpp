#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "fdi/io.hpp"
#include "fdi/nullspace.hpp"
#include "fdi/verification.hpp"
#include "fdi/wafer.hpp"

namespace fdi {
namespace {

namespace fs = std::filesystem;

constexpr int kSuiteSize = 25;

struct Flags {
  std::string plant, controller, structure, scenario, bank, out;
  std::uint64_t seed = 7;
  std::string mode = "exact";
  double gamma = 1.0;
  double mismatch = 0.0;
  std::optional<double> rate;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void finish(const Report& report, const Flags& flags, std::ostream& out) {
  for (const Json& v : report.verdicts) {
    out << (v["pass"].get<bool>() ? "PASS " : "FAIL ") << v["name"].get<std::string>();
    if (v.contains("detail")) out << " (" << v["detail"].get<std::string>() << ")";
    out << '\n';
  }
  if (!flags.out.empty()) {
    fs::create_directories(flags.out);
    write_json(fs::path(flags.out) / "report.json", report.to_json());
  }
}

int analyze(const Flags& flags, std::ostream& out) {
  const PartitionedPlant plant = plant_from_json(read_json(flags.plant));
  Report report;
  report.command = "analyze";
  report.inputs = {{"plant", flags.plant}};

  const std::vector<RankTest> det = is_completely_detectable(plant);
  Json detectable = Json::array();
  for (std::size_t j = 0; j < det.size(); ++j) {
    out << "fault " << j + 1 << ": " << (det[j].pass ? "detectable" : "not detectable")
        << " (rank " << det[j].rank_with << " vs " << det[j].rank_without << ")\n";
    detectable.push_back(det[j].pass);
  }
  report.metrics["completely_detectable"] = detectable;

  const bool strong = is_strongly_isolable(plant);
  out << "strongly isolable: " << (strong ? "yes" : "no") << '\n';
  report.metrics["strongly_isolable"] = strong;

  if (plant.n_f >= 2) {
    const WeakIsolabilityReport weak = is_weakly_isolable(plant);
    out << "weakly isolable: " << (weak.isolable ? "yes" : "no") << '\n';
    Json pairs = Json::array();
    for (const auto& [i, j] : weak.failing_pairs) {
      out << "  fails for faults " << i + 1 << ", " << j + 1 << '\n';
      pairs.push_back({i + 1, j + 1});
    }
    report.metrics["weakly_isolable"] = weak.isolable;
    report.metrics["weak_failing_pairs"] = pairs;
  }

  if (!flags.structure.empty()) {
    report.inputs["structure"] = flags.structure;
    const StructureMatrix s = read_structure(flags.structure);
    if (s.cols() != plant.n_f) throw DimensionError("structure does not match the fault count");
    const IsolabilityReport iso = is_s_isolable(plant, s);
    out << "structure isolable: " << (iso.isolable ? "yes" : "no");
    if (!iso.isolable) out << " (rank condition fails at " << iso.first_failure() << ")";
    out << '\n';
    report.metrics["structure_isolable"] = iso.isolable;
    if (!iso.isolable) report.metrics["first_failure"] = iso.first_failure();
  }
  finish(report, flags, out);
  return 0;
}

int synth(const Flags& flags, std::ostream& out) {
  const PartitionedPlant plant = plant_from_json(read_json(flags.plant));
  SynthesisOptions options;
  if (flags.mode == "soft") options.mode = SynthesisMode::kSoft;
  options.gamma = flags.gamma;
  options.seed = flags.seed;
  const FilterBank bank = flags.structure.empty()
                              ? synthesize_detector(plant, options)
                              : synthesize_bank(plant, read_structure(flags.structure), options);

  Report report;
  report.command = "synth";
  report.inputs = {{"plant", flags.plant},     {"structure", flags.structure},
                   {"mode", flags.mode},       {"gamma", flags.gamma},
                   {"seed", flags.seed}};
  double decoupling = 0.0;
  bool stable = true;
  Json orders = Json::array();
  for (const StateSpaceModel& f : bank.filters) {
    decoupling = std::max(decoupling, annihilation_error(f, plant.model, plant.n_u,
                                                         plant.d_columns(),
                                                         FrequencyGrid::standard()));
    stable = stable && is_stable(f);
    orders.push_back(f.states());
  }
  report.verdict("achieved structure equals specification", bank.achieved == bank.spec);
  report.verdict("control and disturbance inputs decoupled", decoupling < 1e-6,
                 "relative " + fmt(decoupling));
  report.verdict("filters stable", stable);
  report.metrics = {{"filters", static_cast<Index>(bank.filters.size())},
                    {"filter_orders", orders},
                    {"decoupling", decoupling},
                    {"betas", bank.betas},
                    {"gaps", bank.gaps},
                    {"fault_sensitivity", to_json(bank.fault_sensitivity)}};
  fs::create_directories(flags.out);
  write_json(fs::path(flags.out) / "bank.json", to_json(bank));
  report.artifacts = {"bank.json", "report.json"};
  out << "wrote " << bank.filters.size() << " filter(s) to "
      << (fs::path(flags.out) / "bank.json").string() << '\n';
  finish(report, flags, out);
  return report.all_pass() ? 0 : 2;
}

int simulate_command(const Flags& flags, std::ostream& out) {
  const PartitionedPlant plant = plant_from_json(read_json(flags.plant));
  const StateSpaceModel controller = model_from_json(read_json(flags.controller));
  const FilterBank bank = bank_from_json(read_json(flags.bank));
  FaultScenario scenario = scenario_from_json(read_json(flags.scenario));
  if (flags.rate) scenario.sample_time = 1.0 / *flags.rate;
  scenario.validate(plant.n_f, plant.n_y());

  const ClosedLoopSystem system = build_closed_loop(plant, controller, &bank);
  FaultScenario quiet = scenario;
  quiet.events.clear();
  const SimulationResult calibration = simulate(system, quiet);
  const SimulationResult run = simulate(system, scenario);

  const fs::path dir = flags.out;
  fs::create_directories(dir);
  std::vector<std::string> header = {"time"};
  for (Index i = 0; i < run.y.cols(); ++i) header.push_back("y_" + std::to_string(i + 1));
  for (Index i = 0; i < run.u.cols(); ++i) header.push_back("u_" + std::to_string(i + 1));
  for (Index i = 0; i < run.residuals.cols(); ++i) header.push_back("eps_" + std::to_string(i + 1));
  Matrix cols(run.time.size(), static_cast<Index>(header.size()));
  cols << run.time, run.y, run.u, run.residuals;
  write_csv(dir / "simulation.csv", header, cols);

  Report report;
  report.command = "simulate";
  report.inputs = {{"plant", flags.plant},       {"controller", flags.controller},
                   {"bank", flags.bank},         {"scenario", flags.scenario},
                   {"sample_time", scenario.sample_time}};
  report.verdict("residuals finite", run.residuals.allFinite());
  report.artifacts = {"simulation.csv"};

  DecisionConfig config;
  config.thresholds = calibrate_thresholds(calibration.residuals, scenario.sample_time, config);
  const DecisionTrace trace = decide(run.residuals, scenario.sample_time, bank.spec, config);
  write_decisions_csv(dir / "decisions.csv", run.time, trace);
  Matrix traces(run.time.size(), 1 + 2 * run.residuals.cols());
  traces << run.time, run.residuals,
      moving_rms(run.residuals, window_samples(config, scenario.sample_time));
  std::vector<std::string> rheader = {"time"};
  for (Index i = 0; i < run.residuals.cols(); ++i) rheader.push_back("eps_" + std::to_string(i + 1));
  for (Index i = 0; i < run.residuals.cols(); ++i) rheader.push_back("rms_" + std::to_string(i + 1));
  write_csv(dir / "residuals.csv", rheader, traces);
  {
    std::FILE* f = std::fopen((dir / "plot.gp").c_str(), "w");
    if (!f) throw FormatError("cannot write " + (dir / "plot.gp").string());
    const std::string script = residual_plot_script(run.residuals.cols(), "residuals.csv",
                                                    config.thresholds);
    std::fputs(script.c_str(), f);
    std::fclose(f);
  }
  report.artifacts.insert(report.artifacts.end(),
                          {"residuals.csv", "decisions.csv", "plot.gp", "report.json"});

  Json isolated = Json::array();
  for (Index j = 0; j < bank.spec.cols(); ++j) {
    const auto hits = std::count(trace.isolated.begin(), trace.isolated.end(), static_cast<int>(j));
    isolated.push_back(static_cast<Index>(hits));
  }
  std::vector<double> thresholds(config.thresholds.data(),
                                 config.thresholds.data() + config.thresholds.size());
  report.metrics = {{"samples", static_cast<Index>(run.time.size())},
                    {"max_abs_residual", run.residuals.size() ? run.residuals.cwiseAbs().maxCoeff() : 0.0},
                    {"thresholds", thresholds},
                    {"isolated_samples_per_fault", isolated}};
  out << "simulated " << run.time.size() << " samples into " << dir.string() << '\n';
  finish(report, flags, out);
  return report.all_pass() ? 0 : 2;
}

Json theorem_json(std::uint64_t seed, const TheoremReport& r) {
  return {{"seed", seed},
          {"n_y", r.n_y},
          {"n_u", r.n_u},
          {"r_d", r.r_d},
          {"null_open", r.null_open},
          {"null_closed", r.null_closed},
          {"null_closed_formula", r.null_closed_formula},
          {"decoupling", r.decoupling},
          {"discrepancy", r.discrepancy},
          {"containment", r.containment},
          {"pass", r.verdict}};
}

int verify_theorems(const Flags& flags, std::ostream& out) {
  Report report;
  report.command = "verify-theorems";
  report.inputs = {{"seed", flags.seed}, {"cases", kSuiteSize}};
  for (int theorem = 1; theorem <= 2; ++theorem) {
    Json cases = Json::array();
    int passed = 0;
    for (int k = 0; k < kSuiteSize; ++k) {
      const std::uint64_t seed = flags.seed + static_cast<std::uint64_t>(k);
      const TheoremReport r = theorem == 1 ? check_theorem1(seed, square_or_tall_dims(seed))
                                           : check_theorem2(seed, wide_dims(seed));
      passed += r.verdict ? 1 : 0;
      cases.push_back(theorem_json(seed, r));
    }
    const std::string name = "theorem " + std::to_string(theorem);
    report.verdict(name, passed == kSuiteSize,
                   std::to_string(passed) + "/" + std::to_string(kSuiteSize) + " cases");
    report.metrics[name] = cases;
  }
  finish(report, flags, out);
  return report.all_pass() ? 0 : 2;
}

int case_study(const Flags& flags, std::ostream& out) {
  CaseStudyOptions options;
  options.seed = flags.seed;
  options.mismatch_pct = flags.mismatch;
  if (flags.rate) options.rate_hz = *flags.rate;
  options.out_dir = flags.out.empty() ? fs::path("case-study") : fs::path(flags.out);
  const CaseStudyReport rep = run_case_study(options);
  out << "isolated " << rep.isolated_count() << "/" << rep.faults.size() << " faults, "
      << rep.false_isolations << " false isolation samples, filter order " << rep.filter_order
      << '\n';
  for (const FaultOutcome& f : rep.faults) {
    out << "fault " << f.fault << ": verdict " << (f.verdict >= 0 ? f.verdict + 1 : f.verdict)
        << ", latency " << fmt(f.latency) << " s, decay ratio " << fmt(f.decay_ratio) << '\n';
  }
  out << "report: " << (options.out_dir / "report.json").string() << '\n';
  return rep.isolation_pass() ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nullspace-based fault detection and isolation under feedback"};
  app.name("fdi");
  app.require_subcommand(1);
  Flags flags;

  auto existing = [](CLI::Option* o) { return o->check(CLI::ExistingFile); };
  auto* analyze_cmd = app.add_subcommand("analyze", "Detectability and isolability verdicts");
  existing(analyze_cmd->add_option("--plant", flags.plant, "plant JSON")->required());
  existing(analyze_cmd->add_option("--structure", flags.structure, "structure JSON or CSV"));
  analyze_cmd->add_option("--out", flags.out, "directory for report.json");

  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a filter bank");
  existing(synth_cmd->add_option("--plant", flags.plant, "plant JSON")->required());
  existing(synth_cmd->add_option("--structure", flags.structure,
                                 "structure JSON or CSV (default: single detector)"));
  synth_cmd->add_option("--mode", flags.mode, "exact or soft")
      ->check(CLI::IsMember({"exact", "soft"}));
  synth_cmd->add_option("--gamma", flags.gamma, "noise gain bound")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", flags.seed, "row combination seed");
  synth_cmd->add_option("--out", flags.out, "output directory")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop simulation with the filter bank");
  existing(sim_cmd->add_option("--plant", flags.plant, "plant JSON")->required());
  existing(sim_cmd->add_option("--controller", flags.controller, "controller JSON")->required());
  existing(sim_cmd->add_option("--bank", flags.bank, "bank JSON")->required());
  existing(sim_cmd->add_option("--scenario", flags.scenario, "scenario JSON")->required());
  sim_cmd->add_option("--rate", flags.rate, "sample rate override in Hz")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", flags.out, "output directory")->required();

  auto* verify_cmd = app.add_subcommand("verify-theorems", "Seeded open/closed-loop nullspace suites");
  verify_cmd->add_option("--seed", flags.seed, "first seed");
  verify_cmd->add_option("--out", flags.out, "directory for report.json");

  auto* case_cmd = app.add_subcommand("case-study", "Synthetic wafer-stage case study");
  case_cmd->add_option("--seed", flags.seed, "plant seed");
  case_cmd->add_option("--mismatch", flags.mismatch, "modal frequency mismatch in percent");
  case_cmd->add_option("--rate", flags.rate, "sample rate in Hz")->check(CLI::PositiveNumber);
  case_cmd->add_option("--out", flags.out, "output directory (default ./case-study)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (analyze_cmd->parsed()) return analyze(flags, out);
    if (synth_cmd->parsed()) return synth(flags, out);
    if (sim_cmd->parsed()) return simulate_command(flags, out);
    if (verify_cmd->parsed()) return verify_theorems(flags, out);
    if (case_cmd->parsed()) return case_study(flags, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace fdi
