#include "fdi/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fdi {
namespace {

double number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw FormatError("expected a number, got " + j.dump());
  return j.get<double>();
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError(std::string("missing field \"") + name + "\"");
  }
  return j.at(name);
}

void dump_number(std::ostream& os, double v) {
  if (!std::isfinite(v)) {
    os << "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void dump_value(std::ostream& os, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? "\n" + std::string((depth + 1) * indent, ' ') : "";
  const std::string close = indent > 0 ? "\n" + std::string(depth * indent, ' ') : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        os << (first ? "" : ",") << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
        dump_value(os, it.value(), indent, depth + 1);
        first = false;
      }
      os << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Numeric rows stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      os << '[';
      bool first = true;
      for (const Json& e : j) {
        os << (first ? "" : (flat && indent > 0 ? ", " : ","));
        if (!flat) os << pad;
        dump_value(os, e, indent, depth + 1);
        first = false;
      }
      os << (flat ? "" : close) << ']';
      return;
    }
    case Json::value_t::number_float:
      dump_number(os, j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* shape_name(FaultShape s) { return s == FaultShape::kSine ? "sine" : "step"; }

}  // namespace

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("matrix must be an array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Index>(j[i].size()) != cols) {
      throw FormatError("matrix rows must be arrays of equal length");
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = number(j[i][c]);
  }
  return m;
}

Json to_json(const StateSpaceModel& model) {
  Json j = Json::object();
  j["a"] = to_json(model.a());
  j["b"] = to_json(model.b());
  j["c"] = to_json(model.c());
  j["d"] = to_json(model.d());
  j["ts"] = model.sample_time() ? Json(*model.sample_time()) : Json(nullptr);
  j["shape"] = {{"states", model.states()}, {"inputs", model.inputs()}, {"outputs", model.outputs()}};
  return j;
}

StateSpaceModel model_from_json(const Json& j) {
  Matrix d = matrix_from_json(field(j, "d"));
  Matrix a = matrix_from_json(field(j, "a"));
  Matrix b = matrix_from_json(field(j, "b"));
  Matrix c = matrix_from_json(field(j, "c"));
  // Empty arrays lose their second dimension; restore it from d and a.
  if (a.size() == 0) {
    a.resize(0, 0);
    b.resize(0, d.cols());
    c.resize(d.rows(), 0);
  }
  if (d.size() == 0 && j.contains("shape")) {
    d.resize(j["shape"]["outputs"].get<Index>(), j["shape"]["inputs"].get<Index>());
  }
  std::optional<double> ts;
  if (j.contains("ts") && !j["ts"].is_null()) ts = j["ts"].get<double>();
  try {
    return StateSpaceModel(a, b, c, d, ts);
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent state-space data: ") + e.what());
  }
}

Json to_json(const PartitionedPlant& plant) {
  Json j = to_json(plant.model);
  j["partitions"] = {{"n_u", plant.n_u}, {"n_d", plant.n_d}, {"n_w", plant.n_w}, {"n_f", plant.n_f}};
  return j;
}

PartitionedPlant plant_from_json(const Json& j) {
  const Json& p = field(j, "partitions");
  try {
    return PartitionedPlant(model_from_json(j), field(p, "n_u").get<Index>(),
                            field(p, "n_d").get<Index>(), field(p, "n_w").get<Index>(),
                            field(p, "n_f").get<Index>());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent partitions: ") + e.what());
  }
}

Json to_json(const StructureMatrix& s) {
  Json rows = Json::array();
  for (Index i = 0; i < s.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < s.cols(); ++j) row.push_back(s(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

StructureMatrix structure_from_json(const Json& j) {
  const Matrix m = matrix_from_json(j);
  try {
    return StructureMatrix(m.cast<int>());
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
}

StructureMatrix structure_from_csv(const std::string& text) {
  std::vector<std::vector<int>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<int> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stoi(cell));
      } catch (const std::exception&) {
        throw FormatError("structure CSV: bad entry \"" + cell + "\"");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw FormatError("structure CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXi m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  try {
    return StructureMatrix(m);
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
}

std::string structure_to_csv(const StructureMatrix& s) {
  std::string out;
  for (Index i = 0; i < s.rows(); ++i) {
    for (Index j = 0; j < s.cols(); ++j) {
      out += std::to_string(s(i, j));
      out += j + 1 < s.cols() ? "," : "\n";
    }
  }
  return out;
}

Json to_json(const FilterBank& bank) {
  Json j = Json::object();
  j["n_y"] = bank.n_y;
  j["n_u"] = bank.n_u;
  j["spec"] = to_json(bank.spec);
  j["achieved"] = to_json(bank.achieved);
  Json filters = Json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    Json f = Json::object();
    f["spec_row"] = i;
    f["gap"] = bank.gaps.size() > i ? bank.gaps[i] : std::numeric_limits<double>::infinity();
    f["beta"] = bank.betas.size() > i ? bank.betas[i] : 0.0;
    f["structure"] = to_json(bank.achieved).at(i);
    f["model"] = to_json(bank.filters[i]);
    filters.push_back(std::move(f));
  }
  j["filters"] = std::move(filters);
  j["fault_sensitivity"] = to_json(bank.fault_sensitivity);
  return j;
}

FilterBank bank_from_json(const Json& j) {
  FilterBank bank;
  bank.n_y = field(j, "n_y").get<Index>();
  bank.n_u = field(j, "n_u").get<Index>();
  bank.spec = structure_from_json(field(j, "spec"));
  bank.achieved = j.contains("achieved") ? structure_from_json(j["achieved"]) : bank.spec;
  for (const Json& f : field(j, "filters")) {
    bank.filters.push_back(model_from_json(field(f, "model")));
    bank.gaps.push_back(f.contains("gap") ? number(f["gap"]) : std::numeric_limits<double>::infinity());
    bank.betas.push_back(f.contains("beta") ? number(f["beta"]) : 0.0);
    if (bank.filters.back().inputs() != bank.n_y + bank.n_u || bank.filters.back().outputs() != 1) {
      throw FormatError("bank filters must be single-output and read [y; u]");
    }
  }
  if (static_cast<Index>(bank.filters.size()) != bank.spec.rows()) {
    throw FormatError("bank has a filter count different from its spec rows");
  }
  if (j.contains("fault_sensitivity")) bank.fault_sensitivity = matrix_from_json(j["fault_sensitivity"]);
  return bank;
}

Json to_json(const FaultScenario& s) {
  Json j = Json::object();
  j["duration_s"] = s.duration;
  j["sample_hz"] = 1.0 / s.sample_time;
  j["noise_rms"] = s.noise_rms;
  j["noise_seed"] = s.noise_seed;
  Json axis = Json::array();
  for (Index i = 0; i < s.reference.direction.size(); ++i) axis.push_back(s.reference.direction(i));
  j["reference"] = {{"type", "fourth_order"},
                    {"stroke_m", s.reference.stroke},
                    {"freq_hz", s.reference.freq_hz},
                    {"axis", axis}};
  Json events = Json::array();
  for (const FaultEvent& e : s.events) {
    events.push_back({{"fault", e.fault},
                      {"t_start_s", e.start},
                      {"t_end_s", e.end},
                      {"magnitude", e.magnitude},
                      {"shape", shape_name(e.shape)},
                      {"frequency_hz", e.frequency_hz}});
  }
  j["events"] = std::move(events);
  return j;
}

FaultScenario scenario_from_json(const Json& j) {
  FaultScenario s;
  s.duration = number(field(j, "duration_s"));
  if (j.contains("sample_hz")) {
    const double rate = number(j["sample_hz"]);
    if (!(rate > 0.0)) throw FormatError("sample_hz must be positive");
    s.sample_time = 1.0 / rate;
  }
  if (j.contains("noise_rms")) s.noise_rms = number(j["noise_rms"]);
  if (j.contains("noise_seed")) s.noise_seed = j["noise_seed"].get<std::uint64_t>();
  if (j.contains("reference")) {
    const Json& r = j["reference"];
    if (r.value("type", std::string("fourth_order")) != "fourth_order") {
      throw FormatError("reference type must be fourth_order");
    }
    s.reference.stroke = r.value("stroke_m", 0.0);
    s.reference.freq_hz = r.value("freq_hz", 1.0);
    if (r.contains("axis")) {
      const Json& d = r["axis"];
      if (!d.is_array()) throw FormatError("reference axis must be an array, one entry per output");
      s.reference.direction.resize(static_cast<Index>(d.size()));
      for (Index i = 0; i < s.reference.direction.size(); ++i) s.reference.direction(i) = number(d[i]);
    }
  }
  if (j.contains("events")) {
    for (const Json& e : j["events"]) {
      FaultEvent ev;
      ev.fault = field(e, "fault").get<Index>();
      ev.start = number(field(e, "t_start_s"));
      ev.end = number(field(e, "t_end_s"));
      ev.magnitude = number(field(e, "magnitude"));
      const std::string shape = e.value("shape", std::string("step"));
      if (shape != "step" && shape != "sine") throw FormatError("fault shape must be step or sine");
      ev.shape = shape == "sine" ? FaultShape::kSine : FaultShape::kStep;
      ev.frequency_hz = e.value("frequency_hz", 0.0);
      s.events.push_back(ev);
    }
  }
  return s;
}

std::string dump_json(const Json& j, int indent) {
  std::ostringstream os;
  dump_value(os, j, indent, 0);
  os << '\n';
  return os.str();
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << dump_json(j);
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

StructureMatrix read_structure(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return structure_from_csv(read_text(path));
  return structure_from_json(read_json(path));
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& columns, Index stride) {
  if (static_cast<Index>(header.size()) != columns.cols()) {
    throw DimensionError("write_csv: header and column counts differ");
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw FormatError("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::fprintf(f, "%s%c", header[i].c_str(), i + 1 < header.size() ? ',' : '\n');
  }
  for (Index r = 0; r < columns.rows(); r += std::max<Index>(stride, 1)) {
    for (Index c = 0; c < columns.cols(); ++c) {
      std::fprintf(f, "%.17g%c", columns(r, c), c + 1 < columns.cols() ? ',' : '\n');
    }
  }
  std::fclose(f);
}

void write_decisions_csv(const std::filesystem::path& path, const Vector& time,
                         const DecisionTrace& trace, Index stride) {
  if (static_cast<std::size_t>(time.size()) != trace.isolated.size()) {
    throw DimensionError("write_decisions_csv: time and trace lengths differ");
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw FormatError("cannot write " + path.string());
  std::fprintf(f, "time,fired,isolated\n");
  for (Index k = 0; k < time.size(); k += std::max<Index>(stride, 1)) {
    const int iso = trace.isolated[static_cast<std::size_t>(k)];
    std::fprintf(f, "%.17g,%s,%d\n", time(k), trace.pattern(k).c_str(), iso >= 0 ? iso + 1 : iso);
  }
  std::fclose(f);
}

void Report::verdict(const std::string& name, bool pass, const std::string& detail) {
  Json v = {{"name", name}, {"pass", pass}};
  if (!detail.empty()) v["detail"] = detail;
  verdicts.push_back(std::move(v));
}

bool Report::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const Json& v) { return v.at("pass").get<bool>(); });
}

Json Report::to_json() const {
  Json j = Json::object();
  j["command"] = command;
  j["inputs"] = inputs;
  j["verdicts"] = verdicts;
  j["metrics"] = metrics;
  j["artifacts"] = artifacts;
  return j;
}

std::string residual_plot_script(Index residuals, const std::string& csv_name,
                                 const Vector& thresholds) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 1200," << 160 * residuals << "\n"
     << "set output 'residuals.png'\n"
     << "set multiplot layout " << residuals << ",1\n"
     << "set lmargin 10\nunset key\n";
  for (Index i = 0; i < residuals; ++i) {
    os << "set ylabel 'e" << i + 1 << "'\n";
    os << (i + 1 == residuals ? "set xlabel 'time [s]'\n" : "unset xlabel\n");
    os << "plot '" << csv_name << "' using 1:" << i + 2 << " with lines lw 1, '' using 1:"
       << residuals + i + 2 << " with lines lw 2";
    if (i < thresholds.size()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", thresholds(i));
      os << ", " << buf << " dt 2";
    }
    os << "\n";
  }
  os << "unset multiplot\n";
  return os.str();
}

}  // namespace fdi
