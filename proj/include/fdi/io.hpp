#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdi/closed_loop.hpp"
#include "fdi/synthesis.hpp"

namespace fdi {

using Json = nlohmann::ordered_json;

/// Raised for unreadable or malformed input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

/// {"a","b","c","d","ts"}; ts is null for continuous models.
Json to_json(const StateSpaceModel& model);
StateSpaceModel model_from_json(const Json& j);

/// Model fields plus "partitions": {"n_u","n_d","n_w","n_f"}.
Json to_json(const PartitionedPlant& plant);
PartitionedPlant plant_from_json(const Json& j);

/// Array of 0/1 rows.
Json to_json(const StructureMatrix& s);
StructureMatrix structure_from_json(const Json& j);
StructureMatrix structure_from_csv(const std::string& text);
std::string structure_to_csv(const StructureMatrix& s);

Json to_json(const FilterBank& bank);
FilterBank bank_from_json(const Json& j);

Json to_json(const FaultScenario& scenario);
FaultScenario scenario_from_json(const Json& j);

/// Writes JSON with every number printed to 17 significant digits;
/// non-finite numbers become null.
std::string dump_json(const Json& j, int indent = 2);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

/// Dispatches on the extension (.json or .csv).
StructureMatrix read_structure(const std::filesystem::path& path);

/// Header line then one row per `stride`-th row of `columns`.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& columns, Index stride = 1);

/// time, fired bitstring, isolated fault (1-based; -1 none, -2 ambiguous).
void write_decisions_csv(const std::filesystem::path& path, const Vector& time,
                         const DecisionTrace& trace, Index stride = 1);

/// {command, inputs, verdicts[], metrics{}, artifacts[]}.
struct Report {
  std::string command;
  Json inputs = Json::object();
  Json verdicts = Json::array();
  Json metrics = Json::object();
  std::vector<std::string> artifacts;

  void verdict(const std::string& name, bool pass, const std::string& detail = {});
  bool all_pass() const;
  Json to_json() const;
};

/// gnuplot script, one panel per residual: the trace (column i + 2), its
/// moving RMS (column residuals + i + 2) and the RMS threshold.
std::string residual_plot_script(Index residuals, const std::string& csv_name,
                                 const Vector& thresholds);

}  // namespace fdi
