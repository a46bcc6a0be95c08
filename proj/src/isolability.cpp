#include "fdi/isolability.hpp"

#include <sstream>

namespace fdi {
namespace {

RankTest rank_test(const PartitionedPlant& plant, const std::vector<Index>& base,
                   const std::vector<Index>& tested, const RankOptions& options) {
  RankTest out;
  out.rank_without = base.empty() ? 0 : normal_rank(plant.model, base, options);
  std::vector<Index> all = base;
  all.insert(all.end(), tested.begin(), tested.end());
  const RankProbe probe = probe_rank(plant.model, all, options);
  out.rank_with = probe.rank;
  out.margin = probe.relative_margin;
  out.pass = out.rank_with > out.rank_without;
  return out;
}

}  // namespace

StructureMatrix::StructureMatrix(Eigen::MatrixXi entries) : entries_(std::move(entries)) {
  for (Index j = 0; j < entries_.cols(); ++j)
    for (Index i = 0; i < entries_.rows(); ++i)
      if (entries_(i, j) != 0 && entries_(i, j) != 1) {
        throw DimensionError("structure matrix entries must be 0 or 1");
      }
}

std::vector<Index> StructureMatrix::zeros_in_row(Index i) const {
  std::vector<Index> out;
  for (Index j = 0; j < cols(); ++j)
    if (entries_(i, j) == 0) out.push_back(j);
  return out;
}

std::vector<Index> StructureMatrix::empty_columns() const {
  std::vector<Index> out;
  for (Index j = 0; j < cols(); ++j)
    if (entries_.col(j).sum() == 0) out.push_back(j);
  return out;
}

StructureMatrix make_structure(StructureKind kind, Index n_f) {
  if (n_f < 1) throw DimensionError("make_structure: need at least one fault");
  const Eigen::MatrixXi eye = Eigen::MatrixXi::Identity(n_f, n_f);
  switch (kind) {
    case StructureKind::kStrong:
      return StructureMatrix(eye);
    case StructureKind::kHollow:
      return StructureMatrix(Eigen::MatrixXi::Ones(n_f, n_f) - eye);
    case StructureKind::kWafer17: {
      if (n_f != 17) throw DimensionError("make_structure: wafer17 requires 17 faults");
      Eigen::MatrixXi s = Eigen::MatrixXi::Ones(n_f, n_f) - eye;
      for (Index i = 0; i < 4; ++i) s(i, 13 + i) = 0;
      return StructureMatrix(s);
    }
  }
  throw DimensionError("make_structure: unknown kind");
}

std::string IsolabilityReport::first_failure() const {
  for (const SpecEntry& e : entries) {
    if (!e.test.pass) {
      std::ostringstream os;
      os << "row " << e.row + 1 << ", fault " << e.fault + 1 << " (rank "
         << e.test.rank_with << " vs " << e.test.rank_without << ")";
      return os.str();
    }
  }
  return {};
}

std::vector<RankTest> is_completely_detectable(const PartitionedPlant& plant,
                                               const RankOptions& options) {
  if (plant.n_f < 1) throw DimensionError("is_completely_detectable: no fault columns");
  std::vector<RankTest> out;
  const std::vector<Index> base = plant.d_columns();
  for (Index j = 0; j < plant.n_f; ++j) {
    out.push_back(rank_test(plant, base, {plant.fault_column(j)}, options));
  }
  return out;
}

IsolabilityReport is_s_isolable(const PartitionedPlant& plant, const StructureMatrix& s,
                                const RankOptions& options) {
  if (s.cols() != plant.n_f) {
    throw DimensionError("is_s_isolable: structure has " + std::to_string(s.cols()) +
                         " columns for " + std::to_string(plant.n_f) + " faults");
  }
  IsolabilityReport report;
  for (Index i = 0; i < s.rows(); ++i) {
    std::vector<Index> base = plant.d_columns();
    for (Index j : s.zeros_in_row(i)) base.push_back(plant.fault_column(j));
    for (Index j = 0; j < s.cols(); ++j) {
      if (s(i, j) == 0) continue;
      SpecEntry e{i, j, rank_test(plant, base, {plant.fault_column(j)}, options)};
      report.isolable = report.isolable && e.test.pass;
      report.entries.push_back(e);
    }
  }
  return report;
}

bool is_strongly_isolable(const PartitionedPlant& plant, const RankOptions& options) {
  const std::vector<Index> d = plant.d_columns();
  const Index rd = d.empty() ? 0 : normal_rank(plant.model, d, options);
  std::vector<Index> all = d;
  for (Index j : plant.f_columns()) all.push_back(j);
  return normal_rank(plant.model, all, options) == rd + plant.n_f;
}

WeakIsolabilityReport is_weakly_isolable(const PartitionedPlant& plant,
                                         const RankOptions& options) {
  if (plant.n_f < 2) throw DimensionError("is_weakly_isolable: needs at least two faults");
  WeakIsolabilityReport report;
  for (Index i = 0; i < plant.n_f; ++i) {
    std::vector<Index> base = plant.d_columns();
    base.push_back(plant.fault_column(i));
    for (Index j = 0; j < plant.n_f; ++j) {
      if (i == j) continue;
      if (!rank_test(plant, base, {plant.fault_column(j)}, options).pass) {
        report.isolable = false;
        report.failing_pairs.emplace_back(i, j);
      }
    }
  }
  return report;
}

}  // namespace fdi
