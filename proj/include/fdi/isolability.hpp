#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fdi/plant.hpp"

namespace fdi {

/// Binary specification matrix: rows are residual specifications, columns
/// are fault signatures.
class StructureMatrix {
 public:
  StructureMatrix() = default;
  explicit StructureMatrix(Eigen::MatrixXi entries);

  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  int operator()(Index i, Index j) const { return entries_(i, j); }
  const Eigen::MatrixXi& entries() const { return entries_; }

  /// Faults a residual must not react to (S_ij = 0).
  std::vector<Index> zeros_in_row(Index i) const;
  /// Columns with no 1 entry (such faults can never be detected).
  std::vector<Index> empty_columns() const;

  bool operator==(const StructureMatrix& other) const {
    return entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() && entries_ == other.entries_;
  }

 private:
  Eigen::MatrixXi entries_;
};

enum class StructureKind { kStrong, kHollow, kWafer17 };

/// kStrong: identity; kHollow: ones minus identity; kWafer17: hollow 17 x 17
/// with extra zeros coupling actuator i and sensor i for i = 1..4.
StructureMatrix make_structure(StructureKind kind, Index n_f);

/// Outcome of rank [base, tested] > rank [base].
struct RankTest {
  bool pass = false;
  Index rank_with = 0;
  Index rank_without = 0;
  double margin = 0.0;  // relative singular-value margin of rank_with
};

std::vector<RankTest> is_completely_detectable(const PartitionedPlant& plant,
                                               const RankOptions& options = {});

struct SpecEntry {
  Index row = 0;
  Index fault = 0;
  RankTest test;
};

struct IsolabilityReport {
  bool isolable = true;
  std::vector<SpecEntry> entries;  // one per S_ij = 1
  /// "row i, fault j" of the first failing entry (1-based), empty if none.
  std::string first_failure() const;
};

IsolabilityReport is_s_isolable(const PartitionedPlant& plant, const StructureMatrix& s,
                                const RankOptions& options = {});

/// rank [G_d G_f] = rank G_d + n_f.
bool is_strongly_isolable(const PartitionedPlant& plant, const RankOptions& options = {});

struct WeakIsolabilityReport {
  bool isolable = true;
  std::vector<std::pair<Index, Index>> failing_pairs;  // 0-based (i, j)
};

/// Pairwise conditions rank [G_d G_fi G_fj] > rank [G_d G_fi] for i != j.
/// Throws DimensionError for fewer than two faults.
WeakIsolabilityReport is_weakly_isolable(const PartitionedPlant& plant,
                                         const RankOptions& options = {});

}  // namespace fdi
