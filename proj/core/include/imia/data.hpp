#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imia/common.hpp"

namespace imia {

/// Feature matrix plus integer class labels in [0, num_classes).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  Index dim() const { return features.cols(); }

  /// Throws DomainError / ShapeError when an invariant is broken.
  void validate() const;
};

/// Copies the given rows (in the given order) into a new Dataset with the
/// same class count.
Dataset subset(const Dataset& parent, std::span<const Index> rows);

/// Reads a header-first, comma-separated file. `label_column` names the label
/// column; every other column is a numeric feature.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes `dataset` in the format load_csv reads. Feature columns are named
/// f0..f{d-1}; values use the shortest round-trip representation.
void write_csv(const Dataset& dataset, const std::filesystem::path& path,
               const std::string& label_column = "label");

/// Gaussian clusters around centroids on the unit hypersphere.
Dataset gen_synthetic(std::size_t n, int dim, int num_classes, double cluster_spread,
                      std::uint64_t seed);

/// Role fractions of the five disjoint partitions.
struct SplitFractions {
  double query_train = 1.0 / 6;
  double query_val = 1.0 / 6;
  double aux_train = 1.0 / 6;
  double aux_val = 1.0 / 6;
  double aux_reference = 2.0 / 6;

  std::array<double, 5> as_array() const {
    return {query_train, query_val, aux_train, aux_val, aux_reference};
  }
};

/// Five pairwise-disjoint, sorted index sets over one parent Dataset.
struct ExperimentSplit {
  std::vector<Index> query_train;
  std::vector<Index> query_val;
  std::vector<Index> aux_train;
  std::vector<Index> aux_val;
  std::vector<Index> aux_reference;

  std::array<const std::vector<Index>*, 5> parts() const {
    return {&query_train, &query_val, &aux_train, &aux_val, &aux_reference};
  }
  /// aux_train followed by aux_val.
  std::vector<Index> auxiliary_pool() const;
};

/// Class-stratified split. Set s receives floor(fraction_s * n) rows, and each
/// class contributes within one row of its proportional share.
ExperimentSplit make_split(const Dataset& dataset, const SplitFractions& fractions,
                           std::uint64_t seed);

}  // namespace imia
