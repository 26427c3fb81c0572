#pragma once

#include <optional>

#include "cfrf/forest.hpp"

namespace cfrf {

struct SyntheticSpec {
  std::vector<int> nodesize_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30, 50, 100};
  std::vector<int> mtry_grid = {1, 10, 20};
  int base_n_trees = 250;
  int final_n_trees = 1000;
  int final_nodesize = 3;
  int final_mtry = 0;  // 0 = ceil((p + K) / 3)
  std::uint64_t seed = 0;

  int n_base_learners() const {
    return static_cast<int>(nodesize_grid.size() * mtry_grid.size());
  }
};

struct SyntheticForest {
  std::vector<Forest> base_learners;  // all sharing one bootstrap plan
  Forest final_forest;                // trained on p + K columns
  std::vector<std::vector<int>> shared_inbag;
  Matrix x_aug;  // training matrix with synthetic feature columns appended
  std::size_t p = 0;
  int n_base = 0;
};

SyntheticForest grow_synthetic(const Matrix& x, const std::vector<double>& y,
                               const SyntheticSpec& spec);

// New-point prediction: base learners use all their trees, the final forest
// uses all its trees on the augmented row.
double predict_synthetic(const SyntheticForest& sf, std::span<const double> x_row);

// Training-row prediction keeping OOB coherent across both stages: base
// features and the final average use only trees where `row` is OOB.
OobPrediction predict_synthetic_oob(const SyntheticForest& sf, int row);

}  // namespace cfrf
