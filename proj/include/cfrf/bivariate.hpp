#pragma once

#include "cfrf/forest.hpp"

namespace cfrf {

// Column j of y_pair holds the outcome under treatment j; for causal use
// exactly one entry per row is observed at the start.
struct BivariateState {
  Matrix y_pair;  // n x 2
  std::vector<std::array<bool, 2>> observed_mask;
  int iteration = 0;
  // Mean absolute change of imputed entries between successive iterations.
  std::vector<double> mean_abs_change;
};

// Sum over the two response columns of the per-column variance reduction,
// each standardized by the parent-node column sum of squares. Missing entries
// are skipped; a column with zero variance contributes zero.
double bivariate_split_score(const Matrix& x, const Matrix& y_pair,
                             const std::vector<std::array<bool, 2>>& mask,
                             const std::vector<int>& rows, int variable,
                             double threshold);

// Iterated bivariate-response imputation. Iteration 1 splits on observed
// entries only and fills each missing entry from OOB terminal-node donors;
// later iterations re-grow on the completed matrix and refill from in-bag
// terminal-node means. Observed entries are never overwritten.
BivariateState impute_counterfactuals(const Matrix& x, const Matrix& y_pair,
                                      std::vector<std::array<bool, 2>> observed_mask,
                                      const ForestSpec& spec, int n_iterations);

// Treats each row's counterfactual outcome as the missing entry.
BivariateState impute_counterfactuals(const Dataset& data, const ForestSpec& spec,
                                      int n_iterations);

}  // namespace cfrf
