#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfrf/common.hpp"
#include "cfrf/tree.hpp"

namespace cfrf {

struct ForestSpec {
  int n_trees = 1000;
  int mtry = 0;      // 0 = ceil(p/3) at fit time
  int nodesize = 3;
  std::uint64_t seed = 0;
  bool bootstrap = true;          // false: every tree sees each row once
  std::vector<int> exclude_split_vars;
};

class NoOobTreesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OobPrediction {
  double value = 0.0;
  int trees_used = 0;
  bool oob = true;  // false when the in-bag fallback was taken
};

struct Forest {
  std::vector<Tree> trees;
  ForestSpec spec;
  std::uint64_t training_fingerprint = 0;
  std::size_t n_train = 0;
  std::size_t p_train = 0;
};

// Multinomial bootstrap counts; sums to n.
std::vector<int> bootstrap_sample(std::size_t n, std::mt19937_64& rng);

// Expands counts into a row-id list with multiplicity.
std::vector<int> expand_sample(const std::vector<int>& counts);

ForestSpec resolve_spec(ForestSpec spec, std::size_t n, std::size_t p);

Forest grow_forest(const Matrix& x, const std::vector<double>& y, const ForestSpec& spec);

// Grows with externally fixed per-tree in-bag counts (synthetic forests share
// one bootstrap plan across stages). plan.size() must be >= spec.n_trees.
Forest grow_forest_with_inbag(const Matrix& x, const std::vector<double>& y,
                              const ForestSpec& spec,
                              const std::vector<std::vector<int>>& plan);

double predict(const Forest& forest, std::span<const double> x_row);
std::vector<double> predict(const Forest& forest, const Matrix& x);

// Average over exactly the trees where the training row is OOB. Throws
// NoOobTreesError when the row is in-bag everywhere.
OobPrediction predict_oob(const Forest& forest, const Matrix& x_train, int row);

// Same, but falls back to the all-trees prediction with a logged warning.
OobPrediction predict_oob_or_inbag(const Forest& forest, const Matrix& x_train, int row);

}  // namespace cfrf
