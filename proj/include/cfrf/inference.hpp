#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfrf/common.hpp"

namespace cfrf {

// Runs on a subsampled dataset and returns one tau per row. The second
// argument is a per-replicate seed.
using IteEstimatorFn = std::function<std::vector<double>(const Dataset&, std::uint64_t)>;

struct InferenceConfig {
  double subsample_fraction = 0.1;
  int n_replicates = 1000;
  std::uint64_t seed = 0;
  // sqrt(m/n) subsampling-to-full-sample variance correction; disable to
  // report the raw replicate standard deviation.
  bool rescale_std_error = true;
};

struct CoefficientRow {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool significant = false;
};

struct CoefficientTable {
  std::vector<CoefficientRow> rows;  // intercept first (overall exposure effect)
  int replicates_used = 0;
  int replicates_dropped = 0;
};

// Subsampling inference: draw m = fraction*n rows without replacement, run
// the estimator, regress tau on [1, X] by OLS, aggregate across replicates.
CoefficientTable subsample_inference(const Dataset& data,
                                     const std::vector<std::string>& covariate_names,
                                     const InferenceConfig& config,
                                     const IteEstimatorFn& estimator);

std::string coefficient_table_text(const CoefficientTable& table);

// Long-format conditioning-panel records for external plotting. Continuous
// conditioning variables are cut into disjoint quantile bins; binary or
// low-cardinality variables keep their value labels. panel_var may be empty.
std::string coplot_export(const std::vector<double>& tau_hat, const Dataset& data,
                          const std::vector<std::string>& covariate_names,
                          const std::string& x_axis_var, const std::string& panel_var,
                          const std::string& cond_var_vertical,
                          const std::string& cond_var_horizontal, int bins);

}  // namespace cfrf
