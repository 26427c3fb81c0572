#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cfrf/estimators.hpp"

namespace cfrf {

enum class SimModelId { M1 = 1, M2 = 2, M3 = 3 };

struct SimModel {
  SimModelId model_id = SimModelId::M1;
  double sigma = 0.1;
  std::size_t n = 500;
};

struct SimulatedData {
  Dataset dataset;
  std::vector<double> true_tau;
  std::vector<double> true_propensity;
};

// Columns 1..11 standard normal, 12..20 Bernoulli(0.5), independent.
Matrix simulate_covariates(std::size_t n, std::uint64_t seed);

// Logit-scale treatment model; x is the 20-column covariate row.
double linear_predictor(std::span<const double> x);
double logistic(double z);

std::vector<int> assign_treatment(const Matrix& x, std::uint64_t seed);

// Pieces of the outcome mean functions.
double sim_g(std::span<const double> x);
double sim_h(std::span<const double> x);
double mean_function(SimModelId model, std::span<const double> x, int t);

struct OutcomeAndTruth {
  std::vector<double> y;
  std::vector<double> true_tau;
};
OutcomeAndTruth outcome_and_truth(const SimModel& model, const Matrix& x,
                                  const std::vector<int>& t, std::uint64_t seed);

SimulatedData simulate(const SimModel& model, std::uint64_t seed);

// Quantile strata of the propensity values; ties broken by row index so
// populations stay near-equal. Returned indices lie in [0, M).
std::vector<int> stratify_by_propensity(const std::vector<double>& propensity, int n_strata);

struct Replicate {
  std::vector<double> tau_hat;
  std::vector<double> true_tau;
  std::vector<double> propensity;
};

struct StratifiedMetrics {
  int n_strata = 0;
  std::vector<double> bias;
  std::vector<double> rmse;
  std::vector<long> stratum_counts;   // total rows seen per stratum
  std::vector<int> b_effective;       // replicates contributing per stratum

  double aggregate_rmse() const;
  double aggregate_abs_bias() const;
};

// Stratum means first, then replicate means; empty strata skip that replicate.
StratifiedMetrics conditional_metrics(const std::vector<Replicate>& replicates, int n_strata);

struct EstimatorConfig {
  Method method = Method::VT;
  ForestSpec forest;          // VT / VT-I / CF / bivariate
  SyntheticSpec synthetic;    // SYNCF
  HonestSpec honest;          // HONEST
  int bivariate_iterations = 5;
};

std::vector<double> run_estimator(const Dataset& data, EstimatorConfig config,
                                  std::uint64_t seed);

struct ExperimentConfig {
  std::vector<SimModelId> models = {SimModelId::M1, SimModelId::M2, SimModelId::M3};
  std::vector<EstimatorConfig> estimators;
  std::size_t n = 500;
  int n_replicates = 50;
  int n_strata = 20;
  double sigma = 0.1;
  std::uint64_t base_seed = 1;
};

struct ExperimentCell {
  SimModelId model;
  Method method;
  StratifiedMetrics metrics;
  int failed_replicates = 0;
};

// Replicate b of every (model, estimator) pair shares the dataset simulated
// from base_seed + b, so cross-estimator comparisons are paired.
std::vector<ExperimentCell> run_experiment(const ExperimentConfig& config);

std::string results_table(const std::vector<ExperimentCell>& cells);

}  // namespace cfrf
