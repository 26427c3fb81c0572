#include "cfrf/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace cfrf {

namespace {
constexpr std::uint64_t kCovTag = 0xc0b4'11aa'72f0'9d31ULL;
constexpr std::uint64_t kTreatTag = 0x7e47'5511'0a0a'bb29ULL;
constexpr std::uint64_t kNoiseTag = 0x0153'66e2'91c4'7adfULL;
constexpr std::uint64_t kEstTag = 0xe571'3a30'445b'1c87ULL;
}  // namespace

Matrix simulate_covariates(std::size_t n, std::uint64_t seed) {
  Matrix x(n, 20);
  auto rng = make_rng(mix_key(seed, kCovTag));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 11; ++j) x(i, j) = normal(rng);
    for (std::size_t j = 11; j < 20; ++j) x(i, j) = coin(rng) ? 1.0 : 0.0;
  }
  return x;
}

double linear_predictor(std::span<const double> x) {
  return -2.0 + 0.028 * x[0] - 0.374 * x[1] - 0.03 * x[2] + 0.118 * x[3] -
         0.394 * x[10] + 0.875 * x[11] + 0.9 * x[12];
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<int> assign_treatment(const Matrix& x, std::uint64_t seed) {
  auto rng = make_rng(mix_key(seed, kTreatTag));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> t(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    t[i] = unif(rng) < logistic(linear_predictor(row)) ? 1 : 0;
  }
  return t;
}

double sim_g(std::span<const double> x) {
  return 0.254 * x[1] * x[1] - 0.152 * x[10] - 0.4 * x[10] * x[10] - 0.126 * x[11];
}

double sim_h(std::span<const double> x) {
  return 0.254 * x[2] * x[2] - 0.152 * x[3] - 0.126 * x[4] - 0.4 * x[4] * x[4];
}

double mean_function(SimModelId model, std::span<const double> x, int t) {
  const double lin = 0.4 * x[0] + 0.154 * x[1] - 0.152 * x[10] - 0.126 * x[11];
  double f = 2.455;
  switch (model) {
    case SimModelId::M1:
      if (t == 0) f -= lin;
      // g(x) = 0 counts as effect-inactive; the indicator is strict.
      if (t == 1 && sim_g(x) > 0.0) f -= 1.0;
      break;
    case SimModelId::M2:
      if (t == 0) f -= std::sin(lin);
      if (t == 1 && sim_g(x) > 0.0) f -= 1.0;
      break;
    case SimModelId::M3:
      if (t == 0) f -= std::sin(lin);
      if (t == 1 && sim_h(x) > 0.0) f -= 1.0;
      break;
  }
  return f;
}

OutcomeAndTruth outcome_and_truth(const SimModel& model, const Matrix& x,
                                  const std::vector<int>& t, std::uint64_t seed) {
  if (model.sigma <= 0.0) throw ConfigError("sigma must be positive");
  auto rng = make_rng(mix_key(seed, kNoiseTag));
  std::normal_distribution<double> noise(0.0, model.sigma);
  OutcomeAndTruth out;
  out.y.resize(x.rows());
  out.true_tau.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    out.y[i] = mean_function(model.model_id, row, t[i]) + noise(rng);
    out.true_tau[i] =
        mean_function(model.model_id, row, 1) - mean_function(model.model_id, row, 0);
  }
  return out;
}

SimulatedData simulate(const SimModel& model, std::uint64_t seed) {
  SimulatedData sim;
  sim.dataset.x = simulate_covariates(model.n, seed);
  sim.dataset.t = assign_treatment(sim.dataset.x, seed);
  auto out = outcome_and_truth(model, sim.dataset.x, sim.dataset.t, seed);
  sim.dataset.y = std::move(out.y);
  sim.true_tau = std::move(out.true_tau);
  sim.true_propensity.resize(model.n);
  for (std::size_t i = 0; i < model.n; ++i) {
    auto row = sim.dataset.x.row(i);
    sim.true_propensity[i] = logistic(linear_predictor(row));
  }
  return sim;
}

std::vector<int> stratify_by_propensity(const std::vector<double>& propensity, int n_strata) {
  if (n_strata < 1) throw ConfigError("n_strata must be >= 1");
  const std::size_t n = propensity.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return propensity[a] < propensity[b];  // ties keep row order
  });
  std::vector<int> stratum(n);
  for (std::size_t rank = 0; rank < n; ++rank)
    stratum[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(n_strata) / n);
  return stratum;
}

StratifiedMetrics conditional_metrics(const std::vector<Replicate>& replicates, int n_strata) {
  if (replicates.empty()) throw ConfigError("conditional_metrics needs replicates");
  StratifiedMetrics out;
  out.n_strata = n_strata;
  out.bias.assign(n_strata, 0.0);
  out.rmse.assign(n_strata, 0.0);
  out.stratum_counts.assign(n_strata, 0);
  out.b_effective.assign(n_strata, 0);

  std::vector<double> sum_tau_hat(n_strata, 0.0);
  std::vector<double> sum_tau(n_strata, 0.0);
  std::vector<double> sum_sq(n_strata, 0.0);

  for (const Replicate& rep : replicates) {
    const std::size_t n = rep.tau_hat.size();
    if (rep.true_tau.size() != n || rep.propensity.size() != n)
      throw ConfigError("replicate vectors must share one length");
    auto stratum = stratify_by_propensity(rep.propensity, n_strata);
    std::vector<double> m_tau_hat(n_strata, 0.0), m_tau(n_strata, 0.0), m_sq(n_strata, 0.0);
    std::vector<long> count(n_strata, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int m = stratum[i];
      m_tau_hat[m] += rep.tau_hat[i];
      m_tau[m] += rep.true_tau[i];
      const double e = rep.tau_hat[i] - rep.true_tau[i];
      m_sq[m] += e * e;
      ++count[m];
    }
    for (int m = 0; m < n_strata; ++m) {
      if (count[m] == 0) continue;  // replicate skipped for this stratum
      sum_tau_hat[m] += m_tau_hat[m] / count[m];
      sum_tau[m] += m_tau[m] / count[m];
      sum_sq[m] += m_sq[m] / count[m];
      out.stratum_counts[m] += count[m];
      ++out.b_effective[m];
    }
  }
  for (int m = 0; m < n_strata; ++m) {
    const int b = out.b_effective[m];
    if (b == 0) continue;
    out.bias[m] = sum_tau_hat[m] / b - sum_tau[m] / b;
    out.rmse[m] = std::sqrt(sum_sq[m] / b);
  }
  return out;
}

double StratifiedMetrics::aggregate_rmse() const {
  double s = 0.0;
  int k = 0;
  for (int m = 0; m < n_strata; ++m)
    if (b_effective[m] > 0) {
      s += rmse[m];
      ++k;
    }
  return k > 0 ? s / k : 0.0;
}

double StratifiedMetrics::aggregate_abs_bias() const {
  double s = 0.0;
  int k = 0;
  for (int m = 0; m < n_strata; ++m)
    if (b_effective[m] > 0) {
      s += std::abs(bias[m]);
      ++k;
    }
  return k > 0 ? s / k : 0.0;
}

std::vector<double> run_estimator(const Dataset& data, EstimatorConfig config,
                                  std::uint64_t seed) {
  switch (config.method) {
    case Method::VT: {
      config.forest.seed = seed;
      return estimate_vt(data, config.forest).tau_hat;
    }
    case Method::VT_I: {
      config.forest.seed = seed;
      return estimate_vt_interaction(data, config.forest).tau_hat;
    }
    case Method::CF: {
      config.forest.seed = seed;
      return estimate_cf(data, config.forest).tau_hat;
    }
    case Method::SYNCF: {
      config.synthetic.seed = seed;
      return estimate_syncf(data, config.synthetic).tau_hat;
    }
    case Method::BIVARIATE: {
      config.forest.seed = seed;
      ForestSpec s = config.forest;
      if (s.nodesize == 3) s.nodesize = 1;  // module default
      return estimate_bivariate(data, s, config.bivariate_iterations).tau_hat;
    }
    case Method::HONEST: {
      config.honest.seed = seed;
      return estimate_honest(data, config.honest).tau_hat;
    }
    case Method::EXTERNAL:
      throw ConfigError("external predictions cannot be re-run inside the benchmark");
  }
  throw ConfigError("unhandled method");
}

std::vector<ExperimentCell> run_experiment(const ExperimentConfig& config) {
  if (config.estimators.empty()) throw ConfigError("no estimators configured");
  struct Job {
    std::size_t model_idx, est_idx, rep;
  };
  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < config.models.size(); ++mi)
    for (std::size_t ei = 0; ei < config.estimators.size(); ++ei)
      for (int b = 0; b < config.n_replicates; ++b)
        jobs.push_back({mi, ei, static_cast<std::size_t>(b)});

  struct Slot {
    Replicate rep;
    bool ok = false;
  };
  std::vector<Slot> slots(jobs.size());

  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    SimModel model{config.models[job.model_idx], config.sigma, config.n};
    const std::uint64_t data_seed = config.base_seed + job.rep;
    SimulatedData sim = simulate(model, data_seed);
    const std::uint64_t est_seed =
        mix_key(config.base_seed, job.rep, kEstTag + job.est_idx);
    try {
      Slot& slot = slots[j];
      slot.rep.tau_hat = run_estimator(sim.dataset, config.estimators[job.est_idx], est_seed);
      slot.rep.true_tau = std::move(sim.true_tau);
      slot.rep.propensity = std::move(sim.true_propensity);
      slot.ok = true;
    } catch (const std::exception& e) {
      log_warning("replicate " + std::to_string(job.rep) + " failed: " + e.what());
    }
  });

  std::vector<ExperimentCell> cells;
  for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
    for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
      ExperimentCell cell;
      cell.model = config.models[mi];
      cell.method = config.estimators[ei].method;
      std::vector<Replicate> reps;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].model_idx != mi || jobs[j].est_idx != ei) continue;
        if (slots[j].ok)
          reps.push_back(std::move(slots[j].rep));
        else
          ++cell.failed_replicates;
      }
      if (reps.empty()) throw ConfigError("every replicate failed for one cell");
      cell.metrics = conditional_metrics(reps, config.n_strata);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string results_table(const std::vector<ExperimentCell>& cells) {
  std::string out = "model\testimator\tstratum\tbias\trmse\tcount\tB_effective\n";
  char buf[160];
  for (const auto& cell : cells) {
    for (int m = 0; m < cell.metrics.n_strata; ++m) {
      std::snprintf(buf, sizeof(buf), "%d\t%s\t%d\t%.17g\t%.17g\t%ld\t%d\n",
                    static_cast<int>(cell.model), method_name(cell.method).c_str(), m + 1,
                    cell.metrics.bias[m], cell.metrics.rmse[m],
                    cell.metrics.stratum_counts[m], cell.metrics.b_effective[m]);
      out += buf;
    }
  }
  return out;
}

}  // namespace cfrf
