#include "cfrf/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cfrf/io.hpp"

namespace cfrf {

namespace {

constexpr std::uint64_t kSubsampleTag = 0x5ab5'a3b1'e0d9'42c1ULL;

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset sub;
  sub.x = Matrix(rows.size(), data.p());
  sub.t.resize(rows.size());
  sub.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) sub.x(i, j) = data.x(rows[i], j);
    sub.t[i] = data.t[rows[i]];
    sub.y[i] = data.y[rows[i]];
  }
  return sub;
}

}  // namespace

CoefficientTable subsample_inference(const Dataset& data,
                                     const std::vector<std::string>& covariate_names,
                                     const InferenceConfig& config,
                                     const IteEstimatorFn& estimator) {
  data.validate();
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (config.subsample_fraction <= 0.0 || config.subsample_fraction >= 1.0)
    throw ConfigError("subsample_fraction must lie in (0,1)");
  if (config.n_replicates < 2) throw ConfigError("need at least 2 replicates");
  const std::size_t m = static_cast<std::size_t>(config.subsample_fraction * n);
  if (m < p + 2)
    throw ConfigError("subsample size " + std::to_string(m) +
                      " too small for a determined fit over " + std::to_string(p) +
                      " covariates");

  const std::size_t n_coef = p + 1;
  std::vector<std::vector<double>> coefs(config.n_replicates);
  std::vector<char> ok(config.n_replicates, 0);

  parallel_for(config.n_replicates, [&](std::size_t r) {
    auto rng = make_rng(mix_key(config.seed, r, kSubsampleTag));
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> rows;
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::shuffle(all.begin(), all.end(), rng);
      rows.assign(all.begin(), all.begin() + m);
      bool arm[2] = {false, false};
      for (int i : rows) arm[data.t[i]] = true;
      if (arm[0] && arm[1]) break;
      rows.clear();
    }
    if (rows.empty()) return;  // counted as dropped

    Dataset sub = take_rows(data, rows);
    std::vector<double> tau;
    try {
      tau = estimator(sub, mix_key(config.seed, r));
    } catch (const std::exception& e) {
      log_warning("subsample replicate " + std::to_string(r) + " failed: " + e.what());
      return;
    }
    if (tau.size() != m) return;

    Eigen::MatrixXd design(m, n_coef);
    Eigen::VectorXd response(m);
    for (std::size_t i = 0; i < m; ++i) {
      design(i, 0) = 1.0;
      for (std::size_t j = 0; j < p; ++j) design(i, j + 1) = sub.x(i, j);
      response(i) = tau[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < static_cast<Eigen::Index>(n_coef)) return;  // singular: dropped
    Eigen::VectorXd beta = qr.solve(response);
    coefs[r].assign(beta.data(), beta.data() + n_coef);
    ok[r] = 1;
  });

  CoefficientTable table;
  for (int r = 0; r < config.n_replicates; ++r)
    (ok[r] ? table.replicates_used : table.replicates_dropped)++;
  if (table.replicates_dropped > config.n_replicates / 5)
    throw ConfigError("more than 20% of subsampling replicates were dropped (" +
                      std::to_string(table.replicates_dropped) + "/" +
                      std::to_string(config.n_replicates) + ")");

  const double scale = config.rescale_std_error
                           ? std::sqrt(static_cast<double>(m) / static_cast<double>(n))
                           : 1.0;
  table.rows.resize(n_coef);
  for (std::size_t c = 0; c < n_coef; ++c) {
    double mean = 0.0;
    for (int r = 0; r < config.n_replicates; ++r)
      if (ok[r]) mean += coefs[r][c];
    mean /= table.replicates_used;
    double ss = 0.0;
    for (int r = 0; r < config.n_replicates; ++r)
      if (ok[r]) ss += (coefs[r][c] - mean) * (coefs[r][c] - mean);
    const double sd = std::sqrt(ss / (table.replicates_used - 1));
    CoefficientRow& row = table.rows[c];
    row.term = c == 0 ? "intercept" : covariate_names.at(c - 1);
    row.estimate = mean;
    row.std_error = sd * scale;
    row.z = row.std_error > 0.0 ? row.estimate / row.std_error : 0.0;
    row.significant = std::abs(row.z) > 1.96;
  }
  return table;
}

std::string coefficient_table_text(const CoefficientTable& table) {
  std::string out = "term\testimate\tstd_error\tz\tsignificant\n";
  for (const auto& row : table.rows) {
    out += row.term + '\t' + format_double(row.estimate) + '\t' +
           format_double(row.std_error) + '\t' + format_double(row.z) + '\t' +
           (row.significant ? "1" : "0") + '\n';
  }
  return out;
}

namespace {

int find_var(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown variable: " + name);
  return static_cast<int>(it - names.begin());
}

// Per-row stratum labels for a conditioning variable; disjoint quantile bins
// for continuous variables, value labels otherwise.
std::vector<std::string> condition_labels(const Dataset& data, int var, int bins,
                                          const std::string& name) {
  const std::size_t n = data.n();
  std::set<double> distinct;
  for (std::size_t i = 0; i < n; ++i) distinct.insert(data.x(i, var));
  std::vector<std::string> labels(n);
  if (distinct.size() == 1) {
    log_warning("conditioning variable '" + name + "' is constant; single stratum");
    labels.assign(n, name + "=all");
    return labels;
  }
  if (static_cast<int>(distinct.size()) <= bins) {
    for (std::size_t i = 0; i < n; ++i)
      labels[i] = name + "=" + format_double(data.x(i, var));
    return labels;
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return data.x(a, var) < data.x(b, var);
  });
  for (std::size_t rank = 0; rank < n; ++rank) {
    const int bin = static_cast<int>(rank * static_cast<std::size_t>(bins) / n);
    labels[order[rank]] = name + "=bin" + std::to_string(bin + 1);
  }
  return labels;
}

}  // namespace

std::string coplot_export(const std::vector<double>& tau_hat, const Dataset& data,
                          const std::vector<std::string>& covariate_names,
                          const std::string& x_axis_var, const std::string& panel_var,
                          const std::string& cond_var_vertical,
                          const std::string& cond_var_horizontal, int bins) {
  if (tau_hat.size() != data.n()) throw ConfigError("tau length does not match dataset");
  if (bins < 1) throw ConfigError("bins must be positive");
  const int xv = find_var(covariate_names, x_axis_var);
  const int cv = find_var(covariate_names, cond_var_vertical);
  const int ch = find_var(covariate_names, cond_var_horizontal);

  auto v_labels = condition_labels(data, cv, bins, cond_var_vertical);
  auto h_labels = condition_labels(data, ch, bins, cond_var_horizontal);
  std::vector<std::string> p_labels(data.n(), "all");
  if (!panel_var.empty())
    p_labels = condition_labels(data, find_var(covariate_names, panel_var), bins, panel_var);

  std::string out = "stratum_v\tstratum_h\tpanel\tx\ttau_hat\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    out += v_labels[i] + '\t' + h_labels[i] + '\t' + p_labels[i] + '\t' +
           format_double(data.x(i, xv)) + '\t' + format_double(tau_hat[i]) + '\n';
  }
  return out;
}

}  // namespace cfrf
