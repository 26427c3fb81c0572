#include "cfrf/bivariate.hpp"

#include <cmath>

namespace cfrf {

namespace {

constexpr std::uint64_t kIterTag = 0xb1ba'4a7e'0c3d'9e55ULL;

class BivariateCriterion {
 public:
  BivariateCriterion(const Matrix& y_pair, const std::vector<std::array<bool, 2>>& mask)
      : y_{y_pair.col(0), y_pair.col(1)}, mask_(mask) {}

  bool pure(const int* rows, int n) const {
    for (int c = 0; c < 2; ++c) {
      bool seen = false;
      double first = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!mask_[rows[i]][c]) continue;
        if (!seen) {
          first = y_[c][rows[i]];
          seen = true;
        } else if (y_[c][rows[i]] != first) {
          return false;
        }
      }
    }
    return true;
  }

  double leaf_value(const int*, int) const { return 0.0; }

  struct Sweeper {
    const double* y[2];
    const std::array<bool, 2>* mask;
    double sum_left[2] = {0, 0};
    double sum_total[2] = {0, 0};
    int n_left[2] = {0, 0};
    int n_total[2] = {0, 0};
    double parent_sse[2] = {0, 0};

    void push_left(int row) {
      for (int c = 0; c < 2; ++c) {
        if (!mask[row][c]) continue;
        sum_left[c] += y[c][row];
        ++n_left[c];
      }
    }
    double gain() const {
      double g = 0.0;
      for (int c = 0; c < 2; ++c) {
        if (parent_sse[c] <= 0.0) continue;
        const double sl = sum_left[c];
        const double sr = sum_total[c] - sl;
        const int nl = n_left[c];
        const int nr = n_total[c] - nl;
        double score = -sum_total[c] * sum_total[c] / n_total[c];
        if (nl > 0) score += sl * sl / nl;
        if (nr > 0) score += sr * sr / nr;
        g += score / parent_sse[c];
      }
      return g;
    }
  };

  Sweeper make_sweeper(const int* rows, int n) const {
    Sweeper s;
    s.y[0] = y_[0];
    s.y[1] = y_[1];
    s.mask = mask_.data();
    double sumsq[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 2; ++c) {
        if (!mask_[rows[i]][c]) continue;
        const double v = y_[c][rows[i]];
        s.sum_total[c] += v;
        sumsq[c] += v * v;
        ++s.n_total[c];
      }
    }
    for (int c = 0; c < 2; ++c)
      if (s.n_total[c] > 0)
        s.parent_sse[c] = sumsq[c] - s.sum_total[c] * s.sum_total[c] / s.n_total[c];
    return s;
  }

 private:
  const double* y_[2];
  const std::vector<std::array<bool, 2>>& mask_;
};

Forest grow_bivariate_forest(const Matrix& x, const Matrix& y_pair,
                             const std::vector<std::array<bool, 2>>& mask,
                             ForestSpec spec) {
  const std::size_t n = x.rows();
  spec = resolve_spec(spec, n, x.cols());
  Forest forest;
  forest.spec = spec;
  forest.n_train = n;
  forest.p_train = x.cols();
  forest.trees.resize(spec.n_trees);
  BivariateCriterion crit(y_pair, mask);
  parallel_for(spec.n_trees, [&](std::size_t t) {
    auto rng = make_rng(mix_key(spec.seed, t, 0xb001'5742'aa11'77c3ULL));
    auto counts = bootstrap_sample(n, rng);
    GrowConfig cfg{spec.mtry, spec.nodesize, spec.seed, t, spec.exclude_split_vars};
    auto sample = expand_sample(counts);
    forest.trees[t] = grow_tree(x, crit, std::move(sample), std::move(counts), cfg);
  });
  return forest;
}

// Mean of column c over in-bag leaf members admitted by `usable`; falls back
// to the tree-wide in-bag column mean when the leaf has no donor.
template <class Usable>
double leaf_column_mean(const Tree& tree, int leaf, const double* yc, Usable&& usable) {
  double sum = 0.0;
  int cnt = 0;
  const auto& node = tree.nodes[leaf];
  for (int k = node.begin; k < node.end; ++k) {
    const int r = tree.leaf_rows[k];
    if (!usable(r)) continue;
    sum += yc[r];
    ++cnt;
  }
  if (cnt > 0) return sum / cnt;
  double tsum = 0.0;
  int tcnt = 0;
  for (int r : tree.leaf_rows) {
    if (!usable(r)) continue;
    tsum += yc[r];
    ++tcnt;
  }
  return tcnt > 0 ? tsum / tcnt : 0.0;
}

}  // namespace

double bivariate_split_score(const Matrix& x, const Matrix& y_pair,
                             const std::vector<std::array<bool, 2>>& mask,
                             const std::vector<int>& rows, int variable,
                             double threshold) {
  if (rows.empty()) throw ConfigError("bivariate_split_score needs rows");
  BivariateCriterion crit(y_pair, mask);
  auto sweep = crit.make_sweeper(rows.data(), static_cast<int>(rows.size()));
  int n_left = 0;
  for (int r : rows) {
    if (x(r, variable) <= threshold) {
      sweep.push_left(r);
      ++n_left;
    }
  }
  if (n_left == 0 || n_left == static_cast<int>(rows.size())) return 0.0;
  return sweep.gain();
}

BivariateState impute_counterfactuals(const Matrix& x, const Matrix& y_pair,
                                      std::vector<std::array<bool, 2>> observed_mask,
                                      const ForestSpec& spec, int n_iterations) {
  const std::size_t n = x.rows();
  if (n_iterations < 1) throw ConfigError("n_iterations must be positive");
  if (y_pair.rows() != n || observed_mask.size() != n)
    throw ConfigError("y_pair/mask shape mismatch");

  BivariateState state;
  state.observed_mask = observed_mask;
  state.y_pair = y_pair;

  std::vector<std::pair<int, int>> missing;  // (row, column)
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      if (!observed_mask[i][c]) missing.emplace_back(static_cast<int>(i), c);

  if (missing.empty()) {
    state.iteration = n_iterations;
    state.mean_abs_change.assign(n_iterations, 0.0);
    return state;
  }

  std::vector<std::array<bool, 2>> all_observed(n, {true, true});
  std::vector<double> imputed(missing.size());

  for (int iter = 1; iter <= n_iterations; ++iter) {
    ForestSpec it_spec = spec;
    it_spec.seed = mix_key(spec.seed, static_cast<std::uint64_t>(iter), kIterTag);
    const bool first = iter == 1;
    const auto& split_mask = first ? observed_mask : all_observed;
    Forest forest = grow_bivariate_forest(x, state.y_pair, split_mask, it_spec);

    const Matrix& donors = state.y_pair;  // previous iteration's completed matrix
    parallel_for(missing.size(), [&](std::size_t m) {
      const auto [i, c] = missing[m];
      const double* yc = donors.col(c);
      double sum = 0.0;
      int used = 0;
      for (const Tree& tree : forest.trees) {
        // Iteration 1 averages over OOB trees only; later iterations use
        // plain (in-bag) terminal-node means over all trees.
        if (first && tree.inbag_counts[i] != 0) continue;
        const int leaf = tree.leaf_index([&](int v) { return x(i, v); });
        sum += leaf_column_mean(tree, leaf, yc, [&](int r) {
          return !first || observed_mask[r][c];
        });
        ++used;
      }
      if (used == 0) {
        log_warning("bivariate imputation: row " + std::to_string(i) +
                    " has no OOB trees; using in-bag donors");
        for (const Tree& tree : forest.trees) {
          const int leaf = tree.leaf_index([&](int v) { return x(i, v); });
          sum += leaf_column_mean(tree, leaf, yc, [&](int r) {
            return !first || observed_mask[r][c];
          });
          ++used;
        }
      }
      imputed[m] = sum / used;
    });

    double change = 0.0;
    for (std::size_t m = 0; m < missing.size(); ++m) {
      const auto [i, c] = missing[m];
      if (iter > 1) change += std::abs(imputed[m] - state.y_pair(i, c));
      state.y_pair(i, c) = imputed[m];
    }
    state.mean_abs_change.push_back(iter > 1 ? change / missing.size() : 0.0);
    state.iteration = iter;

    // Observed entries are untouched by construction; re-assert cheaply.
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c)
        if (observed_mask[i][c] && state.y_pair(i, c) != y_pair(i, c))
          throw std::logic_error("observed entry was overwritten");
  }
  return state;
}

BivariateState impute_counterfactuals(const Dataset& data, const ForestSpec& spec,
                                      int n_iterations) {
  data.validate();
  const std::size_t n = data.n();
  int arm_count[2] = {0, 0};
  for (int ti : data.t) ++arm_count[ti];
  if (arm_count[0] == 0 || arm_count[1] == 0)
    throw ConfigError("bivariate imputation needs observations in both arms");

  Matrix y_pair(n, 2, 0.0);
  std::vector<std::array<bool, 2>> mask(n, {false, false});
  for (std::size_t i = 0; i < n; ++i) {
    y_pair(i, data.t[i]) = data.y[i];
    mask[i][data.t[i]] = true;
  }
  return impute_counterfactuals(data.x, y_pair, std::move(mask), spec, n_iterations);
}

}  // namespace cfrf
