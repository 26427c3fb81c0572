#include "cfrf/forest.hpp"

#include <cmath>

namespace cfrf {

std::vector<int> bootstrap_sample(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> counts(n, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t d = 0; d < n; ++d) ++counts[pick(rng)];
  return counts;
}

std::vector<int> expand_sample(const std::vector<int>& counts) {
  std::vector<int> rows;
  rows.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (int c = 0; c < counts[i]; ++c) rows.push_back(static_cast<int>(i));
  return rows;
}

ForestSpec resolve_spec(ForestSpec spec, std::size_t n, std::size_t p) {
  if (spec.mtry == 0)
    spec.mtry = static_cast<int>((p + 2) / 3);
  if (spec.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (spec.mtry < 1 || spec.mtry > static_cast<int>(p))
    throw ConfigError("mtry must lie in [1, p]");
  if (spec.nodesize < 1 || spec.nodesize > static_cast<int>(n))
    throw ConfigError("nodesize must lie in [1, n]");
  return spec;
}

namespace {

constexpr std::uint64_t kBootTag = 0xb001'5742'aa11'77c3ULL;

std::uint64_t fingerprint(std::size_t n, std::size_t p, const ForestSpec& s) {
  std::uint64_t h = mix_key(n, p);
  h = mix_key(h, static_cast<std::uint64_t>(s.n_trees), static_cast<std::uint64_t>(s.mtry));
  h = mix_key(h, static_cast<std::uint64_t>(s.nodesize), s.seed);
  return h;
}

Forest grow_impl(const Matrix& x, const std::vector<double>& y, ForestSpec spec,
                 const std::vector<std::vector<int>>* plan) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) throw ConfigError("response length does not match matrix rows");
  spec = resolve_spec(spec, n, p);
  if (plan && plan->size() < static_cast<std::size_t>(spec.n_trees))
    throw ConfigError("bootstrap plan shorter than n_trees");

  Forest forest;
  forest.spec = spec;
  forest.n_train = n;
  forest.p_train = p;
  forest.training_fingerprint = fingerprint(n, p, spec);
  forest.trees.resize(spec.n_trees);

  parallel_for(spec.n_trees, [&](std::size_t t) {
    std::vector<int> counts;
    if (plan) {
      counts = (*plan)[t];
    } else if (spec.bootstrap) {
      auto rng = make_rng(mix_key(spec.seed, t, kBootTag));
      counts = bootstrap_sample(n, rng);
    } else {
      counts.assign(n, 1);
    }
    GrowConfig cfg{spec.mtry, spec.nodesize, spec.seed, t, spec.exclude_split_vars};
    auto sample = expand_sample(counts);
    forest.trees[t] = grow_tree(x, VarianceCriterion(y.data()), std::move(sample),
                                std::move(counts), cfg);
  });
  return forest;
}

}  // namespace

Forest grow_forest(const Matrix& x, const std::vector<double>& y, const ForestSpec& spec) {
  return grow_impl(x, y, spec, nullptr);
}

Forest grow_forest_with_inbag(const Matrix& x, const std::vector<double>& y,
                              const ForestSpec& spec,
                              const std::vector<std::vector<int>>& plan) {
  return grow_impl(x, y, spec, &plan);
}

double predict(const Forest& forest, std::span<const double> x_row) {
  if (x_row.size() != forest.p_train)
    throw SchemaError("covariate row has " + std::to_string(x_row.size()) +
                      " entries, forest was trained on " + std::to_string(forest.p_train));
  double sum = 0.0;
  for (const Tree& tree : forest.trees)
    sum += tree.nodes[tree.leaf_index([&](int v) { return x_row[v]; })].leaf_value;
  return sum / forest.trees.size();
}

std::vector<double> predict(const Forest& forest, const Matrix& x) {
  if (x.cols() != forest.p_train) throw SchemaError("prediction matrix column mismatch");
  std::vector<double> out(x.rows());
  parallel_for(x.rows(), [&](std::size_t i) {
    double sum = 0.0;
    for (const Tree& tree : forest.trees)
      sum += tree.nodes[tree.leaf_index([&](int v) { return x(i, v); })].leaf_value;
    out[i] = sum / forest.trees.size();
  });
  return out;
}

OobPrediction predict_oob(const Forest& forest, const Matrix& x_train, int row) {
  double sum = 0.0;
  int used = 0;
  for (const Tree& tree : forest.trees) {
    if (tree.inbag_counts[row] != 0) continue;
    sum += tree.nodes[tree.leaf_index([&](int v) { return x_train(row, v); })].leaf_value;
    ++used;
  }
  if (used == 0)
    throw NoOobTreesError("row " + std::to_string(row) + " is in-bag in every tree");
  return {sum / used, used, true};
}

OobPrediction predict_oob_or_inbag(const Forest& forest, const Matrix& x_train, int row) {
  try {
    return predict_oob(forest, x_train, row);
  } catch (const NoOobTreesError&) {
    log_warning("row " + std::to_string(row) +
                " has no OOB trees; falling back to in-bag prediction");
    auto r = x_train.row(row);
    return {predict(forest, r), static_cast<int>(forest.trees.size()), false};
  }
}

}  // namespace cfrf
