#include "cfrf/synthetic.hpp"

#include <algorithm>

namespace cfrf {

namespace {
constexpr std::uint64_t kPlanTag = 0x5e1f'90ab'cd12'3f77ULL;
constexpr std::uint64_t kFinalTag = 0xf1a1'0000'62a7'311dULL;
}  // namespace

SyntheticForest grow_synthetic(const Matrix& x, const std::vector<double>& y,
                               const SyntheticSpec& spec) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (spec.nodesize_grid.empty() || spec.mtry_grid.empty())
    throw ConfigError("synthetic grids must be non-empty");
  if (spec.base_n_trees < 1 || spec.final_n_trees < 1)
    throw ConfigError("tree counts must be positive");

  SyntheticForest sf;
  sf.p = p;
  sf.n_base = spec.n_base_learners();

  const int plan_trees = std::max(spec.base_n_trees, spec.final_n_trees);
  sf.shared_inbag.resize(plan_trees);
  for (int t = 0; t < plan_trees; ++t) {
    auto rng = make_rng(mix_key(spec.seed, static_cast<std::uint64_t>(t), kPlanTag));
    sf.shared_inbag[t] = bootstrap_sample(n, rng);
  }

  sf.base_learners.resize(sf.n_base);
  int k = 0;
  std::vector<ForestSpec> base_specs(sf.n_base);
  for (int nodesize : spec.nodesize_grid) {
    for (int mtry : spec.mtry_grid) {
      ForestSpec bs;
      bs.n_trees = spec.base_n_trees;
      bs.seed = mix_key(spec.seed, static_cast<std::uint64_t>(k) + 1);
      if (mtry > static_cast<int>(p)) {
        log_warning("base-learner mtry " + std::to_string(mtry) + " clamped to p=" +
                    std::to_string(p));
        mtry = static_cast<int>(p);
      }
      if (nodesize > static_cast<int>(n)) {
        log_warning("base-learner nodesize " + std::to_string(nodesize) +
                    " clamped to n=" + std::to_string(n));
        nodesize = static_cast<int>(n);
      }
      bs.mtry = mtry;
      bs.nodesize = nodesize;
      base_specs[k++] = bs;
    }
  }
  // Base learners train independently; trees inside each learner are grown
  // sequentially here to keep the parallel grain at the learner level.
  parallel_for(sf.n_base, [&](std::size_t i) {
    sf.base_learners[i] = grow_forest_with_inbag(x, y, base_specs[i], sf.shared_inbag);
  });

  // Training synthetic features are OOB predictions of each base learner.
  sf.x_aug = Matrix(n, p + sf.n_base);
  for (std::size_t j = 0; j < p; ++j)
    std::copy(x.col(j), x.col(j) + n, sf.x_aug.col(j));
  parallel_for(n, [&](std::size_t i) {
    for (int b = 0; b < sf.n_base; ++b)
      sf.x_aug(i, p + b) = predict_oob_or_inbag(sf.base_learners[b], x, static_cast<int>(i)).value;
  });

  ForestSpec fs;
  fs.n_trees = spec.final_n_trees;
  fs.nodesize = spec.final_nodesize;
  fs.mtry = spec.final_mtry != 0
                ? spec.final_mtry
                : static_cast<int>((p + sf.n_base + 2) / 3);
  fs.seed = mix_key(spec.seed, kFinalTag);
  sf.final_forest = grow_forest_with_inbag(sf.x_aug, y, fs, sf.shared_inbag);
  return sf;
}

double predict_synthetic(const SyntheticForest& sf, std::span<const double> x_row) {
  if (x_row.size() != sf.p)
    throw SchemaError("synthetic forest expects " + std::to_string(sf.p) + " covariates");
  std::vector<double> aug(x_row.begin(), x_row.end());
  aug.resize(sf.p + sf.n_base);
  for (int b = 0; b < sf.n_base; ++b) aug[sf.p + b] = predict(sf.base_learners[b], x_row);
  return predict(sf.final_forest, aug);
}

OobPrediction predict_synthetic_oob(const SyntheticForest& sf, int row) {
  // x_aug already stores the OOB-based features for training rows, so the
  // final-stage OOB average is exactly the coherent two-stage estimate.
  return predict_oob_or_inbag(sf.final_forest, sf.x_aug, row);
}

}  // namespace cfrf
