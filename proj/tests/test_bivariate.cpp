#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cfrf/bivariate.hpp"
#include "helpers.hpp"

using namespace cfrf;
using cfrf::testing::random_matrix;

namespace {

// Univariate standardized variance reduction, written independently of the
// sweep machinery: (SSE_parent - SSE_left - SSE_right) / SSE_parent.
double univariate_reduction(const Matrix& x, const std::vector<double>& y,
                            const std::vector<int>& rows, int var, double thr) {
  auto sse = [&](const std::vector<int>& rs) {
    double s = 0.0, ss = 0.0;
    for (int r : rs) {
      s += y[r];
      ss += y[r] * y[r];
    }
    return rs.empty() ? 0.0 : ss - s * s / rs.size();
  };
  std::vector<int> left, right;
  for (int r : rows) (x(r, var) <= thr ? left : right).push_back(r);
  const double parent = sse(rows);
  if (parent <= 0.0) return 0.0;
  return (parent - sse(left) - sse(right)) / parent;
}

}  // namespace

TEST_CASE("bivariate_split_score: constant columns score zero") {
  const std::size_t n = 12;
  Matrix x = random_matrix(n, 2, 1);
  Matrix y_pair(n, 2, 5.0);
  std::vector<std::array<bool, 2>> mask(n, {true, true});
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  CHECK(bivariate_split_score(x, y_pair, mask, rows, 0, 0.0) == 0.0);
}

TEST_CASE("bivariate_split_score: one column missing reduces to the univariate criterion") {
  const std::size_t n = 20;
  Matrix x = random_matrix(n, 3, 2);
  Matrix y_pair(n, 2, 0.0);
  std::vector<double> y1(n);
  std::vector<std::array<bool, 2>> mask(n, {true, false});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    y1[i] = normal(rng);
    y_pair(i, 0) = y1[i];
    y_pair(i, 1) = 123.0;  // never observed, must not matter
  }
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  for (double thr : {-0.5, 0.0, 0.7}) {
    CHECK(bivariate_split_score(x, y_pair, mask, rows, 1, thr) ==
          doctest::Approx(univariate_reduction(x, y1, rows, 1, thr)).epsilon(1e-12));
  }
}

TEST_CASE("bivariate_split_score: identical columns double the univariate score") {
  const std::size_t n = 25;
  Matrix x = random_matrix(n, 2, 7);
  Matrix y_pair(n, 2, 0.0);
  std::vector<double> y(n);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = normal(rng);
    y_pair(i, 0) = y[i];
    y_pair(i, 1) = y[i];
  }
  std::vector<std::array<bool, 2>> mask(n, {true, true});
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const double uni = univariate_reduction(x, y, rows, 0, 0.1);
  CHECK(bivariate_split_score(x, y_pair, mask, rows, 0, 0.1) ==
        doctest::Approx(2.0 * uni).epsilon(1e-12));
}

TEST_CASE("complete data is returned unchanged for any iteration count") {
  const std::size_t n = 18;
  Matrix x = random_matrix(n, 2, 11);
  Matrix y_pair(n, 2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    y_pair(i, 0) = normal(rng);
    y_pair(i, 1) = normal(rng);
  }
  std::vector<std::array<bool, 2>> mask(n, {true, true});
  ForestSpec spec;
  spec.n_trees = 30;
  spec.nodesize = 1;
  for (int iters : {1, 3}) {
    auto state = impute_counterfactuals(x, y_pair, mask, spec, iters);
    CHECK(state.y_pair == y_pair);
    CHECK(state.iteration == iters);
  }
}

TEST_CASE("observed entries survive 5 iterations bitwise") {
  const std::size_t n = 60;
  Matrix x = random_matrix(n, 3, 13);
  Dataset data;
  data.x = x;
  data.t.resize(n);
  data.y.resize(n);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    data.t[i] = i % 2;
    data.y[i] = normal(rng);
  }
  ForestSpec spec;
  spec.n_trees = 50;
  spec.nodesize = 1;
  auto state = impute_counterfactuals(data, spec, 5);
  CHECK(state.iteration == 5);
  CHECK(state.mean_abs_change.size() == 5);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(state.y_pair(i, data.t[i]) == data.y[i]);  // bitwise
    CHECK(state.observed_mask[i][data.t[i]]);
    CHECK_FALSE(state.observed_mask[i][1 - data.t[i]]);
    CHECK(std::isfinite(state.y_pair(i, 1 - data.t[i])));  // completeness
  }
}

TEST_CASE("single-arm data is a configuration error") {
  const std::size_t n = 10;
  Dataset data;
  data.x = random_matrix(n, 2, 1);
  data.t.assign(n, 1);
  data.y.assign(n, 0.5);
  ForestSpec spec;
  spec.n_trees = 10;
  CHECK_THROWS_AS(impute_counterfactuals(data, spec, 2), ConfigError);
}

TEST_CASE("additive shift model: imputed counterfactuals track the truth") {
  // Y(1) = Y(0) + 1 exactly, Y(0) = x1 strongly predictive.
  const std::size_t n = 500;
  Matrix x = random_matrix(n, 5, 21);
  Dataset data;
  data.x = x;
  data.t.resize(n);
  data.y.resize(n);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> truth(n);  // the unobserved counterfactual value
  for (std::size_t i = 0; i < n; ++i) {
    data.t[i] = coin(rng) ? 1 : 0;
    const double y0 = x(i, 0) + noise(rng);
    const double y1 = y0 + 1.0;
    data.y[i] = data.t[i] == 1 ? y1 : y0;
    truth[i] = data.t[i] == 1 ? y0 : y1;
  }
  ForestSpec spec;
  spec.n_trees = 300;
  spec.nodesize = 1;
  spec.seed = 7;
  auto state = impute_counterfactuals(data, spec, 5);
  double mae = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    mae += std::abs(state.y_pair(i, 1 - data.t[i]) - truth[i]);
  mae /= n;
  CHECK(mae < 0.5);
}
