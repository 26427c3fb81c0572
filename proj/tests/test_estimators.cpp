#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cfrf/estimators.hpp"
#include "helpers.hpp"

using namespace cfrf;
using cfrf::testing::mean;
using cfrf::testing::random_matrix;

namespace {

Dataset shift_dataset(std::size_t n, std::size_t p, double delta, double sigma,
                      std::uint64_t seed) {
  Dataset data;
  data.x = random_matrix(n, p, seed);
  data.t.resize(n);
  data.y.resize(n);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> noise(0.0, sigma);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    data.t[i] = coin(rng) ? 1 : 0;
    data.y[i] = delta * data.t[i] + noise(rng);
  }
  return data;
}

Dataset constant_arms(std::size_t n, double c1, double c0, std::uint64_t seed) {
  Dataset data;
  data.x = random_matrix(n, 3, seed);
  data.t.resize(n);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.t[i] = i % 2;
    data.y[i] = data.t[i] == 1 ? c1 : c0;
  }
  return data;
}

ForestSpec fast_spec(int trees = 200) {
  ForestSpec spec;
  spec.n_trees = trees;
  spec.nodesize = 3;
  spec.seed = 17;
  return spec;
}

void check_oob_asymmetry(const IteResult& res, const Dataset& data) {
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.t[i] == 1) {
      CHECK(res.oob_flags[i].y1_oob);
      CHECK_FALSE(res.oob_flags[i].y0_oob);
    } else {
      CHECK(res.oob_flags[i].y0_oob);
      CHECK_FALSE(res.oob_flags[i].y1_oob);
    }
  }
}

}  // namespace

TEST_CASE("estimate_vt: recovers a pure treatment shift and flags OOB asymmetry") {
  Dataset data = shift_dataset(800, 4, 1.0, 0.01, 3);
  IteResult res = estimate_vt(data, fast_spec());
  CHECK(res.method == Method::VT);
  CHECK(std::abs(mean(res.tau_hat) - 1.0) < 0.1);
  check_oob_asymmetry(res, data);
}

TEST_CASE("estimate_vt: treatment withheld from split candidates gives tau == 0") {
  Dataset data = shift_dataset(60, 3, 1.0, 0.01, 5);
  ForestSpec spec = fast_spec(20);
  spec.bootstrap = false;  // factual and twin then run down the same tree set
  spec.exclude_split_vars = {3};  // the treatment column of the (X, T) design
  IteResult res = estimate_vt(data, spec);
  for (double tau : res.tau_hat) CHECK(tau == 0.0);  // identical paths both arms
}

TEST_CASE("estimate_vt: single-arm data rejected") {
  Dataset data = shift_dataset(50, 2, 1.0, 0.1, 7);
  std::fill(data.t.begin(), data.t.end(), 1);
  CHECK_THROWS_AS(estimate_vt(data, fast_spec(10)), ConfigError);
}

TEST_CASE("estimate_vt_interaction: shift recovery and OOB asymmetry") {
  Dataset data = shift_dataset(800, 4, 2.0, 0.01, 11);
  IteResult res = estimate_vt_interaction(data, fast_spec());
  CHECK(res.method == Method::VT_I);
  CHECK(std::abs(mean(res.tau_hat) - 2.0) < 0.1);
  check_oob_asymmetry(res, data);
}

TEST_CASE("estimate_cf: constant arms give tau == c1 - c0 everywhere") {
  Dataset data = constant_arms(60, 4.0, 1.5, 13);
  IteResult res = estimate_cf(data, fast_spec(50));
  for (double tau : res.tau_hat) CHECK(tau == doctest::Approx(2.5));
  check_oob_asymmetry(res, data);
}

TEST_CASE("estimate_cf: null effect stays near zero") {
  const std::size_t n = 600;
  Dataset data;
  data.x = random_matrix(n, 3, 19);
  data.t.resize(n);
  data.y.resize(n);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    data.t[i] = coin(rng) ? 1 : 0;
    data.y[i] = data.x(i, 0) + noise(rng);  // same law in both arms
  }
  IteResult res = estimate_cf(data, fast_spec());
  CHECK(std::abs(mean(res.tau_hat)) < 0.1);
}

TEST_CASE("estimate_syncf: constant arms give tau == c1 - c0") {
  Dataset data = constant_arms(50, 3.0, 1.0, 23);
  SyntheticSpec spec;
  spec.nodesize_grid = {1, 10};
  spec.mtry_grid = {1, 3};
  spec.base_n_trees = 30;
  spec.final_n_trees = 60;
  spec.seed = 29;
  IteResult res = estimate_syncf(data, spec);
  for (double tau : res.tau_hat) CHECK(tau == doctest::Approx(2.0));
  check_oob_asymmetry(res, data);
}

TEST_CASE("estimate_bivariate: observed entry enters tau exactly") {
  Dataset data = shift_dataset(150, 3, 1.0, 0.1, 31);
  ForestSpec spec = fast_spec(80);
  spec.nodesize = 1;
  IteResult res = estimate_bivariate(data, spec, 3);
  BivariateState state = impute_counterfactuals(data, spec, 3);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.t[i] == 1)
      CHECK(res.tau_hat[i] == data.y[i] - state.y_pair(i, 0));
    else
      CHECK(res.tau_hat[i] == state.y_pair(i, 1) - data.y[i]);
  }
}

TEST_CASE("estimate_honest: recovers a constant effect, zero when arms equal") {
  Dataset data = shift_dataset(1200, 3, 1.0, 0.01, 37);
  HonestSpec spec;
  spec.n_trees = 300;
  spec.seed = 41;
  IteResult res = estimate_honest(data, spec);
  CHECK(res.method == Method::HONEST);
  for (std::size_t i = 0; i < data.n(); ++i) CHECK(std::abs(res.tau_hat[i] - 1.0) < 0.1);

  Dataset flat = constant_arms(80, 2.0, 2.0, 43);
  IteResult zero = estimate_honest(flat, spec);
  for (double tau : zero.tau_hat) CHECK(tau == doctest::Approx(0.0));
}

TEST_CASE("estimate_honest: per-tree split option works") {
  Dataset data = shift_dataset(300, 3, 1.0, 0.05, 47);
  HonestSpec spec;
  spec.n_trees = 100;
  spec.split_per_tree = true;
  IteResult res = estimate_honest(data, spec);
  CHECK(std::abs(mean(res.tau_hat) - 1.0) < 0.2);
}

TEST_CASE("import_external_ite: round trip, zeros, and errors") {
  const char* path = "external_tau_test.txt";
  {
    std::ofstream out(path);
    out << "0\n0\n0\n";
  }
  IteResult res = import_external_ite(path, 3);
  CHECK(res.method == Method::EXTERNAL);
  CHECK(res.tau_hat == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(import_external_ite(path, 5), IngestionError);
  {
    std::ofstream out(path);
    out << "0.25\nnot-a-number\n";
  }
  CHECK_THROWS_AS(import_external_ite(path, 2), IngestionError);
  {
    std::ofstream out(path);
    out << "1.2500000000000002\n-3.7\n";
  }
  IteResult redo = import_external_ite(path, 2);
  CHECK(redo.tau_hat[0] == 1.2500000000000002);
  CHECK(redo.tau_hat[1] == -3.7);
  std::remove(path);
}

TEST_CASE("permutation equivariance under a deterministic configuration") {
  const std::size_t n = 40;
  Dataset data = shift_dataset(n, 3, 1.0, 0.2, 53);
  ForestSpec spec;
  spec.n_trees = 1;
  spec.mtry = 4;  // all columns of the (X, T) design
  spec.nodesize = 1;
  spec.bootstrap = false;
  IteResult base = estimate_vt(data, spec);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(59);
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset shuffled;
  shuffled.x = Matrix(n, 3);
  shuffled.t.resize(n);
  shuffled.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) shuffled.x(i, j) = data.x(perm[i], j);
    shuffled.t[i] = data.t[perm[i]];
    shuffled.y[i] = data.y[perm[i]];
  }
  IteResult permuted = estimate_vt(shuffled, spec);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(permuted.tau_hat[i] == doctest::Approx(base.tau_hat[perm[i]]).epsilon(1e-12));
}
