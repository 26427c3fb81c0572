#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "cfrf/forest.hpp"
#include "helpers.hpp"

using namespace cfrf;
using cfrf::testing::random_matrix;

TEST_CASE("bootstrap_sample: n=1 draws the only row") {
  auto rng = make_rng(7);
  auto counts = bootstrap_sample(1, rng);
  CHECK(counts == std::vector<int>{1});
}

TEST_CASE("bootstrap_sample: counts sum to n and ~63% of rows appear") {
  const std::size_t n = 1000;
  double covered = 0.0;
  const int draws = 200;
  for (int d = 0; d < draws; ++d) {
    auto rng = make_rng(1000 + d);
    auto counts = bootstrap_sample(n, rng);
    long sum = 0;
    int nonzero = 0;
    for (int c : counts) {
      sum += c;
      if (c > 0) ++nonzero;
    }
    CHECK(sum == static_cast<long>(n));
    covered += static_cast<double>(nonzero) / n;
  }
  covered /= draws;
  const double expected = 1.0 - std::pow(1.0 - 1.0 / n, n);  // ~0.632
  CHECK(std::abs(covered - expected) < 0.01);
}

TEST_CASE("bootstrap_sample: fixed seed reproduces counts") {
  auto rng1 = make_rng(42);
  auto rng2 = make_rng(42);
  CHECK(bootstrap_sample(50, rng1) == bootstrap_sample(50, rng2));
}

namespace {

// Brute-force best split: every (variable, midpoint threshold) pair scored by
// exact SSE decrease. Independent of the sweep implementation.
struct BruteSplit {
  int var = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

BruteSplit brute_force_best_split(const Matrix& x, const std::vector<double>& y,
                                  const std::vector<int>& rows, int nodesize) {
  auto sse = [&](const std::vector<int>& rs) {
    double s = 0.0, ss = 0.0;
    for (int r : rs) {
      s += y[r];
      ss += y[r] * y[r];
    }
    return rs.empty() ? 0.0 : ss - s * s / rs.size();
  };
  BruteSplit best;
  const double parent = sse(rows);
  for (std::size_t v = 0; v < x.cols(); ++v) {
    std::set<double> values;
    for (int r : rows) values.insert(x(r, v));
    std::vector<double> sorted(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      const double thr = sorted[k] + 0.5 * (sorted[k + 1] - sorted[k]);
      std::vector<int> left, right;
      for (int r : rows) (x(r, v) <= thr ? left : right).push_back(r);
      if (static_cast<int>(left.size()) < nodesize ||
          static_cast<int>(right.size()) < nodesize)
        continue;
      const double dec = parent - sse(left) - sse(right);
      if (dec > best.decrease) {
        best = {static_cast<int>(v), thr, dec};
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("single tree interpolates its in-bag sample and matches brute-force splits") {
  const std::size_t n = 20;
  Matrix x = random_matrix(n, 5, 11);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 3) > 0.5 ? 1.0 : 0.0;

  // Root split of a full-sample tree must pick variable 3 and agree with the
  // brute-force scan.
  ForestSpec spec;
  spec.n_trees = 1;
  spec.mtry = 5;
  spec.nodesize = 1;
  spec.bootstrap = false;
  Forest forest = grow_forest(x, y, spec);
  const Tree& tree = forest.trees[0];
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
  auto brute = brute_force_best_split(x, y, all, 1);
  CHECK(brute.var == 3);
  CHECK(tree.nodes[0].split_var == brute.var);
  CHECK(tree.nodes[0].split_value == doctest::Approx(brute.threshold).epsilon(1e-15));

  // With all-distinct covariates and nodesize 1 the tree interpolates.
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    CHECK(predict(forest, row) == doctest::Approx(y[i]).epsilon(1e-12));
  }
}

TEST_CASE("best_split corner cases surface as leaves") {
  const std::size_t n = 10;
  Matrix x = random_matrix(n, 2, 3);
  std::vector<double> y(n, 4.2);  // constant response
  ForestSpec spec;
  spec.n_trees = 3;
  spec.mtry = 2;
  spec.nodesize = 1;
  Forest forest = grow_forest(x, y, spec);
  for (const Tree& t : forest.trees) {
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].is_leaf());
    CHECK(t.nodes[0].leaf_value == doctest::Approx(4.2));
  }
}

TEST_CASE("two-point fixture splits between the points") {
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  std::vector<double> y = {0.0, 10.0};
  ForestSpec spec;
  spec.n_trees = 1;
  spec.mtry = 1;
  spec.nodesize = 1;
  spec.bootstrap = false;
  Forest forest = grow_forest(x, y, spec);
  const Tree& tree = forest.trees[0];
  REQUIRE(!tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].split_var == 0);
  CHECK(tree.nodes[0].split_value > 0.0);
  CHECK(tree.nodes[0].split_value < 1.0);
}

TEST_CASE("grow_forest: nodesize=n collapses every tree to its bootstrap mean") {
  const std::size_t n = 30;
  Matrix x = random_matrix(n, 3, 5);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(static_cast<double>(i));
  ForestSpec spec;
  spec.n_trees = 10;
  spec.mtry = 2;
  spec.nodesize = static_cast<int>(n);
  Forest forest = grow_forest(x, y, spec);
  for (const Tree& tree : forest.trees) {
    REQUIRE(tree.nodes.size() == 1);
    double boot_mean = 0.0;
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      boot_mean += tree.inbag_counts[i] * y[i];
      total += tree.inbag_counts[i];
    }
    CHECK(total == static_cast<long>(n));
    boot_mean /= total;
    CHECK(tree.nodes[0].leaf_value == doctest::Approx(boot_mean).epsilon(1e-12));
  }
  // Single-leaf tree: prediction equals the leaf mean everywhere.
  auto probe = random_matrix(1, 3, 99).row(0);
  spec.n_trees = 1;
  Forest one = grow_forest(x, y, spec);
  CHECK(predict(one, probe) == doctest::Approx(one.trees[0].nodes[0].leaf_value));
}

TEST_CASE("grow_forest: invalid spec rejected") {
  Matrix x = random_matrix(10, 2, 1);
  std::vector<double> y(10, 0.0);
  ForestSpec spec;
  spec.mtry = 3;  // > p
  CHECK_THROWS_AS(grow_forest(x, y, spec), ConfigError);
  spec.mtry = 1;
  spec.nodesize = 11;  // > n
  CHECK_THROWS_AS(grow_forest(x, y, spec), ConfigError);
}

TEST_CASE("grow_forest is deterministic, independent of thread count") {
  const std::size_t n = 60;
  Matrix x = random_matrix(n, 4, 17);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) + 0.3 * x(i, 2);
  ForestSpec spec;
  spec.n_trees = 25;
  spec.mtry = 2;
  spec.nodesize = 2;
  spec.seed = 9;

  set_thread_count(1);
  Forest a = grow_forest(x, y, spec);
  set_thread_count(7);
  Forest b = grow_forest(x, y, spec);
  set_thread_count(0);
  Forest c = grow_forest(x, y, spec);

  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    CHECK(a.trees[t].inbag_counts == b.trees[t].inbag_counts);
    CHECK(a.trees[t].inbag_counts == c.trees[t].inbag_counts);
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      CHECK(a.trees[t].nodes[k].split_var == b.trees[t].nodes[k].split_var);
      CHECK(a.trees[t].nodes[k].split_value == b.trees[t].nodes[k].split_value);
      CHECK(a.trees[t].nodes[k].leaf_value == c.trees[t].nodes[k].leaf_value);
    }
  }
}

TEST_CASE("predict recovers a step function and rejects bad schema") {
  const std::size_t n = 50;
  Matrix x = random_matrix(n, 2, 23);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 * (x(i, 0) > 0.0) + noise(rng);
  ForestSpec spec;
  spec.n_trees = 200;
  spec.mtry = 1;
  spec.nodesize = 2;
  Forest forest = grow_forest(x, y, spec);
  std::vector<double> hi = {1.0, 0.0};
  std::vector<double> lo = {-1.0, 0.0};
  CHECK(std::abs(predict(forest, hi) - 2.0) < 0.2);
  CHECK(std::abs(predict(forest, lo) - 0.0) < 0.2);
  std::vector<double> wrong = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(predict(forest, wrong), SchemaError);
}

TEST_CASE("predict_oob: tree counts, exclusions, and the no-OOB error") {
  const std::size_t n = 80;
  Matrix x = random_matrix(n, 3, 31);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 1);
  ForestSpec spec;
  spec.n_trees = 1000;
  spec.mtry = 2;
  spec.nodesize = 2;
  Forest forest = grow_forest(x, y, spec);

  double mean_oob_trees = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto pred = predict_oob(forest, x, static_cast<int>(i));
    mean_oob_trees += pred.trees_used;
    int expected = 0;
    for (const Tree& t : forest.trees)
      if (t.inbag_counts[i] == 0) ++expected;
    CHECK(pred.trees_used == expected);  // OOB average uses exactly the OOB trees
  }
  mean_oob_trees /= n;
  CHECK(mean_oob_trees > 350.0);
  CHECK(mean_oob_trees < 390.0);

  // A 1-tree forest where some row is in-bag raises the explicit error.
  spec.n_trees = 1;
  Forest one = grow_forest(x, y, spec);
  int inbag_row = -1;
  for (std::size_t i = 0; i < n; ++i)
    if (one.trees[0].inbag_counts[i] > 0) inbag_row = static_cast<int>(i);
  REQUIRE(inbag_row >= 0);
  CHECK_THROWS_AS(predict_oob(one, x, inbag_row), NoOobTreesError);
  auto fallback = predict_oob_or_inbag(one, x, inbag_row);
  CHECK_FALSE(fallback.oob);
}

TEST_CASE("predict_oob on constant outcome returns the constant") {
  Matrix x = random_matrix(40, 2, 3);
  std::vector<double> y(40, 7.5);
  ForestSpec spec;
  spec.n_trees = 100;
  spec.mtry = 1;
  spec.nodesize = 1;
  Forest forest = grow_forest(x, y, spec);
  auto pred = predict_oob(forest, x, 0);
  CHECK(pred.value == doctest::Approx(7.5));
}

TEST_CASE("leaf population and monotone-variance invariants hold by traversal") {
  const std::size_t n = 120;
  Matrix x = random_matrix(n, 4, 77);
  std::vector<double> y(n);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) * x(i, 1) + noise(rng);

  ForestSpec spec;
  spec.n_trees = 50;
  spec.mtry = 2;
  spec.nodesize = 5;
  Forest forest = grow_forest(x, y, spec);

  auto node_sse = [&](const Tree& t, const TreeNode& node, double& var, int& count) {
    double s = 0.0, ss = 0.0;
    count = node.end - node.begin;
    for (int k = node.begin; k < node.end; ++k) {
      s += y[t.leaf_rows[k]];
      ss += y[t.leaf_rows[k]] * y[t.leaf_rows[k]];
    }
    var = count > 0 ? (ss - s * s / count) / count : 0.0;
  };

  for (const Tree& tree : forest.trees) {
    long inbag_total = 0;
    for (int c : tree.inbag_counts) inbag_total += c;
    CHECK(inbag_total == static_cast<long>(n));
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) {
        CHECK(node.end - node.begin >= spec.nodesize);
      } else {
        double var_p, var_l, var_r;
        int n_p, n_l, n_r;
        node_sse(tree, node, var_p, n_p);
        node_sse(tree, tree.nodes[node.left], var_l, n_l);
        node_sse(tree, tree.nodes[node.right], var_r, n_r);
        const double child = (n_l * var_l + n_r * var_r) / n_p;
        CHECK(child <= var_p + 1e-9);
      }
    }
  }
}
