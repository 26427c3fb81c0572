#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "cfrf/common.hpp"

namespace cfrf {

struct TreeNode {
  int split_var = -1;  // -1 marks a leaf
  double split_value = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  // Range into Tree::leaf_rows holding this node's in-bag sample (with
  // bootstrap multiplicity). Valid for every node, used mostly at leaves.
  int begin = 0;
  int end = 0;

  bool is_leaf() const { return split_var < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<int> leaf_rows;    // in-bag row ids, leaves own contiguous ranges
  std::vector<int> inbag_counts; // length n; 0 means the row is OOB here

  // Descends to a leaf; getx(var) must return the covariate value.
  template <class GetX>
  int leaf_index(GetX&& getx) const {
    int id = 0;
    while (!nodes[id].is_leaf())
      id = getx(nodes[id].split_var) <= nodes[id].split_value ? nodes[id].left
                                                              : nodes[id].right;
    return id;
  }
};

struct GrowConfig {
  int mtry = 1;
  int nodesize = 1;
  std::uint64_t seed = 0;
  std::uint64_t tree_index = 0;
  std::vector<int> exclude_vars;  // never offered as split candidates
};

namespace detail {

// Samples `mtry` distinct variables for one node, excluding cfg.exclude_vars,
// and returns them sorted ascending so ties resolve to the lowest index.
inline std::vector<int> sample_candidate_vars(int p, const GrowConfig& cfg,
                                              std::uint64_t node_counter) {
  std::vector<int> allowed;
  allowed.reserve(p);
  for (int v = 0; v < p; ++v)
    if (std::find(cfg.exclude_vars.begin(), cfg.exclude_vars.end(), v) ==
        cfg.exclude_vars.end())
      allowed.push_back(v);
  int k = std::min<int>(cfg.mtry, static_cast<int>(allowed.size()));
  auto rng = make_rng(mix_key(cfg.seed, cfg.tree_index, node_counter));
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(allowed.size()) - 1);
    std::swap(allowed[i], allowed[pick(rng)]);
  }
  allowed.resize(k);
  std::sort(allowed.begin(), allowed.end());
  return allowed;
}

}  // namespace detail

// Generic deep-grown CART tree. Criterion must provide:
//   bool pure(const int* rows, int n) const;
//   double leaf_value(const int* rows, int n) const;
//   Sweeper make_sweeper(const int* rows, int n) const;
// where Sweeper supports push_left(int row) and gain() (criterion decrease for
// the current left/right partition; negative or -inf when infeasible).
template <class Criterion>
Tree grow_tree(const Matrix& x, const Criterion& crit, std::vector<int> sample,
               std::vector<int> inbag_counts, const GrowConfig& cfg) {
  Tree tree;
  tree.inbag_counts = std::move(inbag_counts);
  tree.leaf_rows = std::move(sample);
  const int p = static_cast<int>(x.cols());

  struct Pending {
    int node_id;
    int begin;
    int end;
  };
  std::vector<Pending> stack;
  tree.nodes.push_back({});
  tree.nodes[0].begin = 0;
  tree.nodes[0].end = static_cast<int>(tree.leaf_rows.size());
  stack.push_back({0, 0, static_cast<int>(tree.leaf_rows.size())});
  std::uint64_t node_counter = 0;

  std::vector<std::pair<double, int>> sorted;  // (x value, row id)

  while (!stack.empty()) {
    auto [node_id, begin, end] = stack.back();
    stack.pop_back();
    const std::uint64_t counter = node_counter++;
    int* rows = tree.leaf_rows.data() + begin;
    const int n_node = end - begin;

    auto make_leaf = [&] {
      tree.nodes[node_id].split_var = -1;
      tree.nodes[node_id].leaf_value = crit.leaf_value(rows, n_node);
    };

    if (n_node < 2 * cfg.nodesize || crit.pure(rows, n_node)) {
      make_leaf();
      continue;
    }

    auto candidates = detail::sample_candidate_vars(p, cfg, counter);
    int best_var = -1;
    double best_threshold = 0.0;
    double best_gain = 0.0;

    for (int var : candidates) {
      const double* xv = x.col(var);
      sorted.clear();
      sorted.reserve(n_node);
      for (int i = 0; i < n_node; ++i) sorted.emplace_back(xv[rows[i]], rows[i]);
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;

      auto sweep = crit.make_sweeper(rows, n_node);
      for (int i = 0; i < n_node - 1; ++i) {
        sweep.push_left(sorted[i].second);
        if (sorted[i].first == sorted[i + 1].first) continue;
        const int n_left = i + 1;
        const int n_right = n_node - n_left;
        if (n_left < cfg.nodesize || n_right < cfg.nodesize) continue;
        const double gain = sweep.gain();
        if (gain > best_gain) {
          best_gain = gain;
          best_var = var;
          best_threshold = sorted[i].first + 0.5 * (sorted[i + 1].first - sorted[i].first);
        }
      }
    }

    if (best_var < 0) {
      make_leaf();
      continue;
    }

    const double* xv = x.col(best_var);
    int* mid = std::partition(rows, rows + n_node, [&](int r) {
      return xv[r] <= best_threshold;
    });
    int n_left = static_cast<int>(mid - rows);
    // Sorted scan guarantees both children are non-degenerate.
    int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    int right_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node_id].split_var = best_var;
    tree.nodes[node_id].split_value = best_threshold;
    tree.nodes[node_id].left = left_id;
    tree.nodes[node_id].right = right_id;
    tree.nodes[left_id].begin = begin;
    tree.nodes[left_id].end = begin + n_left;
    tree.nodes[right_id].begin = begin + n_left;
    tree.nodes[right_id].end = end;
    // Right pushed first so the left child is processed next; node_counter
    // order is therefore a fixed depth-first order.
    stack.push_back({right_id, begin + n_left, end});
    stack.push_back({left_id, begin, begin + n_left});
  }
  return tree;
}

// Standard regression criterion: weighted within-node variance decrease,
// evaluated as sum_L^2/n_L + sum_R^2/n_R - sum^2/n (same argmax, cheaper).
class VarianceCriterion {
 public:
  explicit VarianceCriterion(const double* y) : y_(y) {}

  bool pure(const int* rows, int n) const {
    for (int i = 1; i < n; ++i)
      if (y_[rows[i]] != y_[rows[0]]) return false;
    return true;
  }

  double leaf_value(const int* rows, int n) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += y_[rows[i]];
    return s / n;
  }

  struct Sweeper {
    const double* y;
    double sum_left = 0.0;
    double sum_total = 0.0;
    int n_left = 0;
    int n_total = 0;
    double parent_score = 0.0;

    void push_left(int row) {
      sum_left += y[row];
      ++n_left;
    }
    double gain() const {
      const double sum_right = sum_total - sum_left;
      const int n_right = n_total - n_left;
      return sum_left * sum_left / n_left + sum_right * sum_right / n_right -
             parent_score;
    }
  };

  Sweeper make_sweeper(const int* rows, int n) const {
    Sweeper s;
    s.y = y_;
    s.n_total = n;
    for (int i = 0; i < n; ++i) s.sum_total += y_[rows[i]];
    s.parent_score = s.sum_total * s.sum_total / n;
    return s;
  }

 private:
  const double* y_;
};

}  // namespace cfrf
