#include "cfrf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cfrf {

std::string method_name(Method m) {
  switch (m) {
    case Method::VT: return "vt";
    case Method::VT_I: return "vt-i";
    case Method::CF: return "cf";
    case Method::SYNCF: return "syncf";
    case Method::BIVARIATE: return "bivariate";
    case Method::HONEST: return "honest";
    case Method::EXTERNAL: return "external";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::VT, Method::VT_I, Method::CF, Method::SYNCF,
                   Method::BIVARIATE, Method::HONEST, Method::EXTERNAL})
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method: " + name);
}

namespace {

void require_two_arms(const Dataset& data) {
  int count[2] = {0, 0};
  for (int t : data.t) ++count[t];
  if (count[0] == 0 || count[1] == 0)
    throw ConfigError("estimator needs observations in both treatment arms");
}

std::string describe(const char* name, const ForestSpec& s) {
  return std::string(name) + " trees=" + std::to_string(s.n_trees) +
         " mtry=" + std::to_string(s.mtry) + " nodesize=" + std::to_string(s.nodesize) +
         " seed=" + std::to_string(s.seed);
}

// Design matrix [X, T] and optionally the p interaction columns X*T.
Matrix vt_design(const Dataset& data, bool interactions) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  Matrix d(n, interactions ? 2 * p + 1 : p + 1);
  for (std::size_t j = 0; j < p; ++j)
    std::copy(data.x.col(j), data.x.col(j) + n, d.col(j));
  for (std::size_t i = 0; i < n; ++i) d(i, p) = data.t[i];
  if (interactions)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t i = 0; i < n; ++i) d(i, p + 1 + j) = data.x(i, j) * data.t[i];
  return d;
}

IteResult estimate_vt_impl(const Dataset& data, const ForestSpec& spec, bool interactions) {
  data.validate();
  require_two_arms(data);
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  Matrix design = vt_design(data, interactions);
  Forest forest = grow_forest(design, data.y, spec);

  IteResult res;
  res.method = interactions ? Method::VT_I : Method::VT;
  res.tau_hat.resize(n);
  res.oob_flags.resize(n);
  res.spec_used = describe(interactions ? "vt-i" : "vt", forest.spec);

  parallel_for(n, [&](std::size_t i) {
    OobPrediction factual = predict_oob_or_inbag(forest, design, static_cast<int>(i));
    std::vector<double> twin = design.row(i);
    const int flipped = 1 - data.t[i];
    twin[p] = flipped;
    if (interactions)
      for (std::size_t j = 0; j < p; ++j) twin[p + 1 + j] = data.x(i, j) * flipped;
    const double counterfactual = predict(forest, twin);
    if (data.t[i] == 1) {
      res.tau_hat[i] = factual.value - counterfactual;
      res.oob_flags[i] = {factual.oob, false};
    } else {
      res.tau_hat[i] = counterfactual - factual.value;
      res.oob_flags[i] = {false, factual.oob};
    }
  });
  return res;
}

struct ArmSplit {
  Matrix x[2];
  std::vector<double> y[2];
  std::vector<int> position;  // row -> index within its arm
};

ArmSplit split_by_arm(const Dataset& data) {
  ArmSplit s;
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  std::size_t count[2] = {0, 0};
  for (int t : data.t) ++count[t];
  for (int a = 0; a < 2; ++a) {
    s.x[a] = Matrix(count[a], p);
    s.y[a].reserve(count[a]);
  }
  s.position.resize(n);
  std::size_t at[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int a = data.t[i];
    for (std::size_t j = 0; j < p; ++j) s.x[a](at[a], j) = data.x(i, j);
    s.y[a].push_back(data.y[i]);
    s.position[i] = static_cast<int>(at[a]++);
  }
  return s;
}

}  // namespace

IteResult estimate_vt(const Dataset& data, const ForestSpec& spec) {
  return estimate_vt_impl(data, spec, false);
}

IteResult estimate_vt_interaction(const Dataset& data, const ForestSpec& spec) {
  return estimate_vt_impl(data, spec, true);
}

IteResult estimate_cf(const Dataset& data, const ForestSpec& spec) {
  data.validate();
  require_two_arms(data);
  ArmSplit arms = split_by_arm(data);
  Forest forest[2];
  for (int a = 0; a < 2; ++a) {
    ForestSpec s = spec;
    s.seed = mix_key(spec.seed, static_cast<std::uint64_t>(a) + 0xCF);
    forest[a] = grow_forest(arms.x[a], arms.y[a], s);
  }

  const std::size_t n = data.n();
  IteResult res;
  res.method = Method::CF;
  res.tau_hat.resize(n);
  res.oob_flags.resize(n);
  res.spec_used = describe("cf", forest[0].spec);
  parallel_for(n, [&](std::size_t i) {
    const int a = data.t[i];
    OobPrediction natural = predict_oob_or_inbag(forest[a], arms.x[a], arms.position[i]);
    const double counter = predict(forest[1 - a], data.x.row(i));
    if (a == 1) {
      res.tau_hat[i] = natural.value - counter;
      res.oob_flags[i] = {natural.oob, false};
    } else {
      res.tau_hat[i] = counter - natural.value;
      res.oob_flags[i] = {false, natural.oob};
    }
  });
  return res;
}

IteResult estimate_syncf(const Dataset& data, const SyntheticSpec& spec) {
  data.validate();
  require_two_arms(data);
  ArmSplit arms = split_by_arm(data);
  SyntheticForest sf[2];
  for (int a = 0; a < 2; ++a) {
    SyntheticSpec s = spec;
    s.seed = mix_key(spec.seed, static_cast<std::uint64_t>(a) + 0x5CF);
    sf[a] = grow_synthetic(arms.x[a], arms.y[a], s);
  }

  const std::size_t n = data.n();
  IteResult res;
  res.method = Method::SYNCF;
  res.tau_hat.resize(n);
  res.oob_flags.resize(n);
  res.spec_used = "syncf base_learners=" + std::to_string(spec.n_base_learners()) +
                  " base_trees=" + std::to_string(spec.base_n_trees) +
                  " final_trees=" + std::to_string(spec.final_n_trees) +
                  " seed=" + std::to_string(spec.seed);
  parallel_for(n, [&](std::size_t i) {
    const int a = data.t[i];
    OobPrediction natural = predict_synthetic_oob(sf[a], arms.position[i]);
    const double counter = predict_synthetic(sf[1 - a], data.x.row(i));
    if (a == 1) {
      res.tau_hat[i] = natural.value - counter;
      res.oob_flags[i] = {natural.oob, false};
    } else {
      res.tau_hat[i] = counter - natural.value;
      res.oob_flags[i] = {false, natural.oob};
    }
  });
  return res;
}

IteResult estimate_bivariate(const Dataset& data, const ForestSpec& spec, int n_iterations) {
  BivariateState state = impute_counterfactuals(data, spec, n_iterations);
  const std::size_t n = data.n();
  IteResult res;
  res.method = Method::BIVARIATE;
  res.tau_hat.resize(n);
  res.oob_flags.assign(n, {});
  res.spec_used = describe("bivariate", resolve_spec(spec, n, data.p())) +
                  " iterations=" + std::to_string(n_iterations);
  for (std::size_t i = 0; i < n; ++i)
    res.tau_hat[i] = state.y_pair(i, 1) - state.y_pair(i, 0);
  return res;
}

namespace {

class TreatmentDiffCriterion {
 public:
  TreatmentDiffCriterion(const double* y, const int* t) : y_(y), t_(t) {}

  bool pure(const int* rows, int n) const {
    bool arm_seen[2] = {false, false};
    bool y_varies = false;
    for (int i = 0; i < n; ++i) {
      arm_seen[t_[rows[i]]] = true;
      if (y_[rows[i]] != y_[rows[0]]) y_varies = true;
    }
    return !(arm_seen[0] && arm_seen[1]) || !y_varies;
  }

  double leaf_value(const int*, int) const { return 0.0; }

  struct Sweeper {
    const double* y;
    const int* t;
    double sum_left[2] = {0, 0};
    double sum_total[2] = {0, 0};
    int n_left[2] = {0, 0};
    int n_total[2] = {0, 0};

    void push_left(int row) {
      sum_left[t[row]] += y[row];
      ++n_left[t[row]];
    }
    double gain() const {
      const int nl0 = n_left[0], nl1 = n_left[1];
      const int nr0 = n_total[0] - nl0, nr1 = n_total[1] - nl1;
      if (nl0 < 1 || nl1 < 1 || nr0 < 1 || nr1 < 1)
        return -std::numeric_limits<double>::infinity();
      const double dl = sum_left[1] / nl1 - sum_left[0] / nl0;
      const double dr = (sum_total[1] - sum_left[1]) / nr1 -
                        (sum_total[0] - sum_left[0]) / nr0;
      const double nl = nl0 + nl1, nr = nr0 + nr1;
      const double n = nl + nr;
      return (nl * nr) / (n * n) * (dl - dr) * (dl - dr);
    }
  };

  Sweeper make_sweeper(const int* rows, int n) const {
    Sweeper s;
    s.y = y_;
    s.t = t_;
    for (int i = 0; i < n; ++i) {
      s.sum_total[t_[rows[i]]] += y_[rows[i]];
      ++s.n_total[t_[rows[i]]];
    }
    return s;
  }

 private:
  const double* y_;
  const int* t_;
};

// Held-out per-node outcome sums by arm, accumulated along each routed path.
struct NodeStats {
  double sum[2];
  int count[2];
};

}  // namespace

IteResult estimate_honest(const Dataset& data, const HonestSpec& spec) {
  data.validate();
  require_two_arms(data);
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (spec.n_trees < 1 || spec.nodesize < 1) throw ConfigError("invalid honest spec");

  Matrix design = vt_design(data, false);  // (X, T); T never yields a feasible split
  const int design_cols = static_cast<int>(p) + 1;
  const int mtry = spec.mtry != 0 ? spec.mtry : (design_cols + 2) / 3;
  if (mtry < 1 || mtry > design_cols) throw ConfigError("honest mtry out of range");

  // Random 50% split with both arms present in both halves.
  auto draw_split = [&](std::uint64_t key, std::vector<int>& grow, std::vector<int>& hold) {
    auto rng = make_rng(mix_key(spec.seed, key, 0x40E5'7000ULL));
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
    for (int attempt = 0; attempt < 100; ++attempt) {
      std::shuffle(perm.begin(), perm.end(), rng);
      const std::size_t half = n / 2;
      grow.assign(perm.begin(), perm.begin() + half);
      hold.assign(perm.begin() + half, perm.end());
      auto both_arms = [&](const std::vector<int>& rows) {
        bool seen[2] = {false, false};
        for (int r : rows) seen[data.t[r]] = true;
        return seen[0] && seen[1];
      };
      if (both_arms(grow) && both_arms(hold)) return;
    }
    throw ConfigError("could not draw a 50% split with both arms in both halves");
  };

  std::vector<int> forest_grow, forest_hold;
  if (!spec.split_per_tree) draw_split(0, forest_grow, forest_hold);

  TreatmentDiffCriterion crit(data.y.data(), data.t.data());
  std::vector<double> tree_tau(spec.n_trees * n, 0.0);
  std::vector<char> tree_ok(spec.n_trees, 1);

  parallel_for(spec.n_trees, [&](std::size_t tr) {
    std::vector<int> grow_rows = forest_grow, hold_rows = forest_hold;
    if (spec.split_per_tree) draw_split(tr + 1, grow_rows, hold_rows);

    // Bootstrap the growing half.
    auto rng = make_rng(mix_key(spec.seed, tr, 0xb001'5742'aa11'77c3ULL));
    std::vector<int> sample;
    sample.reserve(grow_rows.size());
    std::uniform_int_distribution<std::size_t> pick(0, grow_rows.size() - 1);
    std::vector<int> counts(n, 0);
    for (std::size_t d = 0; d < grow_rows.size(); ++d) {
      const int r = grow_rows[pick(rng)];
      sample.push_back(r);
      ++counts[r];
    }
    GrowConfig cfg{mtry, spec.nodesize, spec.seed, tr, {}};
    Tree tree = grow_tree(design, crit, std::move(sample), std::move(counts), cfg);

    // Repopulate with held-out rows.
    std::vector<NodeStats> stats(tree.nodes.size(), NodeStats{{0, 0}, {0, 0}});
    for (int r : hold_rows) {
      int id = 0;
      for (;;) {
        stats[id].sum[data.t[r]] += data.y[r];
        ++stats[id].count[data.t[r]];
        if (tree.nodes[id].is_leaf()) break;
        id = design(r, tree.nodes[id].split_var) <= tree.nodes[id].split_value
                 ? tree.nodes[id].left
                 : tree.nodes[id].right;
      }
    }
    if (stats[0].count[0] == 0 || stats[0].count[1] == 0) {
      tree_ok[tr] = 0;  // per-tree split failed to cover both arms
      return;
    }
    // Effect at the deepest node on the row's path whose held-out population
    // still contains both arms (empty-arm terminals prune upward).
    for (std::size_t i = 0; i < n; ++i) {
      int id = 0;
      double effect = stats[0].sum[1] / stats[0].count[1] - stats[0].sum[0] / stats[0].count[0];
      while (!tree.nodes[id].is_leaf()) {
        id = design(i, tree.nodes[id].split_var) <= tree.nodes[id].split_value
                 ? tree.nodes[id].left
                 : tree.nodes[id].right;
        if (stats[id].count[0] > 0 && stats[id].count[1] > 0)
          effect = stats[id].sum[1] / stats[id].count[1] - stats[id].sum[0] / stats[id].count[0];
        else
          break;
      }
      tree_tau[tr * n + i] = effect;
    }
  });

  IteResult res;
  res.method = Method::HONEST;
  res.tau_hat.assign(n, 0.0);
  res.oob_flags.assign(n, {});
  res.spec_used = "honest trees=" + std::to_string(spec.n_trees) + " mtry=" +
                  std::to_string(mtry) + " nodesize=" + std::to_string(spec.nodesize) +
                  " seed=" + std::to_string(spec.seed);
  int used = 0;
  for (int tr = 0; tr < spec.n_trees; ++tr) {
    if (!tree_ok[tr]) continue;
    ++used;
    for (std::size_t i = 0; i < n; ++i) res.tau_hat[i] += tree_tau[tr * n + i];
  }
  if (used == 0) throw ConfigError("honest forest: no usable trees");
  for (std::size_t i = 0; i < n; ++i) res.tau_hat[i] /= used;
  return res;
}

IteResult import_external_ite(const std::string& path, std::size_t expected_n) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open predictions file: " + path);
  IteResult res;
  res.method = Method::EXTERNAL;
  res.spec_used = "external file=" + path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || !std::isfinite(v))
      throw IngestionError("bad value in " + path + " at line " + std::to_string(line_no));
    res.tau_hat.push_back(v);
  }
  if (res.tau_hat.size() != expected_n)
    throw IngestionError("predictions file has " + std::to_string(res.tau_hat.size()) +
                         " rows, dataset has " + std::to_string(expected_n));
  res.oob_flags.assign(expected_n, {});
  return res;
}

}  // namespace cfrf
