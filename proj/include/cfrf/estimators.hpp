#pragma once

#include <string>

#include "cfrf/bivariate.hpp"
#include "cfrf/forest.hpp"
#include "cfrf/synthetic.hpp"

namespace cfrf {

enum class Method { VT, VT_I, CF, SYNCF, BIVARIATE, HONEST, EXTERNAL };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct OobFlags {
  bool y1_oob = false;
  bool y0_oob = false;
};

struct IteResult {
  std::vector<double> tau_hat;
  Method method = Method::VT;
  std::vector<OobFlags> oob_flags;
  std::string spec_used;
};

struct HonestSpec {
  int n_trees = 1000;
  int mtry = 0;  // 0 = ceil((p+1)/3), treatment column included
  int nodesize = 1;
  std::uint64_t seed = 0;
  bool split_per_tree = false;  // re-draw the 50% split per tree
};

// One forest on (X, T); factual-arm prediction is OOB, the flipped-treatment
// twin runs down all trees.
IteResult estimate_vt(const Dataset& data, const ForestSpec& spec);

// VT with the design augmented by the p interaction columns X*T; interactions
// are recomputed when the twin's treatment is flipped.
IteResult estimate_vt_interaction(const Dataset& data, const ForestSpec& spec);

// Separate forests per arm; natural-arm prediction OOB, counterfactual arm
// treated as new data.
IteResult estimate_cf(const Dataset& data, const ForestSpec& spec);

// As estimate_cf with per-arm synthetic forests.
IteResult estimate_syncf(const Dataset& data, const SyntheticSpec& spec);

// Difference of the completed bivariate outcome pair.
IteResult estimate_bivariate(const Dataset& data, const ForestSpec& spec,
                             int n_iterations = 5);

// Trees grown on a random half with a treatment-difference splitting rule;
// node effects come from the held-out half.
IteResult estimate_honest(const Dataset& data, const HonestSpec& spec);

IteResult import_external_ite(const std::string& path, std::size_t expected_n);

}  // namespace cfrf
