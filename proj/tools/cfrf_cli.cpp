// Command-line front door: simulate, estimate, benchmark, infer, coplot.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "cfrf/inference.hpp"
#include "cfrf/io.hpp"
#include "cfrf/simbench.hpp"

namespace {

using namespace cfrf;

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError("empty integer list: " + csv);
  return out;
}

std::string int_list_to_string(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

// Flat key=value config files become injected "--key=value" arguments placed
// before the explicit ones, so the command line wins on conflicts.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.empty()) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : parse_config_file(config_path))
    injected.push_back("--" + key + "=" + value);
  std::vector<std::string> out;
  out.push_back(args[0]);  // subcommand
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

Schema default_schema(const std::string& data_path) {
  // simulate-produced layout: covariates plus columns named "t" and "y".
  Schema schema;
  schema["t"] = {ColumnRole::Treatment, ColumnKind::Numeric};
  schema["y"] = {ColumnRole::Outcome, ColumnKind::Numeric};
  (void)data_path;
  return schema;
}

struct EstimatorFlags {
  std::string method = "vt";
  int trees = 1000;
  int mtry = 0;
  int nodesize = 0;  // 0 = method default (3, bivariate/honest 1)
  int iterations = 5;
  int base_trees = 250;
  int final_trees = 1000;
  std::string nodesize_grid = "1,2,3,4,5,6,7,8,9,10,20,30,50,100";
  std::string mtry_grid = "1,10,20";
  std::string external_file;

  void add_options(CLI::App* cmd) {
    auto take_last = [](CLI::Option* o) { o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast); };
    take_last(cmd->add_option("--method", method, "vt | vt-i | cf | syncf | bivariate | honest | external"));
    take_last(cmd->add_option("--trees", trees, "trees per forest"));
    take_last(cmd->add_option("--mtry", mtry, "candidate variables per split (0 = p/3)"));
    take_last(cmd->add_option("--nodesize", nodesize, "minimum terminal node size (0 = method default)"));
    take_last(cmd->add_option("--iterations", iterations, "bivariate imputation iterations"));
    take_last(cmd->add_option("--base-trees", base_trees, "synthetic base-learner trees"));
    take_last(cmd->add_option("--final-trees", final_trees, "synthetic final-forest trees"));
    take_last(cmd->add_option("--nodesize-grid", nodesize_grid, "synthetic nodesize grid (csv)"));
    take_last(cmd->add_option("--mtry-grid", mtry_grid, "synthetic mtry grid (csv)"));
    take_last(cmd->add_option("--external-file", external_file, "predictions file for --method external"));
  }

  EstimatorConfig build(std::uint64_t seed) const {
    EstimatorConfig cfg;
    cfg.method = parse_method(method);
    cfg.forest.n_trees = trees;
    cfg.forest.mtry = mtry;
    cfg.forest.nodesize = nodesize != 0 ? nodesize
                          : cfg.method == Method::BIVARIATE ? 1
                                                            : 3;
    cfg.forest.seed = seed;
    cfg.synthetic.base_n_trees = base_trees;
    cfg.synthetic.final_n_trees = final_trees;
    cfg.synthetic.nodesize_grid = parse_int_list(nodesize_grid);
    cfg.synthetic.mtry_grid = parse_int_list(mtry_grid);
    cfg.synthetic.seed = seed;
    cfg.honest.n_trees = trees;
    cfg.honest.mtry = mtry;
    cfg.honest.nodesize = nodesize != 0 ? nodesize : 1;
    cfg.honest.seed = seed;
    cfg.bivariate_iterations = iterations;
    return cfg;
  }

  std::vector<std::pair<std::string, std::string>> manifest() const {
    return {{"method", method},
            {"trees", std::to_string(trees)},
            {"mtry", std::to_string(mtry)},
            {"nodesize", std::to_string(nodesize)},
            {"iterations", std::to_string(iterations)},
            {"base-trees", std::to_string(base_trees)},
            {"final-trees", std::to_string(final_trees)},
            {"nodesize-grid", nodesize_grid},
            {"mtry-grid", mtry_grid}};
  }
};

LoadedDataset load_with_optional_schema(const std::string& data_path,
                                        const std::string& schema_path) {
  Schema schema = schema_path.empty() ? default_schema(data_path) : load_schema(schema_path);
  return load_dataset(data_path, schema);
}

int run(int argc, char** argv) {
  CLI::App app{"counterfactual forest toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string config_path;

  auto add_globals = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--threads", threads)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    cmd->add_option("--config", config_path, "flat key=value config file")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  };

  // --- simulate ---
  auto* sim_cmd = app.add_subcommand("simulate", "write a simulated dataset with ground truth");
  int sim_model = 1;
  std::size_t sim_n = 500;
  double sim_sigma = 0.1;
  std::string sim_out = "sim.tsv";
  add_globals(sim_cmd);
  sim_cmd->add_option("--model", sim_model)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sim_cmd->add_option("--n", sim_n)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sim_cmd->add_option("--sigma", sim_sigma)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sim_cmd->add_option("--out", sim_out)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // --- estimate ---
  auto* est_cmd = app.add_subcommand("estimate", "estimate per-individual treatment effects");
  std::string est_data, est_schema, est_out = "tau.txt";
  EstimatorFlags est_flags;
  add_globals(est_cmd);
  est_cmd->add_option("--data", est_data)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  est_cmd->add_option("--schema", est_schema)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  est_cmd->add_option("--out", est_out)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  est_flags.add_options(est_cmd);

  // --- benchmark ---
  auto* bench_cmd = app.add_subcommand("benchmark", "simulation experiment grid");
  std::string bench_models = "1,2,3", bench_estimators = "vt,vt-i,cf";
  std::size_t bench_n = 500;
  int bench_reps = 50, bench_strata = 20;
  double bench_sigma = 0.1;
  std::string bench_out = "results.tsv";
  EstimatorFlags bench_flags;
  add_globals(bench_cmd);
  bench_cmd->add_option("--models", bench_models)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--estimators", bench_estimators)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--n", bench_n)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--replicates", bench_reps)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--strata", bench_strata)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--sigma", bench_sigma)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_cmd->add_option("--out", bench_out)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bench_flags.add_options(bench_cmd);

  // --- infer ---
  auto* infer_cmd = app.add_subcommand("infer", "subsampling inference on estimated effects");
  std::string infer_data, infer_schema, infer_out = "coefficients.tsv";
  double infer_fraction = 0.1;
  int infer_reps = 1000;
  bool infer_no_rescale = false;
  EstimatorFlags infer_flags;
  infer_flags.method = "syncf";
  add_globals(infer_cmd);
  infer_cmd->add_option("--data", infer_data)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  infer_cmd->add_option("--schema", infer_schema)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  infer_cmd->add_option("--fraction", infer_fraction)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  infer_cmd->add_option("--replicates", infer_reps)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  infer_cmd->add_flag("--no-rescale", infer_no_rescale, "report raw replicate standard deviations");
  infer_cmd->add_option("--out", infer_out)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  infer_flags.add_options(infer_cmd);

  // --- coplot ---
  auto* coplot_cmd = app.add_subcommand("coplot", "export conditioning-panel data");
  std::string cp_data, cp_schema, cp_tau, cp_x, cp_panel, cp_cond_v, cp_cond_h;
  int cp_bins = 4;
  std::string cp_out = "coplot.tsv";
  add_globals(coplot_cmd);
  coplot_cmd->add_option("--data", cp_data)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--schema", cp_schema)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--tau", cp_tau)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--x", cp_x)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--panel", cp_panel)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--cond-v", cp_cond_v)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--cond-h", cp_cond_h)->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--bins", cp_bins)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  coplot_cmd->add_option("--out", cp_out)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  try {
    auto args = expand_config(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage text, nonzero for real errors
  }

  set_thread_count(threads);

  auto global_manifest = [&](const std::string& command) {
    std::vector<std::pair<std::string, std::string>> m;
    m.emplace_back("command", command);
    m.emplace_back("seed", std::to_string(seed));
    m.emplace_back("threads", std::to_string(threads));
    return m;
  };

  if (sim_cmd->parsed()) {
    if (sim_model < 1 || sim_model > 3) throw ConfigError("model must be 1, 2 or 3");
    SimModel model{static_cast<SimModelId>(sim_model), sim_sigma, sim_n};
    SimulatedData sim = simulate(model, seed);
    std::vector<std::string> names;
    for (int j = 1; j <= 20; ++j) names.push_back("x" + std::to_string(j));
    save_dataset(sim_out, sim.dataset, names);
    std::string truth = "true_tau\tpropensity\n";
    for (std::size_t i = 0; i < sim_n; ++i)
      truth += format_double(sim.true_tau[i]) + "\t" +
               format_double(sim.true_propensity[i]) + "\n";
    write_text_file(sim_out + ".truth", truth);
    auto m = global_manifest("simulate");
    m.emplace_back("model", std::to_string(sim_model));
    m.emplace_back("n", std::to_string(sim_n));
    m.emplace_back("sigma", format_double(sim_sigma));
    m.emplace_back("out", sim_out);
    write_manifest(sim_out + ".manifest", m);
    return 0;
  }

  if (est_cmd->parsed()) {
    LoadedDataset loaded = load_with_optional_schema(est_data, est_schema);
    std::vector<double> tau;
    if (parse_method(est_flags.method) == Method::EXTERNAL) {
      if (est_flags.external_file.empty())
        throw ConfigError("--method external requires --external-file");
      tau = import_external_ite(est_flags.external_file, loaded.data.n()).tau_hat;
    } else {
      tau = run_estimator(loaded.data, est_flags.build(seed), seed);
    }
    save_tau_file(est_out, tau);
    auto m = global_manifest("estimate");
    m.emplace_back("data", est_data);
    m.emplace_back("schema", est_schema);
    m.emplace_back("out", est_out);
    for (auto& kv : est_flags.manifest()) m.push_back(kv);
    write_manifest(est_out + ".manifest", m);
    return 0;
  }

  if (bench_cmd->parsed()) {
    ExperimentConfig cfg;
    cfg.models.clear();
    for (int id : parse_int_list(bench_models)) {
      if (id < 1 || id > 3) throw ConfigError("model must be 1, 2 or 3");
      cfg.models.push_back(static_cast<SimModelId>(id));
    }
    cfg.estimators.clear();
    std::stringstream ss(bench_estimators);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      EstimatorFlags f = bench_flags;
      f.method = name;
      cfg.estimators.push_back(f.build(seed));
    }
    cfg.n = bench_n;
    cfg.n_replicates = bench_reps;
    cfg.n_strata = bench_strata;
    cfg.sigma = bench_sigma;
    cfg.base_seed = seed;
    auto cells = run_experiment(cfg);
    write_text_file(bench_out, results_table(cells));
    auto m = global_manifest("benchmark");
    m.emplace_back("models", bench_models);
    m.emplace_back("estimators", bench_estimators);
    m.emplace_back("n", std::to_string(bench_n));
    m.emplace_back("replicates", std::to_string(bench_reps));
    m.emplace_back("strata", std::to_string(bench_strata));
    m.emplace_back("sigma", format_double(bench_sigma));
    m.emplace_back("out", bench_out);
    for (auto& kv : bench_flags.manifest()) m.push_back(kv);
    write_manifest(bench_out + ".manifest", m);
    return 0;
  }

  if (infer_cmd->parsed()) {
    LoadedDataset loaded = load_with_optional_schema(infer_data, infer_schema);
    InferenceConfig icfg;
    icfg.subsample_fraction = infer_fraction;
    icfg.n_replicates = infer_reps;
    icfg.seed = seed;
    icfg.rescale_std_error = !infer_no_rescale;
    EstimatorConfig est_cfg = infer_flags.build(seed);
    auto estimator = [&](const Dataset& sub, std::uint64_t s) {
      return run_estimator(sub, est_cfg, s);
    };
    CoefficientTable table =
        subsample_inference(loaded.data, loaded.covariate_names, icfg, estimator);
    write_text_file(infer_out, coefficient_table_text(table));
    auto m = global_manifest("infer");
    m.emplace_back("data", infer_data);
    m.emplace_back("schema", infer_schema);
    m.emplace_back("fraction", format_double(infer_fraction));
    m.emplace_back("replicates", std::to_string(infer_reps));
    m.emplace_back("rescale", infer_no_rescale ? "0" : "1");
    m.emplace_back("out", infer_out);
    for (auto& kv : infer_flags.manifest()) m.push_back(kv);
    write_manifest(infer_out + ".manifest", m);
    return 0;
  }

  if (coplot_cmd->parsed()) {
    LoadedDataset loaded = load_with_optional_schema(cp_data, cp_schema);
    auto tau = load_tau_file(cp_tau);
    std::string panels = coplot_export(tau, loaded.data, loaded.covariate_names, cp_x,
                                       cp_panel, cp_cond_v, cp_cond_h, cp_bins);
    write_text_file(cp_out, panels);
    auto m = global_manifest("coplot");
    m.emplace_back("data", cp_data);
    m.emplace_back("tau", cp_tau);
    m.emplace_back("x", cp_x);
    m.emplace_back("panel", cp_panel);
    m.emplace_back("cond-v", cp_cond_v);
    m.emplace_back("cond-h", cp_cond_h);
    m.emplace_back("bins", std::to_string(cp_bins));
    m.emplace_back("out", cp_out);
    write_manifest(cp_out + ".manifest", m);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cfrf::ConfigError& e) {
    std::cerr << "error: E_CONFIG: " << e.what() << "\n";
    return 3;
  } catch (const cfrf::SchemaError& e) {
    std::cerr << "error: E_SCHEMA: " << e.what() << "\n";
    return 4;
  } catch (const cfrf::IngestionError& e) {
    std::cerr << "error: E_INGEST: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: E_INTERNAL: " << e.what() << "\n";
    return 1;
  }
}
