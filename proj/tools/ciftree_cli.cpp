#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/data.hpp"
#include "ciftree/errors.hpp"
#include "ciftree/evaluation.hpp"
#include "ciftree/forest.hpp"
#include "ciftree/imputation.hpp"
#include "ciftree/io.hpp"
#include "ciftree/nuisance.hpp"
#include "ciftree/simulation.hpp"

using namespace ciftree;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Root seed for every random stream");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  cmd->add_flag("--verbose", c.verbose, "Echo the resolved configuration as JSON");
}

void echo(const Common& c, const json& config) {
  if (c.verbose) std::cout << config.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return in;
}

// ---- grid ----------------------------------------------------------------

struct GridOptions {
  std::vector<double> times;
  std::vector<double> quantiles{0.25, 0.5, 0.75};
  std::string grid_file;
};

void add_grid(CLI::App* cmd, GridOptions& g) {
  cmd->add_option("--times", g.times, "Evaluation times");
  cmd->add_option("--quantiles", g.quantiles, "Quantiles of uncensored follow-up used as times");
  cmd->add_option("--grid", g.grid_file, "JSON file holding a 'grid' object (e.g. config.json from simulate)");
}

TimeGrid resolve_grid(const GridOptions& g, const Dataset& data) {
  if (!g.grid_file.empty()) {
    const auto j = load_json(g.grid_file);
    if (!j.contains("grid")) throw SchemaError("'" + g.grid_file + "' has no 'grid' object");
    return time_grid_from_json(j.at("grid"));
  }
  if (!g.times.empty()) return TimeGrid::equal_weights(g.times);
  return TimeGrid::equal_weights(marginal_event_quantiles(data, g.quantiles));
}

// ---- model inputs ----------------------------------------------------------

struct ModelOptions {
  std::string data;
  std::string method = "dr";
  std::string nuisance = "aj";
  std::string censoring = "km";
  std::string fg_params;
  std::size_t min_node = 30;
  double epsilon = kDefaultEpsilon;
  int cause = 1;
  std::size_t trees = 500;
  std::size_t replicates = 1;
  std::size_t nodesize = 20;
  std::string mtry = "sqrt";
  GridOptions grid;
  CsvSchema schema;
};

void add_model(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--data", o.data, "Training CSV (time,status,covariates)")->required();
  cmd->add_option("--time-column", o.schema.time_column, "Name of the follow-up time column");
  cmd->add_option("--status-column", o.schema.status_column, "Name of the status column (0 = censored, m = cause)");
  cmd->add_option("--covariates", o.schema.covariate_columns, "Covariate columns (default: all others)");
  cmd->add_option("--method", o.method, "ipcw, bj, dr or dr-xi")
      ->check(CLI::IsMember({"ipcw", "bj", "dr", "dr-xi", "dr_xi"}));
  cmd->add_option("--nuisance", o.nuisance, "CIF nuisance: aj, fg-true or iterated")
      ->check(CLI::IsMember({"aj", "fg-true", "iterated"}));
  cmd->add_option("--censoring", o.censoring, "Censoring model: km or tree")->check(CLI::IsMember({"km", "tree"}));
  cmd->add_option("--fg-params", o.fg_params, "JSON with Fine-Gray parameters (or a simulate config.json)");
  cmd->add_option("--min-node", o.min_node, "Minimum records per censoring-tree leaf");
  cmd->add_option("--epsilon", o.epsilon, "Lower bound applied to censoring survivor evaluations");
  cmd->add_option("--cause", o.cause, "Cause of interest");
  cmd->add_option("--B", o.trees, "Trees per replicate");
  cmd->add_option("--R", o.replicates, "xi replicates (dr-xi)");
  cmd->add_option("--nodesize", o.nodesize, "Minimum leaf size");
  cmd->add_option("--mtry", o.mtry, "Candidate covariates per split: sqrt or an integer");
  add_grid(cmd, o.grid);
}

int resolve_mtry(const std::string& s, int p) {
  if (s == "sqrt") return default_mtry(p);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (v < 1 || v > p) throw ParameterError("mtry must lie in [1, " + std::to_string(p) + "]");
    return v;
  } catch (const std::logic_error&) {
    throw ParameterError("mtry must be 'sqrt' or an integer, got '" + s + "'");
  }
}

FineGrayParams load_fg(const std::string& path) {
  const auto j = load_json(path);
  return fg_params_from_json(j.contains("fg") ? j.at("fg") : j);
}

struct Inputs {
  Dataset data;
  TimeGrid grid;
  ImputationMethod method;
  std::unique_ptr<CensoringModel> G;
  std::unique_ptr<CifModel> psi;
  ForestParams params;
  json config;
};

std::vector<std::string> names_of(const Dataset& d) { return d.covariate_names(); }

Inputs prepare(const ModelOptions& o, const Common& c) {
  auto data = load_csv(o.data, o.schema);
  auto grid = resolve_grid(o.grid, data);
  const auto method = parse_imputation_method(o.method);
  if (o.cause < 1 || o.cause > data.causes()) throw ParameterError("cause outside the causes present in the data");
  if (o.nuisance == "fg-true" && o.fg_params.empty())
    throw ConfigError("--nuisance fg-true requires --fg-params");
  if (method != ImputationMethod::bj && method != ImputationMethod::ipcw && data.censored_count() == 0)
    std::cerr << "warning: data are censoring-free; the augmentation term vanishes\n";

  ForestParams params;
  params.trees = o.trees;
  params.nodesize = o.nodesize;
  params.mtry = resolve_mtry(o.mtry, data.dim());
  params.seed = c.seed;
  params.threads = c.threads;

  std::unique_ptr<CensoringModel> G;
  if (method != ImputationMethod::bj) {
    if (o.censoring == "tree") G = std::make_unique<CensoringTree>(fit_censoring_tree(data, o.min_node, o.epsilon));
    else G = std::make_unique<MarginalCensoring>(fit_reverse_km(data, o.epsilon));
  }
  std::unique_ptr<CifModel> psi;
  if (method != ImputationMethod::ipcw) {
    if (o.nuisance == "aj") {
      psi = std::make_unique<AalenJohansen>(fit_aalen_johansen(data));
    } else if (o.nuisance == "fg-true") {
      psi = std::make_unique<ParametricFineGray>(load_fg(o.fg_params));
      if (data.causes() > 2) throw ConfigError("the Fine-Gray oracle has two causes");
    } else {
      ForestParams np = params;
      psi = std::make_unique<ForestCif>(fit_iterated_nuisance(data, grid, np));
    }
  }

  json config = {{"data", o.data},
                 {"method", to_string(method)},
                 {"nuisance", method == ImputationMethod::ipcw ? "none" : o.nuisance},
                 {"censoring", method == ImputationMethod::bj ? "none" : o.censoring},
                 {"min_node", o.min_node},
                 {"epsilon", o.epsilon},
                 {"cause", o.cause},
                 {"B", params.trees},
                 {"R", o.replicates},
                 {"nodesize", params.nodesize},
                 {"mtry", params.mtry},
                 {"seed", c.seed},
                 {"grid", to_json(grid)}};
  if (!o.fg_params.empty()) config["fg_params"] = o.fg_params;
  return Inputs{std::move(data), std::move(grid), method, std::move(G), std::move(psi), params, std::move(config)};
}

// Covariate columns named in `names`, taken from a CSV with a header.
Matrix load_covariates(const std::string& path, const std::vector<std::string>& names) {
  std::vector<std::string> header;
  auto in = open_in(path);
  const Matrix all = read_matrix_csv(in, &header);
  Matrix out(all.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), names[k]);
    if (it == header.end()) throw SchemaError("'" + path + "' is missing covariate column '" + names[k] + "'");
    out.col(static_cast<Eigen::Index>(k)) = all.col(static_cast<Eigen::Index>(it - header.begin()));
  }
  return out;
}

struct LoadedModel {
  ForestModel forest;
  std::vector<std::string> covariates;
};

LoadedModel load_model(const std::string& path) {
  const auto j = load_json(path);
  auto forest = forest_from_json(j);
  std::vector<std::string> names;
  if (j.contains("covariates")) names = j.at("covariates").get<std::vector<std::string>>();
  return LoadedModel{std::move(forest), std::move(names)};
}

// ---- commands --------------------------------------------------------------

struct SimulateOptions {
  std::size_t n = 250;
  std::size_t n_test = 500;
  int p_dim = 20;
  std::string correlation = "independent";
  double rho = 0.75;
  std::string censoring = "lognormal";
  double uniform_a = 0.0;
  double uniform_b = 50.0;
  std::string fg_params;
  std::vector<double> times;
  std::vector<double> quantiles{0.25, 0.5, 0.75};
  std::size_t oracle_sample = 200000;
  std::string out = ".";
};

int cmd_simulate(const SimulateOptions& o, const Common& c) {
  SimConfig config;
  config.n = o.n;
  config.p_dim = o.p_dim;
  config.correlation = parse_correlation(o.correlation);
  config.rho = o.rho;
  config.censoring = parse_censoring_mode(o.censoring);
  config.uniform_a = o.uniform_a;
  config.uniform_b = o.uniform_b;
  config.seed = c.seed;
  config.threads = c.threads;
  if (!o.fg_params.empty()) config.fg = load_fg(o.fg_params);
  config.validate();
  if (o.n_test < 1) throw ParameterError("--n-test must be at least 1");

  const auto grid = o.times.empty() ? TimeGrid::equal_weights(oracle_marginal_quantiles(config, o.quantiles, o.oracle_sample))
                                    : TimeGrid::equal_weights(o.times);
  const auto sim = simulate_dataset(config);
  SimConfig test_config = config;
  test_config.seed = derive_seed(config.seed, {stream::kTest});
  const Matrix test_w = gen_covariates(test_config, o.n_test);

  fs::create_directories(o.out);
  const fs::path dir(o.out);
  save_csv((dir / "data.csv").string(), sim.data);
  {
    auto out = open_out((dir / "test.csv").string());
    const auto& names = sim.data.covariate_names();
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
    out << '\n';
    for (Eigen::Index i = 0; i < test_w.rows(); ++i) {
      for (Eigen::Index k = 0; k < test_w.cols(); ++k) out << (k ? "," : "") << test_w(i, k);
      out << '\n';
    }
  }
  {
    auto out = open_out((dir / "truth.csv").string());
    out << "row,cause,time,cif\n";
    for (Eigen::Index i = 0; i < test_w.rows(); ++i) {
      const auto curves = sim.oracle.at({test_w.row(i).data(), static_cast<std::size_t>(test_w.cols())});
      for (int m = 1; m <= 2; ++m)
        for (double t : grid.times()) out << i << ',' << m << ',' << t << ',' << curves->cif(m, t) << '\n';
    }
  }
  json cfg = to_json(config);
  cfg["n_test"] = o.n_test;
  cfg["grid"] = to_json(grid);
  cfg["quantiles"] = o.quantiles;
  cfg["oracle_sample"] = o.oracle_sample;
  cfg["censored_fraction"] = static_cast<double>(sim.data.censored_count()) / static_cast<double>(sim.data.size());
  save_json((dir / "config.json").string(), cfg);
  echo(c, cfg);
  return 0;
}

struct FitOptions {
  ModelOptions model;
  std::string out = "model.json";
  std::string diagnostics = "diagnostics.csv";
  std::string imputed;
};

int cmd_fit(const FitOptions& o, const Common& c) {
  auto in = prepare(o.model, c);
  std::vector<ImputedMatrix> imputed;
  std::optional<ForestModel> forest;
  if (in.method == ImputationMethod::dr_xi) {
    M1Options m1;
    m1.replicates = o.model.replicates;
    forest.emplace(fit_m1(in.data, in.grid, o.model.cause, *in.G, *in.psi, m1, in.params, &imputed));
  } else {
    imputed.emplace_back();
    forest.emplace(fit_m0(in.data, in.grid, o.model.cause, in.method, in.G.get(), in.psi.get(), in.params, &imputed[0]));
  }

  json doc = to_json(*forest);
  doc["covariates"] = names_of(in.data);
  doc["run"] = in.config;
  save_json(o.out, doc);

  ImputationDiagnostics total;
  for (const auto& m : imputed) {
    total.survivor_evaluations += m.diagnostics.survivor_evaluations;
    total.survivor_clamped += m.diagnostics.survivor_clamped;
    total.incidence_evaluations += m.diagnostics.incidence_evaluations;
    total.incidence_floored += m.diagnostics.incidence_floored;
    total.max_identity_residual = std::max(total.max_identity_residual, m.diagnostics.max_identity_residual);
  }
  {
    auto out = open_out(o.diagnostics);
    out << "key,value\n";
    out << "method," << to_string(in.method) << '\n';
    out << "n," << in.data.size() << '\n';
    out << "censored," << in.data.censored_count() << '\n';
    out << "trees," << forest->trees().size() << '\n';
    out << "survivor_evaluations," << total.survivor_evaluations << '\n';
    out << "survivor_clamped," << total.survivor_clamped << '\n';
    out << "survivor_clamp_fraction," << total.survivor_clamp_fraction() << '\n';
    out << "incidence_evaluations," << total.incidence_evaluations << '\n';
    out << "incidence_floored," << total.incidence_floored << '\n';
    out << "max_identity_residual," << total.max_identity_residual << '\n';
    if (imputed.size() == 1) {
      const auto oob = oob_summary(*forest, in.data.covariates(), imputed[0].values);
      out << "oob_error," << oob.error << '\n';
      out << "oob_rows_skipped," << oob.rows_skipped << '\n';
    }
  }
  if (!o.imputed.empty()) {
    auto out = open_out(o.imputed);
    write_imputed_csv(out, imputed[0]);
  }
  echo(c, in.config);
  return 0;
}

struct TuneOptions {
  ModelOptions model;
  std::vector<std::size_t> nodesizes{10, 20, 50};
  std::vector<int> mtrys{2, 4, 8};
  std::string out = "tune.csv";
};

int cmd_tune(const TuneOptions& o, const Common& c) {
  if (o.model.method == "dr-xi" || o.model.method == "dr_xi") {
    if (o.model.replicates != 1) std::cerr << "warning: tuning uses replicate 0 only\n";
  }
  auto in = prepare(o.model, c);
  const auto result = tune(in.data, in.grid, o.model.cause, in.method, in.G.get(), in.psi.get(), o.nodesizes, o.mtrys,
                           in.params);
  auto out = open_out(o.out);
  out << "nodesize,mtry,oob\n";
  for (const auto& row : result.table) out << row.nodesize << ',' << row.mtry << ',' << row.oob << '\n';
  std::cout << "selected nodesize=" << result.nodesize << " mtry=" << result.mtry << " oob=" << result.oob << '\n';
  in.config["nodesize_grid"] = o.nodesizes;
  in.config["mtry_grid"] = o.mtrys;
  echo(c, in.config);
  return 0;
}

struct EvaluateOptions {
  std::string model;
  std::string test;
  std::string truth;
  std::string out = "report.csv";
  std::string label;
  bool raw = false;
};

int cmd_evaluate(const EvaluateOptions& o, const Common& c) {
  const auto m = load_model(o.model);
  const Matrix w = load_covariates(o.test, m.covariates);
  auto truth_in = open_in(o.truth);
  const auto truth = read_curves_csv(truth_in, m.forest.cause(), "cif");
  if (truth.times != m.forest.grid().times())
    throw ConfigError("truth grid does not match the model grid");
  if (truth.values.rows() != w.rows()) throw ConfigError("truth rows do not match the test rows");
  const Matrix pred = m.forest.predict(w, !o.raw);
  EvalReport report;
  report.times = truth.times;
  report.n_test = static_cast<std::size_t>(w.rows());
  report.add(o.label.empty() ? to_string(m.forest.method()) : o.label, mse_vs_matrix(pred, truth.values));
  auto out = open_out(o.out);
  report.write_csv(out);
  report.write_csv(std::cout);
  echo(c, {{"model", o.model}, {"test", o.test}, {"truth", o.truth}, {"raw", o.raw}});
  return 0;
}

struct PdpOptions {
  std::string model;
  std::string data;
  std::string variable;
  std::vector<double> values;
  bool categorical = false;
  std::string out = "pdp.csv";
  std::string table;
};

int cmd_pdp(const PdpOptions& o, const Common& c) {
  const auto m = load_model(o.model);
  const Matrix w = load_covariates(o.data, m.covariates);
  auto it = std::find(m.covariates.begin(), m.covariates.end(), o.variable);
  if (it == m.covariates.end()) throw SchemaError("model has no covariate '" + o.variable + "'");
  const int var = static_cast<int>(it - m.covariates.begin());
  const auto table = pdp_table_categorical(m.forest, w, var, o.values);
  const std::string method = to_string(m.forest.method());
  {
    auto out = open_out(o.out);
    out << "method,variable,value,time,estimate\n";
    for (std::size_t l = 0; l < table.levels.size(); ++l)
      for (std::size_t j = 0; j < table.times.size(); ++j)
        out << method << ',' << o.variable << ',' << table.levels[l] << ',' << table.times[j] << ','
            << table.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) << '\n';
  }
  if (o.categorical || !o.table.empty()) {
    std::ostringstream s;
    s << std::setprecision(6) << "time";
    for (double v : table.levels) s << ',' << o.variable << '=' << v;
    s << '\n';
    for (std::size_t j = 0; j < table.times.size(); ++j) {
      s << table.times[j];
      for (std::size_t l = 0; l < table.levels.size(); ++l)
        s << ',' << table.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
      s << '\n';
    }
    if (!o.table.empty()) open_out(o.table) << s.str();
    else std::cout << s.str();
  }
  echo(c, {{"model", o.model}, {"data", o.data}, {"variable", o.variable}, {"values", o.values}});
  return 0;
}

struct PredictOptions {
  std::string model;
  std::string test;
  std::string out = "predictions.csv";
  bool raw = false;
};

int cmd_predict(const PredictOptions& o, const Common& c) {
  const auto m = load_model(o.model);
  const Matrix w = load_covariates(o.test, m.covariates);
  const Matrix pred = m.forest.predict(w, !o.raw);
  auto out = open_out(o.out);
  out << "row";
  for (double t : m.forest.grid().times()) out << ",t=" << t;
  out << '\n';
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < pred.cols(); ++j) out << ',' << pred(i, j);
    out << '\n';
  }
  echo(c, {{"model", o.model}, {"test", o.test}, {"raw", o.raw}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competing-risks CIF trees and forests with IPCW, Buckley-James and doubly robust losses"};
  app.require_subcommand(1);

  Common common;
  int status = 0;

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Simulate training data, test covariates and oracle truth");
  add_common(s, common);
  s->add_option("--n", sim.n, "Training size");
  s->add_option("--n-test", sim.n_test, "Test size");
  s->add_option("--p", sim.p_dim, "Number of covariates");
  s->add_option("--correlation", sim.correlation, "independent or ar");
  s->add_option("--rho", sim.rho, "AR(1) correlation");
  s->add_option("--censoring", sim.censoring, "lognormal, uniform or none");
  s->add_option("--uniform-a", sim.uniform_a, "Uniform censoring lower bound");
  s->add_option("--uniform-b", sim.uniform_b, "Uniform censoring upper bound");
  s->add_option("--fg-params", sim.fg_params, "JSON with Fine-Gray parameters");
  s->add_option("--times", sim.times, "Grid times (default: oracle quantiles)");
  s->add_option("--quantiles", sim.quantiles, "Marginal event-time quantiles for the grid");
  s->add_option("--oracle-sample", sim.oracle_sample, "Sample size for oracle quantiles");
  s->add_option("--out", sim.out, "Output directory");
  s->callback([&] { status = cmd_simulate(sim, common); });

  FitOptions fit;
  auto* f = app.add_subcommand("fit", "Fit a CIF forest");
  add_common(f, common);
  add_model(f, fit.model);
  f->add_option("--out", fit.out, "Model JSON");
  f->add_option("--diagnostics", fit.diagnostics, "Diagnostics CSV");
  f->add_option("--imputed", fit.imputed, "Optional imputed-response CSV");
  f->callback([&] { status = cmd_fit(fit, common); });

  TuneOptions tn;
  auto* t = app.add_subcommand("tune", "Grid search over nodesize and mtry by out-of-bag error");
  add_common(t, common);
  add_model(t, tn.model);
  t->add_option("--nodesize-grid", tn.nodesizes, "Candidate nodesize values");
  t->add_option("--mtry-grid", tn.mtrys, "Candidate mtry values");
  t->add_option("--out", tn.out, "OOB table CSV");
  t->callback([&] { status = cmd_tune(tn, common); });

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "MSE of a fitted model against oracle truth");
  add_common(e, common);
  e->add_option("--model", ev.model, "Model JSON")->required();
  e->add_option("--test", ev.test, "Test covariate CSV")->required();
  e->add_option("--truth", ev.truth, "Truth CSV from simulate")->required();
  e->add_option("--out", ev.out, "Report CSV");
  e->add_option("--label", ev.label, "Method label in the report");
  e->add_flag("--raw", ev.raw, "Score unclamped predictions");
  e->callback([&] { status = cmd_evaluate(ev, common); });

  PdpOptions pd;
  auto* p = app.add_subcommand("pdp", "Partial dependence of a fitted model");
  add_common(p, common);
  p->add_option("--model", pd.model, "Model JSON")->required();
  p->add_option("--data", pd.data, "CSV with covariates to average over")->required();
  p->add_option("--variable", pd.variable, "Covariate name")->required();
  p->add_option("--values", pd.values, "Values or levels of the covariate")->required();
  p->add_flag("--categorical", pd.categorical, "Print a times x levels table");
  p->add_option("--table", pd.table, "Write the times x levels table to a file");
  p->add_option("--out", pd.out, "Long-format PDP CSV");
  p->callback([&] { status = cmd_pdp(pd, common); });

  PredictOptions pr;
  auto* q = app.add_subcommand("predict", "Predict CIFs for new covariates");
  add_common(q, common);
  q->add_option("--model", pr.model, "Model JSON")->required();
  q->add_option("--test", pr.test, "Covariate CSV")->required();
  q->add_option("--out", pr.out, "Prediction CSV");
  q->add_flag("--raw", pr.raw, "Do not clamp predictions to [0,1]");
  q->callback([&] { status = cmd_predict(pr, common); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return status;
}
