#include "ciftree/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "ciftree/errors.hpp"

namespace ciftree {

namespace {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  return j.at(key);
}

const json& array_field(const json& j, const char* key) {
  const auto& a = field(j, key);
  if (!a.is_array()) throw SchemaError(std::string("field '") + key + "' must be an array");
  return a;
}

void expect_kind(const json& j, const std::string& kind) {
  const auto k = get<std::string>(j, "kind");
  if (k != kind) throw SchemaError("expected a '" + kind + "' document, found '" + k + "'");
}

json curve_json(const HazardCurve& c) { return {{"times", c.jump_times()}, {"hazards", c.hazards()}}; }

HazardCurve curve_from(const json& j) {
  return HazardCurve(get<std::vector<double>>(j, "times"), get<std::vector<double>>(j, "hazards"));
}

}  // namespace

json to_json(const TimeGrid& grid) { return {{"times", grid.times()}, {"weights", grid.weights()}}; }

TimeGrid time_grid_from_json(const json& j) {
  return TimeGrid(get<std::vector<double>>(j, "times"), get<std::vector<double>>(j, "weights"));
}

json to_json(const TreeModel& tree) {
  std::vector<int> variable, left, right;
  std::vector<double> threshold, risk;
  std::vector<std::size_t> count;
  std::vector<std::vector<double>> value;
  for (const auto& n : tree.nodes()) {
    variable.push_back(n.variable);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    count.push_back(n.count);
    risk.push_back(n.risk);
    value.push_back(n.value);
  }
  return {{"nodesize", tree.params().nodesize}, {"mtry", tree.params().mtry}, {"seed", tree.params().seed},
          {"weights", tree.weights()}, {"variable", variable}, {"threshold", threshold}, {"left", left},
          {"right", right}, {"count", count}, {"risk", risk}, {"value", value}};
}

TreeModel tree_from_json(const json& j) {
  TreeParams params;
  params.nodesize = get<std::size_t>(j, "nodesize");
  params.mtry = get<int>(j, "mtry");
  params.seed = get<std::uint64_t>(j, "seed");
  const auto variable = get<std::vector<int>>(j, "variable");
  const auto threshold = get<std::vector<double>>(j, "threshold");
  const auto left = get<std::vector<int>>(j, "left");
  const auto right = get<std::vector<int>>(j, "right");
  const auto count = get<std::vector<std::size_t>>(j, "count");
  const auto risk = get<std::vector<double>>(j, "risk");
  auto value = get<std::vector<std::vector<double>>>(j, "value");
  const std::size_t n = variable.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || count.size() != n || risk.size() != n ||
      value.size() != n)
    throw SchemaError("tree node arrays differ in length");
  std::vector<TreeNode> nodes(n);
  for (std::size_t k = 0; k < n; ++k) {
    nodes[k].variable = variable[k];
    nodes[k].threshold = threshold[k];
    nodes[k].left = left[k];
    nodes[k].right = right[k];
    nodes[k].count = count[k];
    nodes[k].risk = risk[k];
    nodes[k].value = std::move(value[k]);
  }
  try {
    return TreeModel(std::move(nodes), get<std::vector<double>>(j, "weights"), params);
  } catch (const ParameterError& e) {
    throw SchemaError(e.what());
  }
}

json to_json(const ForestModel& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees()) trees.push_back(to_json(t));
  const auto& m = forest.meta();
  return {{"kind", "forest"},
          {"version", 1},
          {"cause", forest.cause()},
          {"method", to_string(forest.method())},
          {"grid", to_json(forest.grid())},
          {"meta",
           {{"replicates", m.replicates},
            {"trees_per_replicate", m.trees_per_replicate},
            {"nodesize", m.nodesize},
            {"mtry", m.mtry},
            {"seed", m.seed},
            {"nuisance", m.nuisance},
            {"censoring", m.censoring}}},
          {"training_rows", forest.training_rows()},
          {"inbag", forest.inbag()},
          {"trees", trees}};
}

ForestModel forest_from_json(const json& j) {
  expect_kind(j, "forest");
  ForestMeta meta;
  const auto& mj = field(j, "meta");
  meta.replicates = get<std::size_t>(mj, "replicates");
  meta.trees_per_replicate = get<std::size_t>(mj, "trees_per_replicate");
  meta.nodesize = get<std::size_t>(mj, "nodesize");
  meta.mtry = get<int>(mj, "mtry");
  meta.seed = get<std::uint64_t>(mj, "seed");
  meta.nuisance = get_or<std::string>(mj, "nuisance", "");
  meta.censoring = get_or<std::string>(mj, "censoring", "");
  std::vector<TreeModel> trees;
  for (const auto& t : array_field(j, "trees")) trees.push_back(tree_from_json(t));
  auto inbag = get_or<std::vector<std::vector<std::uint32_t>>>(j, "inbag", {});
  try {
    return ForestModel(std::move(trees), time_grid_from_json(field(j, "grid")), get<int>(j, "cause"),
                       parse_imputation_method(get<std::string>(j, "method")), std::move(meta), std::move(inbag),
                       get_or<std::size_t>(j, "training_rows", 0));
  } catch (const ParameterError& e) {
    throw SchemaError(e.what());
  }
}

json to_json(const CensoringModel& model) {
  if (const auto* m = dynamic_cast<const MarginalCensoring*>(&model))
    return {{"kind", "censoring-marginal"}, {"epsilon", m->epsilon()}, {"curve", curve_json(m->curve())}};
  if (const auto* t = dynamic_cast<const CensoringTree*>(&model)) {
    json nodes = json::array();
    for (const auto& n : t->nodes())
      nodes.push_back({{"variable", n.variable}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                       {"curve", n.curve}, {"count", n.count}});
    json curves = json::array();
    for (const auto& c : t->curves()) curves.push_back(curve_json(c));
    return {{"kind", "censoring-tree"}, {"epsilon", t->epsilon()}, {"nodes", nodes}, {"curves", curves}};
  }
  if (const auto* l = dynamic_cast<const LognormalCensoring*>(&model))
    return {{"kind", "censoring-lognormal"}, {"epsilon", l->epsilon()}, {"intervals", l->intervals()}};
  throw ConfigError("censoring model '" + model.kind() + "' cannot be serialised");
}

std::unique_ptr<CensoringModel> censoring_from_json(const json& j) {
  const auto kind = get<std::string>(j, "kind");
  const double eps = get<double>(j, "epsilon");
  if (kind == "censoring-marginal") return std::make_unique<MarginalCensoring>(curve_from(field(j, "curve")), eps);
  if (kind == "censoring-lognormal")
    return std::make_unique<LognormalCensoring>(eps, get<std::size_t>(j, "intervals"));
  if (kind == "censoring-tree") {
    std::vector<CensoringTree::Node> nodes;
    for (const auto& n : array_field(j, "nodes")) {
      CensoringTree::Node node;
      node.variable = get<int>(n, "variable");
      node.threshold = get<double>(n, "threshold");
      node.left = get<int>(n, "left");
      node.right = get<int>(n, "right");
      node.curve = get<int>(n, "curve");
      node.count = get<std::size_t>(n, "count");
      nodes.push_back(node);
    }
    std::vector<HazardCurve> curves;
    for (const auto& c : array_field(j, "curves")) curves.push_back(curve_from(c));
    return std::make_unique<CensoringTree>(std::move(nodes), std::move(curves), eps);
  }
  throw SchemaError("unknown censoring model kind '" + kind + "'");
}

json to_json(const FineGrayParams& params) {
  return {{"p", params.p}, {"beta1", params.beta1}, {"beta2", params.beta2}};
}

FineGrayParams fg_params_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("Fine-Gray parameters must be a JSON object");
  FineGrayParams p;
  p.p = get_or<double>(j, "p", p.p);
  p.beta1 = get_or<std::array<double, 6>>(j, "beta1", p.beta1);
  p.beta2 = get_or<std::array<double, 6>>(j, "beta2", p.beta2);
  if (!(p.p > 0.0 && p.p < 1.0)) throw ParameterError("p must lie in (0,1)");
  return p;
}

json to_json(const SimConfig& c) {
  return {{"n", c.n},
          {"p_dim", c.p_dim},
          {"correlation", to_string(c.correlation)},
          {"rho", c.rho},
          {"fg", to_json(c.fg)},
          {"censoring", to_string(c.censoring)},
          {"uniform_a", c.uniform_a},
          {"uniform_b", c.uniform_b},
          {"seed", c.seed}};
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.n = get_or<std::size_t>(j, "n", c.n);
  c.p_dim = get_or<int>(j, "p_dim", c.p_dim);
  c.correlation = parse_correlation(get_or<std::string>(j, "correlation", to_string(c.correlation)));
  c.rho = get_or<double>(j, "rho", c.rho);
  if (j.contains("fg")) c.fg = fg_params_from_json(field(j, "fg"));
  c.censoring = parse_censoring_mode(get_or<std::string>(j, "censoring", to_string(c.censoring)));
  c.uniform_a = get_or<double>(j, "uniform_a", c.uniform_a);
  c.uniform_b = get_or<double>(j, "uniform_b", c.uniform_b);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

json read_json(std::istream& in) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_json(in);
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump() << '\n';
}

void write_curves_csv(std::ostream& out, const Matrix& values, const TimeGrid& grid, int cause,
                      const std::string& value_column) {
  if (static_cast<std::size_t>(values.cols()) != grid.size()) throw ConfigError("curve matrix does not match the grid");
  out << "row,cause,time," << value_column << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      out << i << ',' << cause << ',' << grid.times()[j] << ',' << values(i, static_cast<Eigen::Index>(j)) << '\n';
}

CurveTable read_curves_csv(std::istream& in, int cause, const std::string& value_column) {
  std::vector<std::string> header;
  const Matrix m = read_matrix_csv(in, &header);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<Eigen::Index>(it - header.begin());
  };
  const auto c_row = column("row"), c_cause = column("cause"), c_time = column("time"), c_val = column(value_column);
  std::map<long, std::map<double, double>> cells;
  std::vector<double> times;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (static_cast<int>(m(i, c_cause)) != cause) continue;
    const double r = m(i, c_row);
    if (r < 0 || r != std::floor(r)) throw ParseError("row " + std::to_string(i + 1) + ": invalid row id");
    cells[static_cast<long>(r)][m(i, c_time)] = m(i, c_val);
    times.push_back(m(i, c_time));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  CurveTable out;
  out.times = times;
  out.values = Matrix(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(times.size()));
  Eigen::Index i = 0;
  for (const auto& [id, row] : cells) {
    if (id != i) throw SchemaError("curve rows must be numbered 0..n-1");
    if (row.size() != times.size()) throw SchemaError("curve row " + std::to_string(id) + " is incomplete");
    Eigen::Index j = 0;
    for (const auto& [t, v] : row) out.values(i, j++) = v;
    ++i;
  }
  return out;
}

}  // namespace ciftree
