#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <sstream>

#include "ciftree/censoring.hpp"
#include "ciftree/errors.hpp"
#include "ciftree/evaluation.hpp"
#include "ciftree/forest.hpp"
#include "ciftree/imputation.hpp"
#include "ciftree/io.hpp"
#include "ciftree/simulation.hpp"

namespace py = pybind11;
using namespace ciftree;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Dataset make_dataset(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const RowMatrix& x) {
  if (time.size() != status.size() || time.size() != x.rows())
    throw ParameterError("time, status and covariates must have the same number of rows");
  std::vector<ObservedRecord> rs(static_cast<std::size_t>(time.size()));
  for (Eigen::Index i = 0; i < time.size(); ++i) {
    auto& r = rs[static_cast<std::size_t>(i)];
    r.time = time(i);
    r.cause = status(i);
    r.event = status(i) != 0;
    r.covariates.assign(x.row(i).data(), x.row(i).data() + x.cols());
  }
  return Dataset(std::move(rs));
}

FineGrayParams fg_from(const py::object& fg) {
  if (fg.is_none()) return {};
  return fg_params_from_json(json::parse(py::str(py::module_::import("json").attr("dumps")(fg)).cast<std::string>()));
}

struct Nuisance {
  std::unique_ptr<CensoringModel> G;
  std::unique_ptr<CifModel> psi;
};

Nuisance nuisance_for(const Dataset& d, const TimeGrid& grid, ImputationMethod method, const std::string& censoring,
                      const std::string& nuisance, double epsilon, std::size_t min_node, const py::object& fg,
                      const ForestParams& params) {
  Nuisance n;
  if (method != ImputationMethod::bj) {
    if (censoring == "tree") n.G = std::make_unique<CensoringTree>(fit_censoring_tree(d, min_node, epsilon));
    else if (censoring == "km") n.G = std::make_unique<MarginalCensoring>(fit_reverse_km(d, epsilon));
    else throw ConfigError("censoring must be 'km' or 'tree'");
  }
  if (method != ImputationMethod::ipcw) {
    if (nuisance == "aj") n.psi = std::make_unique<AalenJohansen>(fit_aalen_johansen(d));
    else if (nuisance == "fg-true") n.psi = std::make_unique<ParametricFineGray>(fg_from(fg));
    else if (nuisance == "iterated") n.psi = std::make_unique<ForestCif>(fit_iterated_nuisance(d, grid, params));
    else throw ConfigError("nuisance must be 'aj', 'fg-true' or 'iterated'");
  }
  return n;
}

ForestParams forest_params(std::size_t trees, std::size_t nodesize, int mtry, std::uint64_t seed, unsigned threads) {
  ForestParams p;
  p.trees = trees;
  p.nodesize = nodesize;
  p.mtry = mtry;
  p.seed = seed;
  p.threads = threads;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Competing-risks CIF forests with IPCW, Buckley-James and doubly robust Brier losses";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  m.def(
      "simulate",
      [](std::size_t n, std::uint64_t seed, int p, const std::string& correlation, double rho,
         const std::string& censoring, double uniform_a, double uniform_b, const py::object& fg) {
        SimConfig c;
        c.n = n;
        c.seed = seed;
        c.p_dim = p;
        c.correlation = parse_correlation(correlation);
        c.rho = rho;
        c.censoring = parse_censoring_mode(censoring);
        c.uniform_a = uniform_a;
        c.uniform_b = uniform_b;
        c.fg = fg_from(fg);
        const auto s = simulate_dataset(c);
        Eigen::VectorXd time(static_cast<Eigen::Index>(n));
        Eigen::VectorXi status(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
          time(static_cast<Eigen::Index>(i)) = s.data[i].time;
          status(static_cast<Eigen::Index>(i)) = s.data[i].cause;
        }
        py::dict out;
        out["time"] = time;
        out["status"] = status;
        out["covariates"] = RowMatrix(s.data.covariates());
        out["event_time"] = s.event_times;
        out["event_cause"] = s.event_causes;
        out["censor_time"] = s.censor_times;
        return out;
      },
      py::arg("n") = 250, py::arg("seed") = 1, py::arg("p") = 20, py::arg("correlation") = "independent",
      py::arg("rho") = 0.75, py::arg("censoring") = "lognormal", py::arg("uniform_a") = 0.0,
      py::arg("uniform_b") = 50.0, py::arg("fg") = py::none());

  m.def(
      "oracle_cif",
      [](const RowMatrix& x, const std::vector<double>& times, int cause, const py::object& fg) {
        const ParametricFineGray oracle(fg_from(fg));
        RowMatrix out(x.rows(), static_cast<Eigen::Index>(times.size()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const std::span<const double> w(x.row(i).data(), static_cast<std::size_t>(x.cols()));
          const auto c = oracle.at(w);
          for (std::size_t j = 0; j < times.size(); ++j) out(i, static_cast<Eigen::Index>(j)) = c->cif(cause, times[j]);
        }
        return out;
      },
      py::arg("covariates"), py::arg("times"), py::arg("cause") = 1, py::arg("fg") = py::none());

  m.def(
      "event_quantiles",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& status, const std::vector<double>& probs) {
        const auto d = make_dataset(time, status, RowMatrix::Zero(time.size(), 1));
        return marginal_event_quantiles(d, probs);
      },
      py::arg("time"), py::arg("status"), py::arg("probs"));

  m.def(
      "impute",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& status, const RowMatrix& x,
         const std::vector<double>& times, const std::string& method, int cause, const std::string& censoring,
         const std::string& nuisance, double epsilon, std::size_t min_node, const py::object& fg,
         std::optional<std::vector<double>> xi) {
        const auto d = make_dataset(time, status, x);
        const auto grid = TimeGrid::equal_weights(times);
        const auto mth = parse_imputation_method(method);
        const auto n = nuisance_for(d, grid, mth, censoring, nuisance, epsilon, min_node, fg, ForestParams{});
        const auto H = build_imputed_matrix(d, grid, n.G.get(), n.psi.get(), cause, mth,
                                            xi ? std::span<const double>(*xi) : std::span<const double>());
        py::dict out;
        out["values"] = RowMatrix(H.values);
        out["ts1"] = RowMatrix(H.ts1);
        out["ts2"] = RowMatrix(H.ts2);
        out["normaliser"] = Eigen::VectorXd(H.normaliser);
        out["survivor_clamped"] = H.diagnostics.survivor_clamped;
        out["row_clamped"] = std::vector<bool>(H.diagnostics.row_clamped.begin(), H.diagnostics.row_clamped.end());
        return out;
      },
      py::arg("time"), py::arg("status"), py::arg("covariates"), py::arg("times"), py::arg("method") = "dr",
      py::arg("cause") = 1, py::arg("censoring") = "km", py::arg("nuisance") = "aj",
      py::arg("epsilon") = kDefaultEpsilon, py::arg("min_node") = 30, py::arg("fg") = py::none(),
      py::arg("xi") = py::none());

  py::class_<ForestModel>(m, "Forest")
      .def("predict",
           [](const ForestModel& f, const RowMatrix& x, bool clamp) { return RowMatrix(f.predict(x, clamp)); },
           py::arg("covariates"), py::arg("clamp") = true)
      .def_property_readonly("times", [](const ForestModel& f) { return f.grid().times(); })
      .def_property_readonly("cause", &ForestModel::cause)
      .def_property_readonly("method", [](const ForestModel& f) { return to_string(f.method()); })
      .def_property_readonly("n_trees", [](const ForestModel& f) { return f.trees().size(); })
      .def("to_json", [](const ForestModel& f) { return to_json(f).dump(); })
      .def_static("from_json", [](const std::string& s) {
        std::istringstream in(s);
        return forest_from_json(read_json(in));
      });

  m.def(
      "fit",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& status, const RowMatrix& x,
         const std::vector<double>& times, const std::string& method, int cause, const std::string& censoring,
         const std::string& nuisance, double epsilon, std::size_t min_node, const py::object& fg,
         std::size_t trees, std::size_t replicates, std::size_t nodesize, int mtry, std::uint64_t seed,
         unsigned threads) {
        const auto d = make_dataset(time, status, x);
        const auto grid = TimeGrid::equal_weights(times);
        const auto mth = parse_imputation_method(method);
        const auto params = forest_params(trees, nodesize, mtry, seed, threads);
        const auto n = nuisance_for(d, grid, mth, censoring, nuisance, epsilon, min_node, fg, params);
        py::gil_scoped_release release;
        if (mth == ImputationMethod::dr_xi) {
          M1Options opt;
          opt.replicates = replicates;
          return fit_m1(d, grid, cause, *n.G, *n.psi, opt, params);
        }
        return fit_m0(d, grid, cause, mth, n.G.get(), n.psi.get(), params);
      },
      py::arg("time"), py::arg("status"), py::arg("covariates"), py::arg("times"), py::arg("method") = "dr",
      py::arg("cause") = 1, py::arg("censoring") = "km", py::arg("nuisance") = "aj",
      py::arg("epsilon") = kDefaultEpsilon, py::arg("min_node") = 30, py::arg("fg") = py::none(),
      py::arg("trees") = 500, py::arg("replicates") = 1, py::arg("nodesize") = 20, py::arg("mtry") = 0,
      py::arg("seed") = 1, py::arg("threads") = 0);

  m.def(
      "tune",
      [](const Eigen::VectorXd& time, const Eigen::VectorXi& status, const RowMatrix& x,
         const std::vector<double>& times, const std::string& method, int cause, std::vector<std::size_t> nodesizes,
         std::vector<int> mtrys, std::size_t trees, std::uint64_t seed) {
        const auto d = make_dataset(time, status, x);
        const auto grid = TimeGrid::equal_weights(times);
        const auto mth = parse_imputation_method(method);
        const auto params = forest_params(trees, 20, 0, seed, 0);
        const auto n = nuisance_for(d, grid, mth, "km", "aj", kDefaultEpsilon, 30, py::none(), params);
        const auto r = tune(d, grid, cause, mth, n.G.get(), n.psi.get(), nodesizes, mtrys, params);
        py::list table;
        for (const auto& row : r.table) table.append(py::make_tuple(row.nodesize, row.mtry, row.oob));
        py::dict out;
        out["nodesize"] = r.nodesize;
        out["mtry"] = r.mtry;
        out["oob"] = r.oob;
        out["table"] = table;
        return out;
      },
      py::arg("time"), py::arg("status"), py::arg("covariates"), py::arg("times"), py::arg("method") = "dr",
      py::arg("cause") = 1, py::arg("nodesize_grid") = std::vector<std::size_t>{10, 20, 50},
      py::arg("mtry_grid") = std::vector<int>{2, 4, 8}, py::arg("trees") = 200, py::arg("seed") = 1);

  m.def(
      "partial_dependence",
      [](const ForestModel& f, const RowMatrix& x, int variable, const std::vector<double>& values,
         std::size_t time_index) {
        std::vector<std::pair<double, double>> out;
        for (const auto& p : partial_dependence(f, x, variable, values, time_index)) out.emplace_back(p.value, p.estimate);
        return out;
      },
      py::arg("forest"), py::arg("covariates"), py::arg("variable"), py::arg("values"), py::arg("time_index"));

  m.def(
      "mse_vs_truth",
      [](const ForestModel& f, const RowMatrix& x, const py::object& fg) {
        const ParametricFineGray oracle(fg_from(fg));
        return mse_vs_truth(f, x, oracle, f.cause(), f.grid());
      },
      py::arg("forest"), py::arg("covariates"), py::arg("fg") = py::none());
}
