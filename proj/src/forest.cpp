#include "ciftree/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ciftree/errors.hpp"
#include "ciftree/parallel.hpp"
#include "ciftree/random.hpp"

namespace ciftree {

int default_mtry(int p) { return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))))); }

ForestModel::ForestModel(std::vector<TreeModel> trees, TimeGrid grid, int cause, ImputationMethod method,
                         ForestMeta meta, std::vector<std::vector<std::uint32_t>> inbag, std::size_t training_rows)
    : trees_(std::move(trees)),
      grid_(std::move(grid)),
      cause_(cause),
      method_(method),
      meta_(std::move(meta)),
      inbag_(std::move(inbag)),
      training_rows_(training_rows) {
  if (trees_.empty()) throw ParameterError("forest has no trees");
  for (const auto& t : trees_)
    if (t.dimension() != grid_.size()) throw ParameterError("tree dimension does not match the time grid");
  if (!inbag_.empty() && inbag_.size() != trees_.size()) throw ParameterError("in-bag record count mismatch");
}

std::vector<double> ForestModel::predict(std::span<const double> w, bool clamp) const {
  std::vector<double> sum(grid_.size(), 0.0);
  for (const auto& tree : trees_) {
    const auto leaf = tree.predict(w);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += leaf[j];
  }
  for (auto& v : sum) {
    v /= static_cast<double>(trees_.size());
    if (clamp) v = std::clamp(v, 0.0, 1.0);
  }
  return sum;
}

Matrix ForestModel::predict(const Matrix& covariates, bool clamp) const {
  Matrix out(covariates.rows(), static_cast<Eigen::Index>(grid_.size()));
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    const auto p = predict(std::span<const double>(covariates.row(i).data(), static_cast<std::size_t>(covariates.cols())), clamp);
    for (std::size_t j = 0; j < p.size(); ++j) out(i, static_cast<Eigen::Index>(j)) = p[j];
  }
  return out;
}

std::vector<TreeModel> grow_ensemble(const Matrix& responses, const Matrix& covariates, const TimeGrid& grid,
                                     const ForestParams& params, std::uint64_t replicate,
                                     std::vector<std::vector<std::uint32_t>>* inbag) {
  if (params.trees < 1) throw ParameterError("a forest needs at least one tree (B >= 1)");
  const auto n = static_cast<std::size_t>(responses.rows());
  const int mtry = params.mtry > 0 ? params.mtry : default_mtry(static_cast<int>(covariates.cols()));
  std::vector<std::optional<TreeModel>> trees(params.trees);
  std::vector<std::vector<std::uint32_t>> samples(params.trees);
  parallel_for(params.trees, params.threads, [&](std::size_t b) {
    const auto tb = static_cast<std::uint64_t>(b);
    auto& rows = samples[b];
    rows.resize(n);
    if (params.bootstrap) {
      Rng rng(derive_seed(params.seed, {stream::kReplicate, replicate, stream::kBootstrap, tb}));
      std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
      for (auto& r : rows) r = pick(rng);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    TreeParams tp{params.nodesize, mtry, derive_seed(params.seed, {stream::kReplicate, replicate, stream::kTree, tb})};
    trees[b].emplace(grow_tree(responses, covariates, grid.weights(), tp, idx));
  });
  std::vector<TreeModel> out;
  out.reserve(trees.size());
  for (auto& t : trees) out.push_back(std::move(*t));
  if (inbag) {
    for (auto& s : samples) inbag->push_back(std::move(s));
  }
  return out;
}

namespace {

ForestMeta make_meta(const ForestParams& params, int p, std::size_t replicates) {
  ForestMeta meta;
  meta.replicates = replicates;
  meta.trees_per_replicate = params.trees;
  meta.nodesize = params.nodesize;
  meta.mtry = params.mtry > 0 ? params.mtry : default_mtry(p);
  meta.seed = params.seed;
  return meta;
}

std::string describe(const CensoringModel* G) { return G ? G->kind() : "none"; }
std::string describe(const CifModel* psi) { return psi ? psi->kind() : "none"; }

}  // namespace

ForestModel fit_forest(const Matrix& responses, const Matrix& covariates, const TimeGrid& grid, int cause,
                       ImputationMethod method, const ForestParams& params) {
  std::vector<std::vector<std::uint32_t>> inbag;
  auto trees = grow_ensemble(responses, covariates, grid, params, 0, &inbag);
  return ForestModel(std::move(trees), grid, cause, method, make_meta(params, static_cast<int>(covariates.cols()), 1),
                     std::move(inbag), static_cast<std::size_t>(responses.rows()));
}

ForestModel fit_m0(const Dataset& data, const TimeGrid& grid, int cause, ImputationMethod method,
                   const CensoringModel* G, const CifModel* psi, const ForestParams& params, ImputedMatrix* imputed) {
  if (method == ImputationMethod::dr_xi) throw ConfigError("dr-xi responses are fitted with fit_m1");
  ImputationOptions opts;
  opts.threads = params.threads;
  auto H = build_imputed_matrix(data, grid, G, psi, cause, method, {}, opts);
  std::vector<std::vector<std::uint32_t>> inbag;
  auto trees = grow_ensemble(H.values, data.covariates(), grid, params, 0, &inbag);
  auto meta = make_meta(params, data.dim(), 1);
  meta.censoring = method == ImputationMethod::bj ? "none" : describe(G);
  meta.nuisance = method == ImputationMethod::ipcw ? "none" : describe(psi);
  ForestModel model(std::move(trees), grid, cause, method, std::move(meta), std::move(inbag), data.size());
  if (imputed) *imputed = std::move(H);
  return model;
}

std::vector<double> xi_draws(std::uint64_t seed, std::uint64_t replicate, std::size_t n) {
  Rng rng(derive_seed(seed, {stream::kXi, replicate}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xi(n);
  for (auto& x : xi) x = normal(rng);
  return xi;
}

ForestModel fit_m1(const Dataset& data, const TimeGrid& grid, int cause, const CensoringModel& G,
                   const CifModel& psi, const M1Options& options, const ForestParams& params,
                   std::vector<ImputedMatrix>* imputed) {
  if (options.replicates < 1) throw ParameterError("M1 needs at least one replicate (R >= 1)");
  ImputationOptions opts;
  opts.threads = params.threads;
  std::vector<TreeModel> trees;
  std::vector<std::vector<std::uint32_t>> inbag;
  for (std::size_t r = 0; r < options.replicates; ++r) {
    auto xi = options.zero_xi ? std::vector<double>(data.size(), 0.0) : xi_draws(params.seed, r, data.size());
    auto H = build_imputed_matrix(data, grid, &G, &psi, cause, ImputationMethod::dr_xi, xi, opts);
    auto rep = grow_ensemble(H.values, data.covariates(), grid, params, r, &inbag);
    std::move(rep.begin(), rep.end(), std::back_inserter(trees));
    if (imputed) imputed->push_back(std::move(H));
  }
  auto meta = make_meta(params, data.dim(), options.replicates);
  meta.censoring = G.kind();
  meta.nuisance = psi.kind();
  return ForestModel(std::move(trees), grid, cause, ImputationMethod::dr_xi, std::move(meta), std::move(inbag),
                     data.size());
}

OobSummary oob_summary(const ForestModel& model, const Matrix& covariates, const Matrix& responses) {
  const auto& inbag = model.inbag();
  if (inbag.empty()) throw EstimationError("forest does not retain in-bag records");
  const auto n = static_cast<std::size_t>(responses.rows());
  const std::size_t J = model.grid().size();
  if (static_cast<std::size_t>(responses.cols()) != J) throw ConfigError("response dimension does not match forest grid");
  if (static_cast<std::size_t>(covariates.rows()) != n) throw ConfigError("covariate rows do not match responses");
  std::vector<double> weights = model.grid().weights();
  double total = 0.0;
  for (double w : weights) total += w;
  for (auto& w : weights) w /= total;

  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(J));
  std::vector<std::size_t> counts(n, 0);
  std::vector<char> in(n);
  const auto& trees = model.trees();
  for (std::size_t b = 0; b < trees.size(); ++b) {
    std::fill(in.begin(), in.end(), 0);
    for (auto r : inbag[b]) {
      if (r >= n) throw ConfigError("in-bag row outside the response matrix");
      in[r] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i]) continue;
      const auto row = covariates.row(static_cast<Eigen::Index>(i));
      const auto leaf = trees[b].predict(std::span<const double>(row.data(), static_cast<std::size_t>(covariates.cols())));
      for (std::size_t j = 0; j < J; ++j) sums(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += leaf[j];
      ++counts[i];
    }
  }
  OobSummary out;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] == 0) {
      ++out.rows_skipped;
      continue;
    }
    double e = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double d = sums(ii, jj) / static_cast<double>(counts[i]) - responses(ii, jj);
      e += weights[j] * d * d;
    }
    acc += e;
    ++out.rows_used;
  }
  if (out.rows_used > 0) out.error = acc / static_cast<double>(out.rows_used);
  return out;
}

double oob_error(const ForestModel& model, const Matrix& covariates, const ImputedMatrix& imputed) {
  const auto s = oob_summary(model, covariates, imputed.values);
  if (s.rows_used == 0) throw EstimationError("no out-of-bag rows; increase the number of trees");
  return s.error;
}

TuneResult tune(const Dataset& data, const TimeGrid& grid, int cause, ImputationMethod method,
                const CensoringModel* G, const CifModel* psi, std::span<const std::size_t> nodesize_grid,
                std::span<const int> mtry_grid, const ForestParams& base) {
  if (nodesize_grid.empty() || mtry_grid.empty()) throw ParameterError("tuning grids must be non-empty");
  if (!base.bootstrap) throw ParameterError("tuning by OOB error needs bootstrap sampling");
  ImputationOptions opts;
  opts.threads = base.threads;
  std::vector<double> xi;
  if (method == ImputationMethod::dr_xi) xi = xi_draws(base.seed, 0, data.size());
  const auto H = build_imputed_matrix(data, grid, G, psi, cause, method, xi, opts);
  TuneResult result;
  bool have = false;
  for (auto nodesize : nodesize_grid) {
    for (int mtry : mtry_grid) {
      if (mtry < 1 || mtry > data.dim()) throw ParameterError("mtry must lie in [1, p]");
      ForestParams params = base;
      params.nodesize = nodesize;
      params.mtry = mtry;
      std::vector<std::vector<std::uint32_t>> inbag;
      auto trees = grow_ensemble(H.values, data.covariates(), grid, params, 0, &inbag);
      ForestModel model(std::move(trees), grid, cause, method, make_meta(params, data.dim(), 1), std::move(inbag),
                        data.size());
      const double err = oob_error(model, data.covariates(), H);
      result.table.push_back({nodesize, mtry, err});
      const double tol = 1e-12 * std::max(1.0, std::abs(err));
      bool better = !have || err < result.oob - tol;
      if (have && !better && std::abs(err - result.oob) <= tol)
        better = nodesize > result.nodesize || (nodesize == result.nodesize && mtry < result.mtry);
      if (better) {
        result.nodesize = nodesize;
        result.mtry = mtry;
        result.oob = err;
        have = true;
      }
    }
  }
  return result;
}

namespace {

class ForestCifCurves final : public CifCurves {
 public:
  ForestCifCurves(const ForestCif& owner, std::vector<std::vector<double>> values)
      : owner_(owner), values_(std::move(values)) {}

  int causes() const override { return static_cast<int>(values_.size()); }

  double cif(int m, double t) const override {
    const auto& times = grid(m);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values_[m - 1][static_cast<std::size_t>(it - times.begin()) - 1];
  }

  double cif_left(int m, double t) const override {
    const auto& times = grid(m);
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values_[m - 1][static_cast<std::size_t>(it - times.begin()) - 1];
  }

  double survival_left(double t) const override { return owner_.survival_source().survival_left(t); }

 private:
  const std::vector<double>& grid(int m) const {
    if (m < 1 || m > causes()) throw ParameterError("cause index out of range");
    return owner_.forests()[m - 1].grid().times();
  }

  const ForestCif& owner_;
  std::vector<std::vector<double>> values_;
};

}  // namespace

ForestCif::ForestCif(std::vector<ForestModel> forests, AalenJohansen survival_source)
    : forests_(std::move(forests)), survival_(std::move(survival_source)) {
  if (forests_.empty()) throw ParameterError("forest nuisance needs one forest per cause");
  for (std::size_t k = 0; k < forests_.size(); ++k)
    if (forests_[k].cause() != static_cast<int>(k + 1)) throw ParameterError("forest nuisance causes out of order");
}

std::unique_ptr<const CifCurves> ForestCif::at(std::span<const double> w) const {
  std::vector<std::vector<double>> values;
  values.reserve(forests_.size());
  for (const auto& f : forests_) values.push_back(f.predict(w, true));
  return std::make_unique<ForestCifCurves>(*this, std::move(values));
}

TimeGrid nuisance_grid(const Dataset& data, const TimeGrid& target) {
  std::vector<double> events;
  for (const auto& r : data.records())
    if (r.event) events.push_back(r.time);
  std::vector<double> times = target.times();
  if (!events.empty()) {
    const std::vector<double> probs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    for (double q : empirical_quantiles(events, probs))
      if (q > 0.0) times.push_back(q);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return TimeGrid::equal_weights(times);
}

ForestCif fit_iterated_nuisance(const Dataset& data, const TimeGrid& grid, const ForestParams& params) {
  auto aj = fit_aalen_johansen(data);
  const auto ngrid = nuisance_grid(data, grid);
  std::vector<ForestModel> forests;
  for (int k = 1; k <= data.causes(); ++k) {
    ForestParams p = params;
    p.seed = derive_seed(params.seed, {stream::kNuisance, static_cast<std::uint64_t>(k)});
    forests.push_back(fit_m0(data, ngrid, k, ImputationMethod::bj, nullptr, &aj, p));
  }
  return ForestCif(std::move(forests), std::move(aj));
}

}  // namespace ciftree
