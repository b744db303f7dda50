#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/data.hpp"
#include "ciftree/imputation.hpp"
#include "ciftree/nuisance.hpp"
#include "ciftree/tree.hpp"

namespace ciftree {

struct ForestParams {
  std::size_t trees = 500;    // B, trees per replicate
  std::size_t nodesize = 20;
  int mtry = 0;               // 0 = floor(sqrt(p))
  std::uint64_t seed = 0;
  bool bootstrap = true;      // false: every tree sees each row once
  unsigned threads = 0;
};

/// floor(sqrt(p)), at least 1.
int default_mtry(int p);

struct ForestMeta {
  std::size_t replicates = 1;  // R
  std::size_t trees_per_replicate = 0;
  std::size_t nodesize = 0;
  int mtry = 0;
  std::uint64_t seed = 0;
  std::string nuisance;
  std::string censoring;
};

/// Bootstrap ensemble of regression trees over a shared time grid. The
/// prediction is the equal-weight mean of all trees.
class ForestModel {
 public:
  ForestModel(std::vector<TreeModel> trees, TimeGrid grid, int cause, ImputationMethod method, ForestMeta meta,
              std::vector<std::vector<std::uint32_t>> inbag = {}, std::size_t training_rows = 0);

  std::vector<double> predict(std::span<const double> w, bool clamp = false) const;
  Matrix predict(const Matrix& covariates, bool clamp = false) const;

  const std::vector<TreeModel>& trees() const { return trees_; }
  const TimeGrid& grid() const { return grid_; }
  int cause() const { return cause_; }
  ImputationMethod method() const { return method_; }
  const ForestMeta& meta() const { return meta_; }
  /// Bootstrap multiset (row indices) of each tree; empty when not retained.
  const std::vector<std::vector<std::uint32_t>>& inbag() const { return inbag_; }
  std::size_t training_rows() const { return training_rows_; }

 private:
  std::vector<TreeModel> trees_;
  TimeGrid grid_;
  int cause_;
  ImputationMethod method_;
  ForestMeta meta_;
  std::vector<std::vector<std::uint32_t>> inbag_;
  std::size_t training_rows_;
};

/// Grows params.trees trees on (responses, covariates) for replicate r.
/// Tree b of replicate r draws its bootstrap sample and node streams from
/// derive_seed(seed, {replicate, r, ...}), so replicate 0 of M1 coincides
/// with M0 under the same seed.
std::vector<TreeModel> grow_ensemble(const Matrix& responses, const Matrix& covariates, const TimeGrid& grid,
                                     const ForestParams& params, std::uint64_t replicate,
                                     std::vector<std::vector<std::uint32_t>>* inbag = nullptr);

/// Forest on already-computed responses (e.g. full-data indicators).
ForestModel fit_forest(const Matrix& responses, const Matrix& covariates, const TimeGrid& grid, int cause,
                       ImputationMethod method, const ForestParams& params);

/// Impute once, then grow a multivariate forest on H.
ForestModel fit_m0(const Dataset& data, const TimeGrid& grid, int cause, ImputationMethod method,
                   const CensoringModel* G, const CifModel* psi, const ForestParams& params,
                   ImputedMatrix* imputed = nullptr);

struct M1Options {
  std::size_t replicates = 1;  // R
  bool zero_xi = false;        // test hook: xi == 0
};

/// xi draws for replicate r (one standard normal per subject).
std::vector<double> xi_draws(std::uint64_t seed, std::uint64_t replicate, std::size_t n);

/// For each replicate, draw xi ~ N(0,1) per subject, build the
/// xi-randomised DR responses and grow B trees; predict with all R*B trees.
ForestModel fit_m1(const Dataset& data, const TimeGrid& grid, int cause, const CensoringModel& G,
                   const CifModel& psi, const M1Options& options, const ForestParams& params,
                   std::vector<ImputedMatrix>* imputed = nullptr);

struct OobSummary {
  double error = 0.0;
  std::size_t rows_used = 0;
  std::size_t rows_skipped = 0;  // never out of bag
};

/// Out-of-bag weighted squared error against `responses` (rows = training
/// rows); grid weights normalised to sum to one.
OobSummary oob_summary(const ForestModel& model, const Matrix& covariates, const Matrix& responses);
double oob_error(const ForestModel& model, const Matrix& covariates, const ImputedMatrix& imputed);

struct TuneRow {
  std::size_t nodesize;
  int mtry;
  double oob;
};

struct TuneResult {
  std::size_t nodesize = 0;
  int mtry = 0;
  double oob = 0.0;
  std::vector<TuneRow> table;
};

/// Grid search over (nodesize, mtry) by OOB error with a shared seed. dr_xi
/// tunes on replicate 0 (R = 1). Ties favour larger nodesize, then smaller
/// mtry.
TuneResult tune(const Dataset& data, const TimeGrid& grid, int cause, ImputationMethod method,
                const CensoringModel* G, const CifModel* psi, std::span<const std::size_t> nodesize_grid,
                std::span<const int> mtry_grid, const ForestParams& base);

/// CIF nuisance backed by one forest per cause, piecewise constant between
/// grid times; P(T >= u) comes from the marginal Kaplan-Meier curve.
class ForestCif final : public CifModel {
 public:
  ForestCif(std::vector<ForestModel> forests, AalenJohansen survival_source);

  int causes() const override { return static_cast<int>(forests_.size()); }
  std::string kind() const override { return "forest"; }
  std::unique_ptr<const CifCurves> at(std::span<const double> w) const override;

  const std::vector<ForestModel>& forests() const { return forests_; }
  const AalenJohansen& survival_source() const { return survival_; }

 private:
  std::vector<ForestModel> forests_;
  AalenJohansen survival_;
};

/// Grid used by the iterated nuisance: deciles of uncensored follow-up
/// merged with `target` times.
TimeGrid nuisance_grid(const Dataset& data, const TimeGrid& target);

/// First-pass BJ forests (marginal Aalen-Johansen nuisance) for every cause.
ForestCif fit_iterated_nuisance(const Dataset& data, const TimeGrid& grid, const ForestParams& params);

}  // namespace ciftree
