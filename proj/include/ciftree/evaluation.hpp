#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ciftree/data.hpp"
#include "ciftree/forest.hpp"
#include "ciftree/nuisance.hpp"

namespace ciftree {

/// Per-time mean squared error of forest predictions against a known CIF.
/// Predictions are clamped to [0,1] unless `raw` is set.
std::vector<double> mse_vs_truth(const ForestModel& model, const Matrix& test_w, const CifModel& oracle, int cause,
                                 const TimeGrid& grid, bool raw = false);

/// Same metric for an arbitrary predictor returning one value per grid time.
using CifPredictor = std::function<std::vector<double>(std::span<const double>)>;
std::vector<double> mse_vs_truth(const CifPredictor& predict, const Matrix& test_w, const CifModel& oracle, int cause,
                                 const TimeGrid& grid);

/// Same metric against a precomputed truth matrix (rows = test points).
std::vector<double> mse_vs_matrix(const Matrix& predictions, const Matrix& truth);

struct PdpPoint {
  double value = 0.0;
  double estimate = 0.0;
};

/// Averages the forest prediction over `covariates` with column `variable`
/// set to each value in turn; reports grid coordinate `time_index`.
std::vector<PdpPoint> partial_dependence(const ForestModel& model, const Matrix& covariates, int variable,
                                         std::span<const double> values, std::size_t time_index, bool clamp = true);

/// Rows = grid times, columns = levels.
struct PdpTable {
  std::vector<double> times;
  std::vector<double> levels;
  Matrix values;
};

PdpTable pdp_table_categorical(const ForestModel& model, const Matrix& covariates, int variable,
                               std::span<const double> levels, bool clamp = true);

/// Pointwise PDP difference model_c - model_u. Grids must match.
std::vector<PdpPoint> censored_vs_uncensored_diff(const ForestModel& model_c, const ForestModel& model_u,
                                                  const Matrix& covariates, int variable,
                                                  std::span<const double> values, std::size_t time_index);

struct EvalReport {
  std::vector<std::string> methods;
  std::vector<double> times;
  std::vector<std::vector<double>> mse;  // [method][time]
  std::size_t n_test = 0;
  std::vector<std::string> notes;        // tuning and clamp diagnostics

  void add(std::string method, std::vector<double> values);
  void write_csv(std::ostream& out) const;
};

}  // namespace ciftree
