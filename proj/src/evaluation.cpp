#include "ciftree/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "ciftree/errors.hpp"

namespace ciftree {

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
  return {m.row(i).data(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::vector<double> mse_vs_truth(const CifPredictor& predict, const Matrix& test_w, const CifModel& oracle, int cause,
                                 const TimeGrid& grid) {
  if (test_w.rows() == 0) throw ParameterError("test covariates are empty");
  const std::size_t J = grid.size();
  std::vector<double> acc(J, 0.0);
  for (Eigen::Index i = 0; i < test_w.rows(); ++i) {
    const auto w = row_span(test_w, i);
    const auto pred = predict(w);
    if (pred.size() != J) throw ConfigError("prediction length does not match the time grid");
    const auto truth = oracle.at(w);
    for (std::size_t j = 0; j < J; ++j) {
      const double d = pred[j] - truth->cif(cause, grid.times()[j]);
      acc[j] += d * d;
    }
  }
  for (auto& a : acc) a /= static_cast<double>(test_w.rows());
  return acc;
}

std::vector<double> mse_vs_truth(const ForestModel& model, const Matrix& test_w, const CifModel& oracle, int cause,
                                 const TimeGrid& grid, bool raw) {
  if (!(model.grid() == grid)) throw ConfigError("model grid does not match the evaluation grid");
  return mse_vs_truth([&](std::span<const double> w) { return model.predict(w, !raw); }, test_w, oracle, cause, grid);
}

std::vector<double> mse_vs_matrix(const Matrix& predictions, const Matrix& truth) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols())
    throw ConfigError("prediction and truth shapes differ");
  if (truth.rows() == 0) throw ParameterError("test covariates are empty");
  std::vector<double> out(static_cast<std::size_t>(truth.cols()));
  for (Eigen::Index j = 0; j < truth.cols(); ++j)
    out[static_cast<std::size_t>(j)] = (predictions.col(j) - truth.col(j)).squaredNorm() / static_cast<double>(truth.rows());
  return out;
}

std::vector<PdpPoint> partial_dependence(const ForestModel& model, const Matrix& covariates, int variable,
                                         std::span<const double> values, std::size_t time_index, bool clamp) {
  if (values.empty()) throw ParameterError("PDP values are empty");
  if (covariates.rows() == 0) throw ParameterError("PDP needs at least one covariate row");
  if (variable < 0 || variable >= covariates.cols()) throw ParameterError("PDP variable out of range");
  if (time_index >= model.grid().size()) throw ParameterError("PDP time index out of range");
  std::vector<PdpPoint> out;
  std::vector<double> w(static_cast<std::size_t>(covariates.cols()));
  for (double v : values) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      for (Eigen::Index k = 0; k < covariates.cols(); ++k) w[static_cast<std::size_t>(k)] = covariates(i, k);
      w[static_cast<std::size_t>(variable)] = v;
      acc += model.predict(w, clamp)[time_index];
    }
    out.push_back({v, acc / static_cast<double>(covariates.rows())});
  }
  return out;
}

PdpTable pdp_table_categorical(const ForestModel& model, const Matrix& covariates, int variable,
                               std::span<const double> levels, bool clamp) {
  if (levels.empty()) throw ParameterError("PDP levels are empty");
  if (covariates.rows() == 0) throw ParameterError("PDP needs at least one covariate row");
  if (variable < 0 || variable >= covariates.cols()) throw ParameterError("PDP variable out of range");
  PdpTable table;
  table.times = model.grid().times();
  table.levels.assign(levels.begin(), levels.end());
  const auto J = static_cast<Eigen::Index>(table.times.size());
  table.values = Matrix::Zero(J, static_cast<Eigen::Index>(levels.size()));
  std::vector<double> w(static_cast<std::size_t>(covariates.cols()));
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      for (Eigen::Index k = 0; k < covariates.cols(); ++k) w[static_cast<std::size_t>(k)] = covariates(i, k);
      w[static_cast<std::size_t>(variable)] = levels[l];
      const auto p = model.predict(w, clamp);
      for (Eigen::Index j = 0; j < J; ++j) table.values(j, static_cast<Eigen::Index>(l)) += p[static_cast<std::size_t>(j)];
    }
  }
  table.values /= static_cast<double>(covariates.rows());
  return table;
}

std::vector<PdpPoint> censored_vs_uncensored_diff(const ForestModel& model_c, const ForestModel& model_u,
                                                  const Matrix& covariates, int variable,
                                                  std::span<const double> values, std::size_t time_index) {
  if (!(model_c.grid() == model_u.grid())) throw ConfigError("PDP difference needs matching time grids");
  auto a = partial_dependence(model_c, covariates, variable, values, time_index);
  const auto b = partial_dependence(model_u, covariates, variable, values, time_index);
  for (std::size_t k = 0; k < a.size(); ++k) a[k].estimate -= b[k].estimate;
  return a;
}

void EvalReport::add(std::string method, std::vector<double> values) {
  if (values.size() != times.size()) throw ConfigError("report row does not match the time grid");
  methods.push_back(std::move(method));
  mse.push_back(std::move(values));
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "method,time,mse,n_test\n" << std::setprecision(17);
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t j = 0; j < times.size(); ++j)
      out << methods[m] << ',' << times[j] << ',' << mse[m][j] << ',' << n_test << '\n';
}

}  // namespace ciftree
