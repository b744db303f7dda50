#include "ciftree/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "ciftree/errors.hpp"
#include "ciftree/parallel.hpp"

namespace ciftree {

std::string to_string(ImputationMethod method) {
  switch (method) {
    case ImputationMethod::ipcw: return "ipcw";
    case ImputationMethod::bj: return "bj";
    case ImputationMethod::dr: return "dr";
    case ImputationMethod::dr_xi: return "dr-xi";
  }
  return "unknown";
}

ImputationMethod parse_imputation_method(const std::string& name) {
  if (name == "ipcw") return ImputationMethod::ipcw;
  if (name == "bj") return ImputationMethod::bj;
  if (name == "dr") return ImputationMethod::dr;
  if (name == "dr-xi" || name == "dr_xi") return ImputationMethod::dr_xi;
  throw ConfigError("unknown imputation method '" + name + "'");
}

namespace {

struct RowResult {
  std::vector<double> h, ts1, ts2;
  double normaliser = 0.0;
  std::size_t g_evals = 0, g_clamped = 0, y_evals = 0, y_floored = 0;
};

void check_inputs(const CensoringModel* G, const CifModel* psi, ImputationMethod method) {
  const bool needs_g = method != ImputationMethod::bj;
  const bool needs_psi = method != ImputationMethod::ipcw;
  if (needs_g && !G) throw ConfigError("method " + to_string(method) + " requires a censoring model");
  if (needs_psi && !psi) throw ConfigError("method " + to_string(method) + " requires a CIF nuisance model");
}

RowResult impute_row(const ObservedRecord& r, std::span<const double> times, const CensoringModel* G,
                     const CifModel* psi, int m, ImputationMethod method, double xi, double floor) {
  const std::size_t J = times.size();
  RowResult out;
  out.h.assign(J, 0.0);
  out.ts1.assign(J, 0.0);
  out.ts2.assign(J, 0.0);
  std::span<const double> w(r.covariates);
  const double eps = G ? G->epsilon() : 1.0;

  auto clamp_g = [&](double raw) {
    ++out.g_evals;
    if (raw < eps) {
      ++out.g_clamped;
      return eps;
    }
    return raw;
  };

  // Event term.
  double g_left = 1.0;
  if (method != ImputationMethod::bj && r.event) g_left = clamp_g(G->raw_survivor_left(r.time, w));
  for (std::size_t j = 0; j < J; ++j) out.ts1[j] = r.event ? r.incidence(m, times[j]) / g_left : 0.0;
  out.normaliser = r.event ? 1.0 / g_left : 0.0;
  if (method == ImputationMethod::bj) out.normaliser = 1.0;

  if (method == ImputationMethod::ipcw) {
    out.h = out.ts1;
    return out;
  }

  std::unique_ptr<const CifCurves> curves;
  std::vector<double> cif_at_t(J, 0.0);
  auto ensure_curves = [&] {
    if (curves) return;
    curves = psi->at(w);
    for (std::size_t j = 0; j < J; ++j) cif_at_t[j] = curves->cif(m, times[j]);
  };
  // y_m(u; t_j) for all j with u <= t_j, written into ys.
  std::vector<double> ys(J, 0.0);
  auto conditional = [&](double u) {
    ensure_curves();
    std::fill(ys.begin(), ys.end(), 0.0);
    if (u > times[J - 1]) return;
    const double before = curves->cif_left(m, u);
    const double surv = curves->survival_left(u);
    for (std::size_t j = 0; j < J; ++j) {
      if (u > times[j]) continue;
      auto y = incidence_ratio(cif_at_t[j] - before, surv, floor);
      ++out.y_evals;
      if (y.floored) ++out.y_floored;
      ys[j] = y.value;
    }
  };

  if (!r.event) {
    conditional(r.time);
    const double g_right = method == ImputationMethod::bj ? 1.0 : clamp_g(G->raw_survivor_right(r.time, w));
    for (std::size_t j = 0; j < J; ++j) {
      if (method == ImputationMethod::bj) out.ts2[j] = ys[j];
      else if (method == ImputationMethod::dr_xi) out.ts2[j] = xi * ys[j] / g_right;
      else out.ts2[j] = ys[j] / g_right;
    }
    if (method == ImputationMethod::dr) out.normaliser += 1.0 / g_right;
    if (method == ImputationMethod::dr_xi) out.normaliser += xi / g_right;
  }

  if (method == ImputationMethod::dr) {
    const auto path = G->hazard_path(w, r.time);
    std::vector<double> integral(J, 0.0);
    double integral0 = 0.0;
    for (const auto& step : path) {
      if (r.event && !(step.time < r.time)) break;
      if (step.hazard == 0.0) continue;
      const double g = clamp_g(step.survivor);
      integral0 += step.hazard / g;
      if (step.time > times[J - 1]) continue;
      conditional(step.time);
      for (std::size_t j = 0; j < J; ++j) integral[j] += ys[j] * step.hazard / g;
    }
    for (std::size_t j = 0; j < J; ++j) out.ts2[j] -= integral[j];
    out.normaliser -= integral0;
  }

  for (std::size_t j = 0; j < J; ++j) out.h[j] = out.ts1[j] + out.ts2[j];
  return out;
}

void check_cause(int m, int causes) {
  if (m < 1 || m > causes) throw ParameterError("cause " + std::to_string(m) + " outside 1.." + std::to_string(causes));
}

}  // namespace

double ts1_event(const ObservedRecord& record, double t, const CensoringModel& G, int m) {
  double times[] = {t};
  return impute_row(record, times, &G, nullptr, m, ImputationMethod::ipcw, 0.0, kSurvivalFloor).ts1[0];
}

double ts2_augmentation(const ObservedRecord& record, double t, const CensoringModel& G, const CifModel& psi,
                        int m) {
  double times[] = {t};
  return impute_row(record, times, &G, &psi, m, ImputationMethod::dr, 0.0, kSurvivalFloor).ts2[0];
}

double h_value(const ObservedRecord& record, double t, const CensoringModel* G, const CifModel* psi, int m,
               ImputationMethod method, std::optional<double> xi) {
  if (method == ImputationMethod::dr && xi) method = ImputationMethod::dr_xi;
  if (method == ImputationMethod::dr_xi && !xi) throw ConfigError("dr-xi requires a xi value");
  check_inputs(G, psi, method);
  double times[] = {t};
  return impute_row(record, times, G, psi, m, method, xi.value_or(0.0), kSurvivalFloor).h[0];
}

ImputedMatrix build_imputed_matrix(const Dataset& data, const TimeGrid& grid, const CensoringModel* G,
                                   const CifModel* psi, int m, ImputationMethod method,
                                   std::span<const double> xi, const ImputationOptions& options) {
  check_inputs(G, psi, method);
  check_cause(m, data.causes());
  if (method == ImputationMethod::dr_xi && xi.size() != data.size())
    throw ConfigError("dr-xi requires one xi value per subject");

  const std::size_t n = data.size();
  const std::size_t J = grid.size();
  std::vector<RowResult> rows(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const double x = method == ImputationMethod::dr_xi ? xi[i] : 0.0;
    rows[i] = impute_row(data[i], grid.times(), G, psi, m, method, x, options.survival_floor);
  });

  ImputedMatrix out;
  out.method = method;
  out.cause = m;
  out.times = grid.times();
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(J));
  out.ts1.resizeLike(out.values);
  out.ts2.resizeLike(out.values);
  out.normaliser.resize(static_cast<Eigen::Index>(n));
  auto& diag = out.diagnostics;
  diag.row_clamped.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < J; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.values(ii, jj) = r.h[j];
      out.ts1(ii, jj) = r.ts1[j];
      out.ts2(ii, jj) = r.ts2[j];
      if (!std::isfinite(r.h[j])) throw EstimationError("non-finite imputed response in row " + std::to_string(i + 1));
    }
    out.normaliser(ii) = r.normaliser;
    diag.survivor_evaluations += r.g_evals;
    diag.survivor_clamped += r.g_clamped;
    diag.incidence_evaluations += r.y_evals;
    diag.incidence_floored += r.y_floored;
    diag.row_clamped[i] = (r.g_clamped + r.y_floored) > 0;
    if (method == ImputationMethod::dr || method == ImputationMethod::bj)
      diag.max_identity_residual = std::max(diag.max_identity_residual, std::abs(r.normaliser - 1.0));
  }
  return out;
}

Matrix incidence_matrix(const Dataset& data, const TimeGrid& grid, int m) {
  Matrix z(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i].incidence(m, grid[j]);
  return z;
}

void write_imputed_csv(std::ostream& out, const ImputedMatrix& imputed) {
  out << "row,time,method,value,ts1,ts2\n" << std::setprecision(17);
  const auto method = to_string(imputed.method);
  for (Eigen::Index i = 0; i < imputed.values.rows(); ++i)
    for (Eigen::Index j = 0; j < imputed.values.cols(); ++j)
      out << i + 1 << ',' << imputed.times[static_cast<std::size_t>(j)] << ',' << method << ','
          << imputed.values(i, j) << ',' << imputed.ts1(i, j) << ',' << imputed.ts2(i, j) << '\n';
}

Matrix partition_means(const Matrix& responses, std::span<const int> labels, int leaves) {
  if (static_cast<Eigen::Index>(labels.size()) != responses.rows()) throw ParameterError("label count mismatch");
  Matrix sums = Matrix::Zero(leaves, responses.cols());
  std::vector<double> counts(static_cast<std::size_t>(leaves), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= leaves) throw ParameterError("label out of range");
    sums.row(labels[i]) += responses.row(static_cast<Eigen::Index>(i));
    counts[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (int l = 0; l < leaves; ++l)
    if (counts[static_cast<std::size_t>(l)] > 0) sums.row(l) /= counts[static_cast<std::size_t>(l)];
  return sums;
}

Matrix partition_ratio_estimates(const ImputedMatrix& imputed, std::span<const int> labels, int leaves) {
  const auto& h = imputed.values;
  if (static_cast<Eigen::Index>(labels.size()) != h.rows()) throw ParameterError("label count mismatch");
  Matrix sums = Matrix::Zero(leaves, h.cols());
  std::vector<double> denom(static_cast<std::size_t>(leaves), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= leaves) throw ParameterError("label out of range");
    sums.row(labels[i]) += h.row(static_cast<Eigen::Index>(i));
    denom[static_cast<std::size_t>(labels[i])] += imputed.normaliser(static_cast<Eigen::Index>(i));
  }
  for (int l = 0; l < leaves; ++l)
    if (denom[static_cast<std::size_t>(l)] != 0.0) sums.row(l) /= denom[static_cast<std::size_t>(l)];
  return sums;
}

}  // namespace ciftree
