#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/data.hpp"
#include "ciftree/nuisance.hpp"

namespace ciftree {

/// Response transforms for censored competing-risks data.
///  ipcw:  Delta Z(t) / G(T-)
///  bj:    Delta Z(t) + (1 - Delta) y(T; t)                (G == 1)
///  dr:    ipcw term + censoring-martingale augmentation
///  dr_xi: ipcw term + xi (1 - Delta) y(T; t) / G(T)       (xi ~ N(0,1))
enum class ImputationMethod { ipcw, bj, dr, dr_xi };

std::string to_string(ImputationMethod method);
/// Accepts "ipcw", "bj", "dr", "dr-xi" / "dr_xi".
ImputationMethod parse_imputation_method(const std::string& name);

struct ImputationOptions {
  double survival_floor = kSurvivalFloor;
  unsigned threads = 0;
};

/// Delta Z_m(t) / G(T-|W).
double ts1_event(const ObservedRecord& record, double t, const CensoringModel& G, int m);

/// (1-Delta) y_m(T;t,W)/G(T|W) - sum_{u_k} y_m(u_k;t,W) dLambda_G(u_k)/G(u_k|W).
/// The sum runs over censoring jumps while the subject is at risk of
/// censoring: u_k <= T for censored subjects, u_k < T for events (events
/// leave the risk set first at tied times).
double ts2_augmentation(const ObservedRecord& record, double t, const CensoringModel& G, const CifModel& psi,
                        int m);

/// One imputed response. G is required for ipcw/dr/dr_xi, psi for bj/dr/dr_xi.
/// Passing xi with method dr selects the xi-randomised augmentation.
double h_value(const ObservedRecord& record, double t, const CensoringModel* G, const CifModel* psi, int m,
               ImputationMethod method, std::optional<double> xi = std::nullopt);

struct ImputationDiagnostics {
  std::size_t survivor_evaluations = 0;
  std::size_t survivor_clamped = 0;  // G evaluations floored at epsilon
  std::size_t incidence_evaluations = 0;
  std::size_t incidence_floored = 0;  // P(T >= u) at the survival floor
  std::vector<std::uint8_t> row_clamped;
  /// max_i |TS1^0_i + TS2^0_i - 1| over rows (dr / bj only).
  double max_identity_residual = 0.0;

  double survivor_clamp_fraction() const {
    return survivor_evaluations ? static_cast<double>(survivor_clamped) / static_cast<double>(survivor_evaluations) : 0.0;
  }
};

/// n x J matrix of imputed responses, with the two components and the
/// per-row normaliser TS1^0 + TS2^0 used by the ratio-form node estimator.
struct ImputedMatrix {
  Matrix values;
  Matrix ts1;
  Matrix ts2;
  Vector normaliser;
  ImputationMethod method = ImputationMethod::ipcw;
  int cause = 1;
  std::vector<double> times;
  ImputationDiagnostics diagnostics;
};

/// Builds H[i][j] = h_value(record_i, t_j). `xi` must hold one value per
/// subject for dr_xi and is shared across the time grid.
ImputedMatrix build_imputed_matrix(const Dataset& data, const TimeGrid& grid, const CensoringModel* G,
                                   const CifModel* psi, int m, ImputationMethod method,
                                   std::span<const double> xi = {}, const ImputationOptions& options = {});

/// Full-data responses Z_m(t_j) = I(T <= t_j, M = m).
Matrix incidence_matrix(const Dataset& data, const TimeGrid& grid, int m);

/// Long-format export: row,time,method,value,ts1,ts2.
void write_imputed_csv(std::ostream& out, const ImputedMatrix& imputed);

/// Node estimates for a fixed partition given by labels in [0, L):
/// coordinate-wise means of `responses` per node (mean form).
Matrix partition_means(const Matrix& responses, std::span<const int> labels, int leaves);
/// Ratio-form node estimates sum(H) / sum(TS1^0 + TS2^0) per node.
Matrix partition_ratio_estimates(const ImputedMatrix& imputed, std::span<const int> labels, int leaves);

}  // namespace ciftree
