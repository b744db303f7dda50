#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ciftree/data.hpp"

namespace ciftree {

/// Cumulative incidence curves psi_m(.|w) of every cause for one fixed w.
class CifCurves {
 public:
  virtual ~CifCurves() = default;
  virtual int causes() const = 0;
  /// psi_m(t|w), right-continuous.
  virtual double cif(int m, double t) const = 0;
  /// psi_m(t-|w).
  virtual double cif_left(int m, double t) const = 0;
  /// P(T >= t | w). Default: 1 - sum_k psi_k(t-|w).
  virtual double survival_left(double t) const;
};

/// A nuisance model Psi for the cause-specific CIFs.
class CifModel {
 public:
  virtual ~CifModel() = default;
  virtual int causes() const = 0;
  virtual std::string kind() const = 0;
  /// Curves for covariate vector w. The result may reference this model.
  virtual std::unique_ptr<const CifCurves> at(std::span<const double> w) const = 0;

  double cif(int m, double t, std::span<const double> w) const { return at(w)->cif(m, t); }
};

inline constexpr double kSurvivalFloor = 1e-6;

struct ConditionalIncidence {
  double value = 0.0;
  bool floored = false;  // P(T >= u | w) fell to the floor
};

/// E[Z_m(t) | T >= u, W = w] = (psi_m(t) - psi_m(u-)) / P(T >= u), zero for
/// u > t, clamped into [0,1].
ConditionalIncidence conditional_incidence(const CifCurves& curves, double u, double t, int m,
                                           double floor = kSurvivalFloor);
ConditionalIncidence conditional_incidence(const CifModel& model, double u, double t,
                                           std::span<const double> w, int m,
                                           double floor = kSurvivalFloor);

/// Clamped ratio used by conditional_incidence once the pieces are known.
inline ConditionalIncidence incidence_ratio(double numerator, double survival, double floor) {
  ConditionalIncidence out;
  out.floored = survival <= floor;
  double v = numerator / (out.floored ? floor : survival);
  out.value = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return out;
}

/// Marginal Aalen-Johansen CIFs with the all-cause Kaplan-Meier survival.
/// Covariates are ignored.
class AalenJohansen final : public CifModel {
 public:
  AalenJohansen(std::vector<double> times, std::vector<std::vector<double>> cif, std::vector<double> survival);

  int causes() const override { return static_cast<int>(cif_.size()); }
  std::string kind() const override { return "aalen-johansen"; }
  std::unique_ptr<const CifCurves> at(std::span<const double> w) const override;

  double cif(int m, double t) const;
  double cif_left(int m, double t) const;
  /// All-cause Kaplan-Meier survival P(T > t).
  double survival(double t) const;
  double survival_left(double t) const;

  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;             // distinct event times
  std::vector<std::vector<double>> cif_;  // [cause-1][k]
  std::vector<double> survival_;
};

AalenJohansen fit_aalen_johansen(const Dataset& data);

/// Parameters of the two-cause Fine-Gray-type generating model.
struct FineGrayParams {
  double p = 0.5;
  std::array<double, 6> beta1{0.5, 0.5, 0.5, 0.5, 0.6, -0.3};
  std::array<double, 6> beta2{0.0, -0.5, -0.5, -0.5, 0.5, 0.1};
};

/// Covariate transform (sin(pi W1 W2), W3^2, W10, I(W11>0), W12, exp(W15)),
/// 1-based covariate labels. Requires w.size() >= 15.
std::array<double, 6> fine_gray_features(std::span<const double> w);

/// Closed-form CIF of the generating model.
class ParametricFineGray final : public CifModel {
 public:
  explicit ParametricFineGray(FineGrayParams params);

  int causes() const override { return 2; }
  std::string kind() const override { return "fine-gray"; }
  std::unique_ptr<const CifCurves> at(std::span<const double> w) const override;

  const FineGrayParams& params() const { return params_; }
  /// Linear predictors (beta1'Z, beta2'Z).
  std::pair<double, double> linear_predictors(std::span<const double> w) const;
  /// lim_{t->inf} psi_1(t|w) = 1 - (1-p)^{exp(beta1'Z)}.
  double cause1_limit(std::span<const double> w) const;

 private:
  FineGrayParams params_;
};

/// Convenience closed form: psi_m(t|w) under `params`.
double parametric_fg_cif(const FineGrayParams& params, int m, double t, std::span<const double> w);

}  // namespace ciftree
