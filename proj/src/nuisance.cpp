#include "ciftree/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ciftree/errors.hpp"

namespace ciftree {

double CifCurves::survival_left(double t) const {
  double s = 1.0;
  for (int k = 1; k <= causes(); ++k) s -= cif_left(k, t);
  return s;
}

ConditionalIncidence conditional_incidence(const CifCurves& curves, double u, double t, int m, double floor) {
  if (u > t) return {};
  return incidence_ratio(curves.cif(m, t) - curves.cif_left(m, u), curves.survival_left(u), floor);
}

ConditionalIncidence conditional_incidence(const CifModel& model, double u, double t,
                                           std::span<const double> w, int m, double floor) {
  return conditional_incidence(*model.at(w), u, t, m, floor);
}

// ---------------------------------------------------------------------------
// Aalen-Johansen

namespace {

class AalenJohansenCurves final : public CifCurves {
 public:
  explicit AalenJohansenCurves(const AalenJohansen& model) : model_(model) {}
  int causes() const override { return model_.causes(); }
  double cif(int m, double t) const override { return model_.cif(m, t); }
  double cif_left(int m, double t) const override { return model_.cif_left(m, t); }

 private:
  const AalenJohansen& model_;
};

}  // namespace

AalenJohansen::AalenJohansen(std::vector<double> times, std::vector<std::vector<double>> cif,
                             std::vector<double> survival)
    : times_(std::move(times)), cif_(std::move(cif)), survival_(std::move(survival)) {
  if (cif_.empty()) throw ParameterError("Aalen-Johansen model needs at least one cause");
  for (const auto& c : cif_)
    if (c.size() != times_.size()) throw ParameterError("Aalen-Johansen size mismatch");
  if (survival_.size() != times_.size()) throw ParameterError("Aalen-Johansen size mismatch");
}

std::unique_ptr<const CifCurves> AalenJohansen::at(std::span<const double>) const {
  return std::make_unique<AalenJohansenCurves>(*this);
}

double AalenJohansen::cif(int m, double t) const {
  if (m < 1 || m > causes()) return 0.0;
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 0.0 : cif_[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(it - times_.begin()) - 1];
}

double AalenJohansen::cif_left(int m, double t) const {
  if (m < 1 || m > causes()) return 0.0;
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 0.0 : cif_[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(it - times_.begin()) - 1];
}

double AalenJohansen::survival(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 1.0 : survival_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double AalenJohansen::survival_left(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 1.0 : survival_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

AalenJohansen fit_aalen_johansen(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return data[a].time < data[b].time; });

  const int K = data.causes();
  std::vector<double> times, survival;
  std::vector<std::vector<double>> cif(static_cast<std::size_t>(K));
  std::vector<double> running(static_cast<std::size_t>(K), 0.0);
  double s = 1.0;
  std::size_t at_risk = order.size();
  for (std::size_t k = 0; k < order.size();) {
    const double u = data[order[k]].time;
    std::vector<std::size_t> events(static_cast<std::size_t>(K), 0);
    std::size_t total_events = 0, leaving = 0;
    for (; k < order.size() && data[order[k]].time == u; ++k, ++leaving) {
      const auto& r = data[order[k]];
      if (r.event) {
        ++events[static_cast<std::size_t>(r.cause - 1)];
        ++total_events;
      }
    }
    if (total_events > 0) {
      const double n = static_cast<double>(at_risk);
      for (int m = 0; m < K; ++m) {
        running[static_cast<std::size_t>(m)] += s * static_cast<double>(events[static_cast<std::size_t>(m)]) / n;
        cif[static_cast<std::size_t>(m)].push_back(running[static_cast<std::size_t>(m)]);
      }
      s *= 1.0 - static_cast<double>(total_events) / n;
      times.push_back(u);
      survival.push_back(s);
    }
    at_risk -= leaving;
  }
  return AalenJohansen(std::move(times), std::move(cif), std::move(survival));
}

// ---------------------------------------------------------------------------
// Parametric Fine-Gray generating model

std::array<double, 6> fine_gray_features(std::span<const double> w) {
  if (w.size() < 15) throw ParameterError("Fine-Gray transform needs at least 15 covariates");
  return {std::sin(std::numbers::pi * w[0] * w[1]), w[2] * w[2], w[9], w[10] > 0.0 ? 1.0 : 0.0, w[11],
          std::exp(w[14])};
}

namespace {

class FineGrayCurves final : public CifCurves {
 public:
  FineGrayCurves(double p, double eta1, double eta2) : p_(p), eta1_(eta1), eta2_(eta2) {}
  int causes() const override { return 2; }
  double cif(int m, double t) const override {
    if (t <= 0.0) return 0.0;
    if (m == 1) return 1.0 - std::pow(1.0 - p_ * (-std::expm1(-t)), eta1_);
    if (m == 2) return std::pow(1.0 - p_, eta1_) * (-std::expm1(-t * eta2_));
    return 0.0;
  }
  double cif_left(int m, double t) const override { return cif(m, t); }

 private:
  double p_, eta1_, eta2_;
};

}  // namespace

ParametricFineGray::ParametricFineGray(FineGrayParams params) : params_(params) {
  if (!(params_.p > 0.0 && params_.p < 1.0)) throw ParameterError("Fine-Gray p must lie in (0,1)");
}

std::pair<double, double> ParametricFineGray::linear_predictors(std::span<const double> w) const {
  const auto z = fine_gray_features(w);
  double lp1 = 0.0, lp2 = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    lp1 += params_.beta1[k] * z[k];
    lp2 += params_.beta2[k] * z[k];
  }
  return {lp1, lp2};
}

std::unique_ptr<const CifCurves> ParametricFineGray::at(std::span<const double> w) const {
  auto [lp1, lp2] = linear_predictors(w);
  return std::make_unique<FineGrayCurves>(params_.p, std::exp(lp1), std::exp(lp2));
}

double ParametricFineGray::cause1_limit(std::span<const double> w) const {
  return 1.0 - std::pow(1.0 - params_.p, std::exp(linear_predictors(w).first));
}

double parametric_fg_cif(const FineGrayParams& params, int m, double t, std::span<const double> w) {
  return ParametricFineGray(params).cif(m, t, w);
}

}  // namespace ciftree
