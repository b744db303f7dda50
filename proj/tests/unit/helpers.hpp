#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "ciftree/data.hpp"
#include "ciftree/nuisance.hpp"

namespace testing {

using namespace ciftree;

inline ObservedRecord rec(double time, int cause, std::vector<double> w = {0.0}) {
  ObservedRecord r;
  r.time = time;
  r.event = cause != 0;
  r.cause = cause;
  r.covariates = std::move(w);
  return r;
}

// Three subjects, one censored at 2: reverse KM has a single jump of 1/2 at 2.
inline Dataset hand_km_data() { return Dataset({rec(1, 1), rec(2, 0), rec(3, 1)}, 2); }

// Step CIFs that ignore w: psi_m jumps to level[m-1] at time at[m-1].
class StepCif final : public CifModel {
 public:
  StepCif(std::vector<double> at, std::vector<double> level) : at_(std::move(at)), level_(std::move(level)) {}
  int causes() const override { return static_cast<int>(at_.size()); }
  std::string kind() const override { return "step"; }

  class Curves final : public CifCurves {
   public:
    explicit Curves(const StepCif& o) : o_(o) {}
    int causes() const override { return o_.causes(); }
    double cif(int m, double t) const override { return t >= o_.at_[m - 1] ? o_.level_[m - 1] : 0.0; }
    double cif_left(int m, double t) const override { return t > o_.at_[m - 1] ? o_.level_[m - 1] : 0.0; }

   private:
    const StepCif& o_;
  };

  std::unique_ptr<const CifCurves> at(std::span<const double>) const override {
    return std::make_unique<Curves>(*this);
  }

 private:
  std::vector<double> at_;
  std::vector<double> level_;
};

// Constant CIF value per cause for every t > 0.
class ConstantCif final : public CifModel {
 public:
  explicit ConstantCif(std::vector<double> level) : level_(std::move(level)) {}
  int causes() const override { return static_cast<int>(level_.size()); }
  std::string kind() const override { return "constant"; }

  class Curves final : public CifCurves {
   public:
    explicit Curves(const ConstantCif& o) : o_(o) {}
    int causes() const override { return o_.causes(); }
    double cif(int m, double) const override { return o_.level_[m - 1]; }
    double cif_left(int m, double) const override { return o_.level_[m - 1]; }

   private:
    const ConstantCif& o_;
  };

  std::unique_ptr<const CifCurves> at(std::span<const double>) const override {
    return std::make_unique<Curves>(*this);
  }

 private:
  std::vector<double> level_;
};

inline std::span<const double> row_of(const Matrix& m, Eigen::Index i) {
  return {m.row(i).data(), static_cast<std::size_t>(m.cols())};
}

}  // namespace testing
