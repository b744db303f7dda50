#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ciftree/data.hpp"

namespace ciftree {

/// One censoring-hazard jump: time u_k, increment dΛ_G(u_k) and the
/// right-continuous survivor value G(u_k) (after the jump).
struct HazardStep {
  double time = 0.0;
  double hazard = 0.0;
  double survivor = 1.0;
};

/// Step censoring survivor function stored as hazard increments.
/// survivor_after[k] = prod_{i<=k} (1 - hazard[i]).
class HazardCurve {
 public:
  HazardCurve() = default;
  HazardCurve(std::vector<double> jump_times, std::vector<double> hazards);

  /// Reverse Kaplan-Meier on the given rows: censorings are the events of
  /// interest, and at tied times observed events leave the risk set first.
  static HazardCurve reverse_kaplan_meier(const Dataset& data, std::span<const std::size_t> rows);

  /// P(C >= u): product over jumps strictly before u.
  double survivor_left(double u) const;
  /// P(C > u): product over jumps at or before u.
  double survivor_right(double u) const;
  std::vector<HazardStep> path(double horizon) const;

  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& hazards() const { return hazards_; }
  const std::vector<double>& survivor_after() const { return survivor_; }
  std::size_t size() const { return times_.size(); }

 private:
  std::vector<double> times_;
  std::vector<double> hazards_;
  std::vector<double> survivor_;
};

inline constexpr double kDefaultEpsilon = 0.05;

/// Estimate of the censoring survivor function G(u|w) = P(C >= u | W = w).
/// Values handed to the estimators are floored at epsilon; the raw_*
/// accessors expose the untruncated estimate so callers can count clamps.
class CensoringModel {
 public:
  explicit CensoringModel(double epsilon);
  virtual ~CensoringModel() = default;

  virtual std::string kind() const = 0;
  virtual double raw_survivor_left(double u, std::span<const double> w) const = 0;
  virtual double raw_survivor_right(double u, std::span<const double> w) const = 0;
  /// Jumps with u_k <= horizon of the curve governing w. For continuous
  /// models this is an exact-mass discretisation of [0, horizon].
  virtual std::vector<HazardStep> hazard_path(std::span<const double> w, double horizon) const = 0;

  /// max(epsilon, P(C >= u | w)); left-continuous, excludes a jump at u.
  double survivor_at(double u, std::span<const double> w) const;
  /// max(epsilon, P(C > u | w)).
  double survivor_after(double u, std::span<const double> w) const;

  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

/// Covariate-free reverse Kaplan-Meier model.
class MarginalCensoring final : public CensoringModel {
 public:
  explicit MarginalCensoring(HazardCurve curve, double epsilon = kDefaultEpsilon);

  std::string kind() const override { return "marginal"; }
  double raw_survivor_left(double u, std::span<const double> w) const override;
  double raw_survivor_right(double u, std::span<const double> w) const override;
  std::vector<HazardStep> hazard_path(std::span<const double> w, double horizon) const override;

  const HazardCurve& curve() const { return curve_; }

 private:
  HazardCurve curve_;
};

/// Binary partition of covariate space with a reverse-KM curve per leaf.
class CensoringTree final : public CensoringModel {
 public:
  struct Node {
    int variable = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int curve = -1;  // leaf curve index
    std::size_t count = 0;
  };

  CensoringTree(std::vector<Node> nodes, std::vector<HazardCurve> curves, double epsilon = kDefaultEpsilon);

  std::string kind() const override { return "tree"; }
  double raw_survivor_left(double u, std::span<const double> w) const override;
  double raw_survivor_right(double u, std::span<const double> w) const override;
  std::vector<HazardStep> hazard_path(std::span<const double> w, double horizon) const override;

  const HazardCurve& curve_for(std::span<const double> w) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<HazardCurve>& curves() const { return curves_; }
  std::size_t leaf_count() const { return curves_.size(); }

 private:
  std::vector<Node> nodes_;
  std::vector<HazardCurve> curves_;
};

MarginalCensoring fit_reverse_km(const Dataset& data, double epsilon = kDefaultEpsilon);

/// Censoring survival tree: splits maximise the reduction in exponential
/// (Poisson) deviance of the censoring process; each child keeps at least
/// min_node records.
CensoringTree fit_censoring_tree(const Dataset& data, std::size_t min_node = 30,
                                 double epsilon = kDefaultEpsilon);

}  // namespace ciftree
