#include "ciftree/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "ciftree/errors.hpp"

namespace ciftree {

HazardCurve::HazardCurve(std::vector<double> jump_times, std::vector<double> hazards)
    : times_(std::move(jump_times)), hazards_(std::move(hazards)) {
  if (times_.size() != hazards_.size()) throw ParameterError("hazard curve size mismatch");
  survivor_.resize(times_.size());
  double s = 1.0;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (k > 0 && !(times_[k] > times_[k - 1])) throw ParameterError("hazard jump times must increase");
    if (!(hazards_[k] >= 0.0 && hazards_[k] <= 1.0)) throw ParameterError("hazard increment outside [0,1]");
    s *= 1.0 - hazards_[k];
    survivor_[k] = s;
  }
}

HazardCurve HazardCurve::reverse_kaplan_meier(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].time < data[b].time; });
  std::vector<double> times, hazards;
  std::size_t at_risk = order.size();
  for (std::size_t k = 0; k < order.size();) {
    const double u = data[order[k]].time;
    std::size_t events = 0, censored = 0;
    for (; k < order.size() && data[order[k]].time == u; ++k) (data[order[k]].event ? events : censored)++;
    if (censored > 0) {
      times.push_back(u);
      hazards.push_back(static_cast<double>(censored) / static_cast<double>(at_risk - events));
    }
    at_risk -= events + censored;
  }
  return HazardCurve(std::move(times), std::move(hazards));
}

double HazardCurve::survivor_left(double u) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), u);
  return it == times_.begin() ? 1.0 : survivor_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double HazardCurve::survivor_right(double u) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), u);
  return it == times_.begin() ? 1.0 : survivor_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::vector<HazardStep> HazardCurve::path(double horizon) const {
  std::vector<HazardStep> out;
  for (std::size_t k = 0; k < times_.size() && times_[k] <= horizon; ++k)
    out.push_back({times_[k], hazards_[k], survivor_[k]});
  return out;
}

CensoringModel::CensoringModel(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in (0,1]");
}

double CensoringModel::survivor_at(double u, std::span<const double> w) const {
  return std::max(epsilon_, raw_survivor_left(u, w));
}

double CensoringModel::survivor_after(double u, std::span<const double> w) const {
  return std::max(epsilon_, raw_survivor_right(u, w));
}

MarginalCensoring::MarginalCensoring(HazardCurve curve, double epsilon)
    : CensoringModel(epsilon), curve_(std::move(curve)) {}

double MarginalCensoring::raw_survivor_left(double u, std::span<const double>) const {
  return curve_.survivor_left(u);
}

double MarginalCensoring::raw_survivor_right(double u, std::span<const double>) const {
  return curve_.survivor_right(u);
}

std::vector<HazardStep> MarginalCensoring::hazard_path(std::span<const double>, double horizon) const {
  return curve_.path(horizon);
}

CensoringTree::CensoringTree(std::vector<Node> nodes, std::vector<HazardCurve> curves, double epsilon)
    : CensoringModel(epsilon), nodes_(std::move(nodes)), curves_(std::move(curves)) {
  if (nodes_.empty()) throw ParameterError("censoring tree has no nodes");
  const auto count = static_cast<int>(nodes_.size());
  for (int k = 0; k < count; ++k) {
    const auto& n = nodes_[static_cast<std::size_t>(k)];
    if (n.variable < 0 && (n.curve < 0 || n.curve >= static_cast<int>(curves_.size())))
      throw ParameterError("censoring tree leaf without curve");
    if (n.variable >= 0 && (n.left <= k || n.left >= count || n.right <= k || n.right >= count))
      throw ParameterError("censoring tree node has invalid children");
  }
}

const HazardCurve& CensoringTree::curve_for(std::span<const double> w) const {
  int k = 0;
  while (nodes_[k].variable >= 0)
    k = w[static_cast<std::size_t>(nodes_[k].variable)] <= nodes_[k].threshold ? nodes_[k].left : nodes_[k].right;
  return curves_[static_cast<std::size_t>(nodes_[k].curve)];
}

double CensoringTree::raw_survivor_left(double u, std::span<const double> w) const {
  return curve_for(w).survivor_left(u);
}

double CensoringTree::raw_survivor_right(double u, std::span<const double> w) const {
  return curve_for(w).survivor_right(u);
}

std::vector<HazardStep> CensoringTree::hazard_path(std::span<const double> w, double horizon) const {
  return curve_for(w).path(horizon);
}

MarginalCensoring fit_reverse_km(const Dataset& data, double epsilon) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return MarginalCensoring(HazardCurve::reverse_kaplan_meier(data, rows), epsilon);
}

namespace {

// Exponential-model deviance of a node with d censorings over total time s,
// up to terms that cancel between a parent and its children.
double exp_deviance(double d, double s) { return d > 0.0 ? -2.0 * d * std::log(d / s) : 0.0; }

struct CensoringSplit {
  int variable;
  double threshold;
  double reduction;
};

std::optional<CensoringSplit> best_censoring_split(const Dataset& data, const std::vector<std::size_t>& rows,
                                                   std::size_t min_node) {
  const std::size_t n = rows.size();
  if (n < 2 * min_node) return std::nullopt;
  double d_total = 0.0, s_total = 0.0;
  for (auto i : rows) {
    d_total += data[i].event ? 0.0 : 1.0;
    s_total += data[i].time;
  }
  const double parent = exp_deviance(d_total, s_total);
  if (d_total == 0.0) return std::nullopt;
  const double tol = 1e-10 * std::max(1.0, std::abs(parent));

  std::optional<CensoringSplit> best;
  std::vector<std::pair<double, std::size_t>> sorted(n);
  for (int v = 0; v < data.dim(); ++v) {
    for (std::size_t k = 0; k < n; ++k) sorted[k] = {data[rows[k]].covariates[static_cast<std::size_t>(v)], rows[k]};
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double d_left = 0.0, s_left = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const auto& r = data[sorted[k].second];
      d_left += r.event ? 0.0 : 1.0;
      s_left += r.time;
      const std::size_t n_left = k + 1;
      if (sorted[k].first == sorted[k + 1].first) continue;
      if (n_left < min_node || n - n_left < min_node) continue;
      const double reduction =
          parent - exp_deviance(d_left, s_left) - exp_deviance(d_total - d_left, s_total - s_left);
      if (reduction > tol && (!best || reduction > best->reduction + tol)) {
        double thr = 0.5 * (sorted[k].first + sorted[k + 1].first);
        if (!(thr < sorted[k + 1].first)) thr = sorted[k].first;
        best = CensoringSplit{v, thr, reduction};
      }
    }
  }
  return best;
}

}  // namespace

CensoringTree fit_censoring_tree(const Dataset& data, std::size_t min_node, double epsilon) {
  if (min_node < 1) throw ParameterError("min_node must be at least 1");
  std::vector<CensoringTree::Node> nodes;
  std::vector<HazardCurve> curves;

  // Depth-first growth; children are appended after their parent.
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  nodes.push_back({});
  std::vector<Pending> stack;
  stack.push_back({0, std::move(all)});
  while (!stack.empty()) {
    Pending item = std::move(stack.back());
    stack.pop_back();
    nodes[static_cast<std::size_t>(item.node)].count = item.rows.size();
    auto split = best_censoring_split(data, item.rows, min_node);
    if (!split) {
      nodes[static_cast<std::size_t>(item.node)].curve = static_cast<int>(curves.size());
      curves.push_back(HazardCurve::reverse_kaplan_meier(data, item.rows));
      continue;
    }
    std::vector<std::size_t> left, right;
    for (auto i : item.rows)
      (data[i].covariates[static_cast<std::size_t>(split->variable)] <= split->threshold ? left : right).push_back(i);
    const int l = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes.push_back({});
    auto& parent = nodes[static_cast<std::size_t>(item.node)];
    parent.variable = split->variable;
    parent.threshold = split->threshold;
    parent.left = l;
    parent.right = l + 1;
    stack.push_back({l + 1, std::move(right)});
    stack.push_back({l, std::move(left)});
  }
  return CensoringTree(std::move(nodes), std::move(curves), epsilon);
}

}  // namespace ciftree
