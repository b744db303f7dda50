#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ciftree/data.hpp"

namespace ciftree {

/// Left child receives covariate[variable] <= threshold.
struct SplitRule {
  int variable = 0;
  double threshold = 0.0;
};

struct SplitCandidate {
  SplitRule rule;
  /// Decrease in sum_j w_j * SSE_j (parent minus both children).
  double reduction = 0.0;
};

struct TreeNode {
  int variable = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // coordinate means of the node's training responses
  std::size_t count = 0;      // training rows (bootstrap duplicates included)
  double risk = 0.0;          // weighted within-node SSE

  bool is_leaf() const { return variable < 0; }
};

struct TreeParams {
  std::size_t nodesize = 20;  // minimum rows per leaf
  int mtry = 0;               // 0 = all covariates
  std::uint64_t seed = 0;
};

/// Regression tree on a J-dimensional response; nodes are stored in preorder.
class TreeModel {
 public:
  TreeModel(std::vector<TreeNode> nodes, std::vector<double> weights, TreeParams params = {});
  static TreeModel single_leaf(std::vector<double> value, std::vector<double> weights, std::size_t count = 1);

  std::span<const double> predict(std::span<const double> w) const;
  std::size_t leaf_index(std::span<const double> w) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const TreeParams& params() const { return params_; }
  std::size_t leaf_count() const;
  std::size_t dimension() const { return weights_.size(); }

  bool operator==(const TreeModel& other) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<double> weights_;
  TreeParams params_;
};

/// sum_j weights[j] * sum_{i in rows} (y_ij - mean_j)^2.
double weighted_sse(std::span<const std::size_t> rows, const Matrix& responses, std::span<const double> weights);

/// Exhaustive search over midpoints between consecutive distinct values of
/// each candidate variable. Returns the split with the largest strictly
/// positive reduction that leaves at least `nodesize` rows per child; ties go
/// to the lower variable index, then the lower threshold.
std::optional<SplitCandidate> best_split(std::span<const std::size_t> rows, const Matrix& responses,
                                         const Matrix& covariates, std::span<const int> candidate_vars,
                                         std::span<const double> weights, std::size_t nodesize);

/// Grows an unpruned tree. `rows` is the training multiset (e.g. a bootstrap
/// sample); empty means every row once. Candidate variables at each node are
/// drawn from a stream derived from (seed, node path), so a subtree does not
/// depend on the order in which other nodes are expanded.
TreeModel grow_tree(const Matrix& responses, const Matrix& covariates, std::span<const double> weights,
                    const TreeParams& params, std::span<const std::size_t> rows = {});

/// Cost-complexity parameters alpha_0 = 0 < alpha_1 < ... of the weakest-link
/// pruning sequence; the last entry collapses the tree to its root.
std::vector<double> pruning_sequence(const TreeModel& tree);

/// Smallest optimally pruned subtree for cost-complexity parameter alpha.
TreeModel prune_at(const TreeModel& tree, double alpha);

struct PruneOptions {
  int folds = 10;
  bool one_se = false;
  std::uint64_t seed = 0;
};

struct PruneResult {
  double alpha = 0.0;
  std::vector<double> alphas;
  std::vector<double> cv_error;  // mean held-out weighted squared error per alpha
  std::vector<double> cv_se;
};

/// Selects alpha by K-fold cross-validated weighted squared error and returns
/// the pruned tree. Fold trees are regrown with the tree's own parameters.
TreeModel prune_tree(const TreeModel& tree, const Matrix& responses, const Matrix& covariates,
                     const PruneOptions& options, PruneResult* report = nullptr);

}  // namespace ciftree
