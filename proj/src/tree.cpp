#include "ciftree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ciftree/errors.hpp"
#include "ciftree/random.hpp"

namespace ciftree {

TreeModel::TreeModel(std::vector<TreeNode> nodes, std::vector<double> weights, TreeParams params)
    : nodes_(std::move(nodes)), weights_(std::move(weights)), params_(params) {
  if (nodes_.empty()) throw ParameterError("tree has no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (int k = 0; k < n; ++k) {
    const auto& node = nodes_[static_cast<std::size_t>(k)];
    if (node.value.size() != weights_.size()) throw ParameterError("tree node value has wrong dimension");
    if (!node.is_leaf() && (node.left <= k || node.left >= n || node.right <= k || node.right >= n))
      throw ParameterError("tree node has invalid children");
  }
}

TreeModel TreeModel::single_leaf(std::vector<double> value, std::vector<double> weights, std::size_t count) {
  TreeNode leaf;
  leaf.value = std::move(value);
  leaf.count = count;
  return TreeModel({std::move(leaf)}, std::move(weights));
}

std::size_t TreeModel::leaf_index(std::span<const double> w) const {
  std::size_t k = 0;
  while (!nodes_[k].is_leaf()) {
    const auto& node = nodes_[k];
    k = static_cast<std::size_t>(w[static_cast<std::size_t>(node.variable)] <= node.threshold ? node.left : node.right);
  }
  return k;
}

std::span<const double> TreeModel::predict(std::span<const double> w) const {
  return nodes_[leaf_index(w)].value;
}

std::size_t TreeModel::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

bool TreeModel::operator==(const TreeModel& other) const {
  if (weights_ != other.weights_ || nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& a = nodes_[k];
    const auto& b = other.nodes_[k];
    if (a.variable != b.variable || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
        a.value != b.value || a.count != b.count)
      return false;
  }
  return true;
}

namespace {

std::vector<double> node_mean(std::span<const std::size_t> rows, const Matrix& responses) {
  std::vector<double> mean(static_cast<std::size_t>(responses.cols()), 0.0);
  for (auto i : rows)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += responses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  return mean;
}

double node_risk(std::span<const std::size_t> rows, const Matrix& responses, std::span<const double> mean,
                 std::span<const double> weights) {
  double risk = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    double sse = 0.0;
    for (auto i : rows) {
      const double d = responses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - mean[j];
      sse += d * d;
    }
    risk += weights[j] * sse;
  }
  return risk;
}

std::vector<int> candidate_variables(int p, int mtry, std::uint64_t node_key) {
  std::vector<int> vars(static_cast<std::size_t>(p));
  std::iota(vars.begin(), vars.end(), 0);
  if (mtry <= 0 || mtry >= p) return vars;
  Rng rng(node_key);
  for (int k = 0; k < mtry; ++k) {
    std::uniform_int_distribution<int> pick(k, p - 1);
    std::swap(vars[static_cast<std::size_t>(k)], vars[static_cast<std::size_t>(pick(rng))]);
  }
  vars.resize(static_cast<std::size_t>(mtry));
  std::sort(vars.begin(), vars.end());
  return vars;
}

class Grower {
 public:
  Grower(const Matrix& responses, const Matrix& covariates, std::span<const double> weights, const TreeParams& params)
      : responses_(responses), covariates_(covariates), weights_(weights), params_(params) {}

  int grow(std::vector<std::size_t> rows, std::uint64_t key) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      auto& node = nodes_.back();
      node.value = node_mean(rows, responses_);
      node.count = rows.size();
      node.risk = node_risk(rows, responses_, node.value, weights_);
    }
    if (rows.size() < 2 * params_.nodesize) return index;
    const auto vars = candidate_variables(static_cast<int>(covariates_.cols()), params_.mtry, key);
    const auto split = best_split(rows, responses_, covariates_, vars, weights_, params_.nodesize);
    if (!split) return index;

    std::vector<std::size_t> left, right;
    for (auto i : rows)
      (covariates_(static_cast<Eigen::Index>(i), split->rule.variable) <= split->rule.threshold ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), derive_seed(key, {1}));
    const int r = grow(std::move(right), derive_seed(key, {2}));
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.variable = split->rule.variable;
    node.threshold = split->rule.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  const Matrix& responses_;
  const Matrix& covariates_;
  std::span<const double> weights_;
  const TreeParams& params_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

double weighted_sse(std::span<const std::size_t> rows, const Matrix& responses, std::span<const double> weights) {
  if (rows.empty()) return 0.0;
  const auto mean = node_mean(rows, responses);
  return node_risk(rows, responses, mean, weights);
}

std::optional<SplitCandidate> best_split(std::span<const std::size_t> rows, const Matrix& responses,
                                         const Matrix& covariates, std::span<const int> candidate_vars,
                                         std::span<const double> weights, std::size_t nodesize) {
  const std::size_t n = rows.size();
  const auto J = static_cast<std::size_t>(responses.cols());
  if (nodesize == 0) nodesize = 1;
  if (n < 2 * nodesize) return std::nullopt;

  const auto mean = node_mean(rows, responses);
  const double parent_risk = node_risk(rows, responses, mean, weights);
  if (!(parent_risk > 0.0)) return std::nullopt;
  const double tol = 1e-12 * parent_risk;

  // Responses centred at the parent mean; gains are then
  // sum_j w_j (S_L^2/n_L + S_R^2/n_R - S^2/n) with S ~ 0.
  std::vector<double> centred(n * J);
  std::vector<double> total(J, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < J; ++j) {
      const double v = responses(static_cast<Eigen::Index>(rows[k]), static_cast<Eigen::Index>(j)) - mean[j];
      centred[k * J + j] = v;
      total[j] += v;
    }
  double total_term = 0.0;
  for (std::size_t j = 0; j < J; ++j) total_term += weights[j] * total[j] * total[j] / static_cast<double>(n);

  std::optional<SplitCandidate> best;
  std::vector<std::size_t> order(n);
  std::vector<double> left(J);
  for (int v : candidate_vars) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return covariates(static_cast<Eigen::Index>(rows[a]), v) < covariates(static_cast<Eigen::Index>(rows[b]), v);
    });
    std::fill(left.begin(), left.end(), 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      for (std::size_t j = 0; j < J; ++j) left[j] += centred[order[k] * J + j];
      const double x = covariates(static_cast<Eigen::Index>(rows[order[k]]), v);
      const double x_next = covariates(static_cast<Eigen::Index>(rows[order[k + 1]]), v);
      if (x == x_next) continue;
      const std::size_t n_left = k + 1, n_right = n - n_left;
      if (n_left < nodesize) continue;
      if (n_right < nodesize) break;
      double gain = -total_term;
      for (std::size_t j = 0; j < J; ++j) {
        const double right = total[j] - left[j];
        gain += weights[j] * (left[j] * left[j] / static_cast<double>(n_left) +
                              right * right / static_cast<double>(n_right));
      }
      if (gain > tol && (!best || gain > best->reduction + tol)) {
        double threshold = 0.5 * (x + x_next);
        if (!(threshold < x_next)) threshold = x;
        best = SplitCandidate{{v, threshold}, gain};
      }
    }
  }
  return best;
}

TreeModel grow_tree(const Matrix& responses, const Matrix& covariates, std::span<const double> weights,
                    const TreeParams& params, std::span<const std::size_t> rows) {
  if (responses.rows() != covariates.rows()) throw ParameterError("response and covariate row counts differ");
  if (static_cast<Eigen::Index>(weights.size()) != responses.cols()) throw ParameterError("weight count must equal J");
  if (params.nodesize < 1) throw ParameterError("nodesize must be at least 1");
  if (params.mtry < 0 || params.mtry > covariates.cols()) throw ParameterError("mtry must lie in 1..p");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(static_cast<std::size_t>(responses.rows()));
    std::iota(all.begin(), all.end(), 0);
  } else {
    all.assign(rows.begin(), rows.end());
  }
  if (all.empty()) throw ParameterError("cannot grow a tree on zero rows");
  Grower grower(responses, covariates, weights, params);
  grower.grow(std::move(all), derive_seed(params.seed, {stream::kTree}));
  return TreeModel(grower.take(), std::vector<double>(weights.begin(), weights.end()), params);
}

// ---------------------------------------------------------------------------
// Cost-complexity pruning

namespace {

// Alpha at which each internal node is collapsed by weakest-link pruning
// (+inf for leaves and for nodes only removed together with an ancestor).
std::vector<double> collapse_alphas(const TreeModel& tree) {
  const auto& nodes = tree.nodes();
  const std::size_t count = nodes.size();
  std::vector<double> alpha(count, std::numeric_limits<double>::infinity());
  std::vector<char> collapsed(count, 0);
  std::vector<double> subtree_risk(count);
  std::vector<double> subtree_leaves(count);
  const double scale = std::max(nodes[0].risk, 1e-300);

  // Children follow their parent in preorder, so a reverse sweep is postorder.
  auto refresh = [&] {
    for (std::size_t k = count; k-- > 0;) {
      const auto& node = nodes[k];
      if (node.is_leaf() || collapsed[k]) {
        subtree_risk[k] = node.risk;
        subtree_leaves[k] = 1.0;
      } else {
        const auto l = static_cast<std::size_t>(node.left), r = static_cast<std::size_t>(node.right);
        subtree_risk[k] = subtree_risk[l] + subtree_risk[r];
        subtree_leaves[k] = subtree_leaves[l] + subtree_leaves[r];
      }
    }
  };
  auto reachable = [&](std::vector<char>& live) {
    live.assign(count, 0);
    live[0] = 1;
    for (std::size_t k = 0; k < count; ++k) {
      if (!live[k] || nodes[k].is_leaf() || collapsed[k]) continue;
      live[static_cast<std::size_t>(nodes[k].left)] = 1;
      live[static_cast<std::size_t>(nodes[k].right)] = 1;
    }
  };

  std::vector<char> live;
  while (!nodes[0].is_leaf() && !collapsed[0]) {
    refresh();
    reachable(live);
    double weakest = std::numeric_limits<double>::infinity();
    std::vector<double> g(count, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < count; ++k) {
      if (!live[k] || nodes[k].is_leaf() || collapsed[k]) continue;
      g[k] = std::max(0.0, (nodes[k].risk - subtree_risk[k]) / (subtree_leaves[k] - 1.0));
      weakest = std::min(weakest, g[k]);
    }
    const double cut = weakest + 1e-10 * std::max(weakest, 0.0) + 1e-14 * scale;
    for (std::size_t k = 0; k < count; ++k)
      if (g[k] <= cut) {
        collapsed[k] = 1;
        alpha[k] = weakest;
      }
  }
  return alpha;
}

TreeModel materialise(const TreeModel& tree, const std::vector<double>& alpha, double at) {
  const auto& nodes = tree.nodes();
  std::vector<TreeNode> out;
  auto copy = [&](auto&& self, std::size_t k) -> int {
    const int index = static_cast<int>(out.size());
    out.push_back(nodes[k]);
    if (nodes[k].is_leaf() || alpha[k] <= at) {
      auto& leaf = out.back();
      leaf.variable = -1;
      leaf.threshold = 0.0;
      leaf.left = leaf.right = -1;
      return index;
    }
    const int l = self(self, static_cast<std::size_t>(nodes[k].left));
    const int r = self(self, static_cast<std::size_t>(nodes[k].right));
    out[static_cast<std::size_t>(index)].left = l;
    out[static_cast<std::size_t>(index)].right = r;
    return index;
  };
  copy(copy, 0);
  return TreeModel(std::move(out), tree.weights(), tree.params());
}

}  // namespace

std::vector<double> pruning_sequence(const TreeModel& tree) {
  auto alpha = collapse_alphas(tree);
  std::vector<double> seq{0.0};
  for (double a : alpha)
    if (std::isfinite(a)) seq.push_back(a);
  std::sort(seq.begin(), seq.end());
  seq.erase(std::unique(seq.begin(), seq.end()), seq.end());
  return seq;
}

TreeModel prune_at(const TreeModel& tree, double alpha) {
  return materialise(tree, collapse_alphas(tree), alpha);
}

TreeModel prune_tree(const TreeModel& tree, const Matrix& responses, const Matrix& covariates,
                     const PruneOptions& options, PruneResult* report) {
  if (options.folds < 2) throw ParameterError("pruning needs at least 2 folds");
  if (tree.leaf_count() == 1) {
    if (report) *report = PruneResult{0.0, {0.0}, {}, {}};
    return tree;
  }
  const auto n = static_cast<std::size_t>(responses.rows());
  const auto alphas = pruning_sequence(tree);
  const std::size_t K = alphas.size();
  std::vector<double> probe(K);
  for (std::size_t k = 0; k < K; ++k)
    probe[k] = k + 1 < K ? std::sqrt(alphas[k] * alphas[k + 1]) : 2.0 * alphas[k];

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(options.seed, {stream::kFolds}));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(options.folds));

  const auto& w = tree.weights();
  std::vector<std::vector<double>> errors(K, std::vector<double>(n, 0.0));
  for (int f = 0; f < options.folds; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : train).push_back(i);
    if (train.empty() || held.empty()) continue;
    TreeParams params = tree.params();
    params.seed = derive_seed(options.seed, {stream::kFolds, static_cast<std::uint64_t>(f)});
    const auto fold_tree = grow_tree(responses, covariates, w, params, train);
    const auto fold_alpha = collapse_alphas(fold_tree);
    for (std::size_t k = 0; k < K; ++k) {
      const auto pruned = materialise(fold_tree, fold_alpha, probe[k]);
      for (auto i : held) {
        const auto pred = pruned.predict(std::span<const double>(covariates.row(static_cast<Eigen::Index>(i)).data(),
                                                                 static_cast<std::size_t>(covariates.cols())));
        double e = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double d = responses(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - pred[j];
          e += w[j] * d * d;
        }
        errors[k][i] = e;
      }
    }
  }

  PruneResult result;
  result.alphas = alphas;
  for (std::size_t k = 0; k < K; ++k) {
    const double mean = std::accumulate(errors[k].begin(), errors[k].end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double e : errors[k]) var += (e - mean) * (e - mean);
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    result.cv_error.push_back(mean);
    result.cv_se.push_back(std::sqrt(var / static_cast<double>(n)));
  }
  std::size_t chosen = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (result.cv_error[k] <= result.cv_error[chosen]) chosen = k;  // ties favour the smaller tree
  if (options.one_se) {
    const double bound = result.cv_error[chosen] + result.cv_se[chosen];
    for (std::size_t k = K; k-- > chosen;)
      if (result.cv_error[k] <= bound) {
        chosen = k;
        break;
      }
  }
  result.alpha = alphas[chosen];
  if (report) *report = result;
  return prune_at(tree, result.alpha);
}

}  // namespace ciftree
