#ifndef EBLR_TREE_HPP
#define EBLR_TREE_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eblr/data.hpp"

namespace eblr {

// ---------------------------------------------------------------------------
// Rules

enum class Relation { le, gt, eq, ne };

// One test on a matrix column.
//   numeric: column <= threshold | column > threshold
//   binary:  column = threshold, threshold in {0, 1}
//   one-hot: column is 1 (eq) | column is 0 (ne)
struct Condition {
  ColumnInfo column;
  Relation relation = Relation::le;
  double threshold = 0.0;

  bool holds(double value) const;
  // Canonical text: name<=v, name>v, name=level, name!=level.
  std::string to_string() const;

  bool operator==(const Condition&) const = default;
};

// Conjunction of conditions marking one tree leaf's region.
struct RuleFeature {
  std::vector<Condition> conditions;
  int source_iteration = 0;
  double leaf_mean = 0.0;
  double leaf_share = 0.0;

  // Conditions joined by " & ". Stable across runs and platforms.
  std::string to_string() const;
  // 1.0 on rows where every condition holds, else 0.0.
  Eigen::VectorXd apply(const VerticalMatrix& m) const;

  bool operator==(const RuleFeature&) const = default;
};

// Merges redundant conditions on the same column (tightest numeric bounds, an
// equality absorbing inequalities on the same categorical) and sorts by name,
// relation, then value.
std::vector<Condition> simplify(std::vector<Condition> conditions);

Eigen::VectorXd apply_rule(const RuleFeature& rule, const VerticalMatrix& m);

// ---------------------------------------------------------------------------
// Regression tree

struct TreeConfig {
  double eta = 0.001;  // pruning threshold on normalized SSE reduction
  int min_leaf = 5;
  int max_depth = 8;

  void validate() const;
};

struct Split {
  ColumnInfo column;
  double threshold = 0.0;  // rows with value <= threshold go left

  bool operator==(const Split&) const = default;
};

struct TreeNode {
  std::optional<Split> split;
  int left = -1;
  int right = -1;
  double mean_residual = 0.0;
  std::size_t sample_count = 0;
  double sample_share = 0.0;
  double sse = 0.0;  // node risk: sum of squared deviations from the node mean
  int depth = 0;

  bool is_leaf() const { return !split.has_value(); }
  bool operator==(const TreeNode&) const = default;
};

// Binary CART tree over residuals. Nodes are stored in depth-first preorder
// with the root at index 0.
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t num_leaves() const;
  // Leaf ids from left to right.
  std::vector<int> leaves() const;
  // Conditions on the path from the root to `id`, unsimplified.
  std::vector<Condition> path_conditions(int id) const;
  int leaf_for(const VerticalMatrix& m, Eigen::Index row) const;

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

// Best split of one node under the weighted-SSE criterion. Exposed for tests.
struct SplitCandidate {
  Eigen::Index column = -1;
  double threshold = 0.0;
  double reduction = 0.0;  // parent SSE - (left SSE + right SSE)
};

std::optional<SplitCandidate> best_split(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& residuals,
                                         const std::vector<Eigen::Index>& rows, int min_leaf);

// Grows without pruning.
RegressionTree grow_tree(const VerticalMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& residuals,
                         const TreeConfig& cfg);
// grow_tree followed by prune(cfg.eta).
RegressionTree fit_tree(const VerticalMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& residuals,
                        const TreeConfig& cfg);

// Weakest-link pruning: bottom-up, an internal node collapses into a leaf when
// the SSE reduction of its (already pruned) subtree per split, divided by the
// root SSE, is at most eta.
RegressionTree prune(const RegressionTree& tree, double eta);

// Rule of the leaf with the largest |mean residual|; ties go to the larger
// leaf, then the left-most. nullopt for a single-leaf tree.
std::optional<RuleFeature> select_worst_leaf(const RegressionTree& tree);

Eigen::VectorXd tree_predict(const RegressionTree& tree, const VerticalMatrix& m);

}  // namespace eblr

#endif  // EBLR_TREE_HPP
