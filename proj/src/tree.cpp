#include "eblr/tree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

// ---------------------------------------------------------------------------
// Conditions and rules

bool Condition::holds(double value) const {
  switch (relation) {
    case Relation::le:
      return value <= threshold;
    case Relation::gt:
      return value > threshold;
    case Relation::eq:
      return column.kind == ColumnKind::one_hot ? value > 0.5 : (value > 0.5) == (threshold > 0.5);
    case Relation::ne:
      return column.kind == ColumnKind::one_hot ? value <= 0.5 : (value > 0.5) != (threshold > 0.5);
  }
  return false;
}

namespace {

const std::string& display_name(const Condition& c) {
  return c.column.kind == ColumnKind::one_hot ? c.column.source : c.column.name;
}

std::string_view relation_text(Relation r) {
  switch (r) {
    case Relation::le:
      return "<=";
    case Relation::gt:
      return ">";
    case Relation::eq:
      return "=";
    case Relation::ne:
      return "!=";
  }
  return "?";
}

}  // namespace

std::string Condition::to_string() const {
  std::string out = display_name(*this);
  out += relation_text(relation);
  if (column.kind == ColumnKind::one_hot) {
    out += column.level;
  } else {
    out += detail::format_double(threshold);
  }
  return out;
}

std::vector<Condition> simplify(std::vector<Condition> conditions) {
  std::vector<Condition> out;
  std::map<std::string, std::pair<std::optional<Condition>, std::optional<Condition>>> bounds;  // le, gt
  std::map<std::string, bool> categorical_has_eq;
  for (const auto& c : conditions) {
    if (c.column.kind == ColumnKind::one_hot && c.relation == Relation::eq) {
      categorical_has_eq[c.column.source] = true;
    }
  }
  for (auto& c : conditions) {
    if (c.column.kind == ColumnKind::numeric && (c.relation == Relation::le || c.relation == Relation::gt)) {
      auto& [le, gt] = bounds[c.column.name];
      if (c.relation == Relation::le) {
        if (!le || c.threshold < le->threshold) le = c;
      } else {
        if (!gt || c.threshold > gt->threshold) gt = c;
      }
      continue;
    }
    if (c.column.kind == ColumnKind::one_hot && c.relation == Relation::ne && categorical_has_eq[c.column.source]) {
      continue;  // implied by the equality on another level
    }
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
  }
  for (auto& [name, b] : bounds) {
    if (b.first) out.push_back(*b.first);
    if (b.second) out.push_back(*b.second);
  }
  std::sort(out.begin(), out.end(), [](const Condition& a, const Condition& b) {
    return std::forward_as_tuple(display_name(a), a.relation, a.column.level, a.threshold) <
           std::forward_as_tuple(display_name(b), b.relation, b.column.level, b.threshold);
  });
  return out;
}

std::string RuleFeature::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (i > 0) out += " & ";
    out += conditions[i].to_string();
  }
  return out;
}

Eigen::VectorXd RuleFeature::apply(const VerticalMatrix& m) const {
  if (conditions.empty()) throw RuleError("a rule needs at least one condition");
  Eigen::VectorXd out = Eigen::VectorXd::Ones(m.rows());
  for (const auto& c : conditions) {
    const auto idx = m.column_index(c.column.name);
    if (!idx) throw RuleError("rule '" + to_string() + "' needs missing column '" + c.column.name + "'");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (out(r) != 0.0 && !c.holds(m.x(r, *idx))) out(r) = 0.0;
    }
  }
  return out;
}

Eigen::VectorXd apply_rule(const RuleFeature& rule, const VerticalMatrix& m) { return rule.apply(m); }

// ---------------------------------------------------------------------------
// Tree structure

void TreeConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("eta must be a nonnegative number");
  if (min_leaf < 1) throw ValidationError("min_leaf must be positive");
  if (max_depth < 1) throw ValidationError("max_depth must be positive");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error("a regression tree needs a root node");
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<int> RegressionTree::leaves() const {
  // Preorder storage visits leaves left to right.
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

Condition branch_condition(const Split& split, bool left) {
  Condition c{split.column, Relation::le, split.threshold};
  switch (split.column.kind) {
    case ColumnKind::numeric:
      c.relation = left ? Relation::le : Relation::gt;
      break;
    case ColumnKind::binary:
      c.relation = Relation::eq;
      c.threshold = left ? 0.0 : 1.0;
      break;
    case ColumnKind::one_hot:
      c.relation = left ? Relation::ne : Relation::eq;
      c.threshold = 1.0;
      break;
  }
  return c;
}

}  // namespace

std::vector<Condition> RegressionTree::path_conditions(int id) const {
  // Walk down from the root; preorder ids let us pick the branch by range.
  std::vector<Condition> out;
  int cur = 0;
  while (cur != id) {
    const TreeNode& n = node(cur);
    if (n.is_leaf()) throw Error("node id not reachable");
    const bool left = id < n.right;
    out.push_back(branch_condition(*n.split, left));
    cur = left ? n.left : n.right;
  }
  return out;
}

int RegressionTree::leaf_for(const VerticalMatrix& m, Eigen::Index row) const {
  int cur = 0;
  while (!node(cur).is_leaf()) {
    const Split& s = *node(cur).split;
    const auto idx = m.column_index(s.column.name);
    if (!idx) throw PredictionError("missing column '" + s.column.name + "'");
    cur = m.x(row, *idx) <= s.threshold ? node(cur).left : node(cur).right;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Growing

std::optional<SplitCandidate> best_split(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                         const Eigen::Ref<const Eigen::VectorXd>& residuals,
                                         const std::vector<Eigen::Index>& rows, int min_leaf) {
  const std::size_t n = rows.size();
  const auto min_rows = static_cast<std::size_t>(min_leaf);
  if (n < 2 * min_rows || n < 2) return std::nullopt;

  double mean = 0.0;
  for (auto r : rows) mean += residuals(r);
  mean /= static_cast<double>(n);
  // Centered residuals keep the prefix sums well conditioned.
  double node_sse = 0.0;
  for (auto r : rows) node_sse += (residuals(r) - mean) * (residuals(r) - mean);
  if (!(node_sse > 0.0)) return std::nullopt;

  std::optional<SplitCandidate> best;
  std::vector<std::pair<double, double>> sorted(n);  // (value, centered residual)
  for (Eigen::Index col = 0; col < x.cols(); ++col) {
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {x(rows[i], col), residuals(rows[i]) - mean};
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += sorted[i].second;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (sorted[i].first == sorted[i + 1].first) continue;
      if (n_left < min_rows || n_right < min_rows) continue;
      // With centered residuals the total sum is 0, so right_sum = -left_sum
      // and the reduction is left_sum^2 (1/n_left + 1/n_right).
      const double reduction = left_sum * left_sum * (1.0 / static_cast<double>(n_left) +
                                                      1.0 / static_cast<double>(n_right));
      if (reduction <= 1e-12 * node_sse) continue;
      if (!best || reduction > best->reduction) {
        best = SplitCandidate{col, 0.5 * (sorted[i].first + sorted[i + 1].first), reduction};
      }
    }
  }
  return best;
}

namespace {

struct Grower {
  const VerticalMatrix& m;
  const Eigen::Ref<const Eigen::VectorXd>& e;
  const TreeConfig& cfg;
  double total = 0.0;
  std::vector<TreeNode> nodes;

  int grow(const std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double mean = 0.0;
    for (auto r : rows) mean += e(r);
    mean /= static_cast<double>(rows.size());
    double sse = 0.0;
    for (auto r : rows) sse += (e(r) - mean) * (e(r) - mean);
    {
      TreeNode& n = nodes.back();
      n.mean_residual = mean;
      n.sample_count = rows.size();
      n.sample_share = static_cast<double>(rows.size()) / total;
      n.sse = sse;
      n.depth = depth;
    }
    if (depth >= cfg.max_depth) return id;
    const auto split = best_split(m.x, e, rows, cfg.min_leaf);
    if (!split) return id;

    std::vector<Eigen::Index> left_rows;
    std::vector<Eigen::Index> right_rows;
    for (auto r : rows) (m.x(r, split->column) <= split->threshold ? left_rows : right_rows).push_back(r);
    nodes[static_cast<std::size_t>(id)].split =
        Split{m.columns[static_cast<std::size_t>(split->column)], split->threshold};
    const int left = grow(left_rows, depth + 1);
    const int right = grow(right_rows, depth + 1);
    nodes[static_cast<std::size_t>(id)].left = left;
    nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }
};

}  // namespace

RegressionTree grow_tree(const VerticalMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& residuals,
                         const TreeConfig& cfg) {
  cfg.validate();
  if (residuals.size() != m.rows()) throw FitError("residual vector length differs from the row count");
  if (m.rows() == 0) throw FitError("cannot grow a tree on zero rows");
  Grower g{m, residuals, cfg, static_cast<double>(m.rows()), {}};
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(m.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  g.grow(rows, 0);
  return RegressionTree(std::move(g.nodes));
}

RegressionTree fit_tree(const VerticalMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& residuals,
                        const TreeConfig& cfg) {
  return prune(grow_tree(m, residuals, cfg), cfg.eta);
}

// ---------------------------------------------------------------------------
// Pruning

namespace {

struct Pruned {
  std::vector<TreeNode> nodes;  // preorder, ids relative to the subtree root
  std::size_t leaves = 0;
  double leaf_sse = 0.0;
};

Pruned prune_subtree(const RegressionTree& tree, int id, double eta, double root_sse) {
  const TreeNode& n = tree.node(id);
  TreeNode as_leaf = n;
  as_leaf.split.reset();
  as_leaf.left = as_leaf.right = -1;
  if (n.is_leaf()) return {{as_leaf}, 1, n.sse};

  Pruned left = prune_subtree(tree, n.left, eta, root_sse);
  Pruned right = prune_subtree(tree, n.right, eta, root_sse);
  const std::size_t leaves = left.leaves + right.leaves;
  const double subtree_sse = left.leaf_sse + right.leaf_sse;
  const double per_split = (n.sse - subtree_sse) / static_cast<double>(leaves - 1);
  if (!(root_sse > 0.0) || per_split / root_sse <= eta) return {{as_leaf}, 1, n.sse};

  Pruned out;
  out.leaves = leaves;
  out.leaf_sse = subtree_sse;
  out.nodes.reserve(1 + left.nodes.size() + right.nodes.size());
  out.nodes.push_back(n);
  auto append = [&out](const std::vector<TreeNode>& sub) {
    const int base = static_cast<int>(out.nodes.size());
    for (TreeNode c : sub) {
      if (!c.is_leaf()) {
        c.left += base;
        c.right += base;
      }
      out.nodes.push_back(std::move(c));
    }
    return base;
  };
  out.nodes.front().left = append(left.nodes);
  out.nodes.front().right = append(right.nodes);
  return out;
}

}  // namespace

RegressionTree prune(const RegressionTree& tree, double eta) {
  if (!(eta >= 0.0)) throw ValidationError("eta must be nonnegative");
  return RegressionTree(prune_subtree(tree, 0, eta, tree.root().sse).nodes);
}

// ---------------------------------------------------------------------------
// Leaf selection and prediction

std::optional<RuleFeature> select_worst_leaf(const RegressionTree& tree) {
  const auto leaves = tree.leaves();
  if (leaves.size() < 2) return std::nullopt;
  int best = leaves.front();
  for (int id : leaves) {
    const TreeNode& cand = tree.node(id);
    const TreeNode& cur = tree.node(best);
    const double a = std::abs(cand.mean_residual);
    const double b = std::abs(cur.mean_residual);
    if (a > b || (a == b && cand.sample_count > cur.sample_count)) best = id;
  }
  RuleFeature rule;
  rule.conditions = simplify(tree.path_conditions(best));
  rule.leaf_mean = tree.node(best).mean_residual;
  rule.leaf_share = tree.node(best).sample_share;
  return rule;
}

Eigen::VectorXd tree_predict(const RegressionTree& tree, const VerticalMatrix& m) {
  std::vector<Eigen::Index> column(tree.nodes().size(), -1);
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& n = tree.nodes()[i];
    if (n.is_leaf()) continue;
    const auto idx = m.column_index(n.split->column.name);
    if (!idx) throw PredictionError("missing column '" + n.split->column.name + "'");
    column[i] = *idx;
  }
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::size_t cur = 0;
    while (!tree.nodes()[cur].is_leaf()) {
      const auto& n = tree.nodes()[cur];
      cur = static_cast<std::size_t>(m.x(r, column[cur]) <= n.split->threshold ? n.left : n.right);
    }
    out(r) = tree.nodes()[cur].mean_residual;
  }
  return out;
}

}  // namespace eblr
