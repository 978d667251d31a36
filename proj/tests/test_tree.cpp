#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "eblr/error.hpp"
#include "eblr/tree.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace eblr;
using testing::numeric_matrix;
using testing::exhaustive_best;

namespace {

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

ColumnInfo binary_col(const std::string& name) { return {name, ColumnKind::binary, name, {}}; }

}  // namespace

TEST_CASE("split search agrees with exhaustive enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> rows_d(2, 12), cols_d(1, 3), level_d(0, 4), leaf_d(1, 3);
  std::normal_distribution<double> noise(0.0, 5.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = rows_d(rng), p = cols_d(rng), min_leaf = leaf_d(rng);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = level_d(rng);  // coarse values force ties
      e(i) = std::round(noise(rng));
    }
    const auto fast = best_split(x, e, all_rows(n), min_leaf);
    const auto slow = exhaustive_best(x, e, min_leaf);
    REQUIRE(fast.has_value() == slow.any);
    if (!fast) continue;
    CHECK(fast->reduction == doctest::Approx(slow.reduction).epsilon(1e-9));
    // The reported split must achieve the reported reduction.
    CHECK(testing::split_reduction(x, e, fast->column, fast->threshold) ==
          doctest::Approx(fast->reduction).epsilon(1e-9));
  }
}

TEST_CASE("four-row example splits at the midpoint") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 0, 1, 1;
  Eigen::VectorXd e(4);
  e << 10, 10, -10, -10;
  TreeConfig cfg;
  cfg.min_leaf = 1;
  const RegressionTree t = fit_tree(numeric_matrix(x, e), e, cfg);
  REQUIRE(t.nodes().size() == 3);
  CHECK(t.root().split->column.name == "x0");
  CHECK(t.root().split->threshold == 0.5);
  CHECK(t.root().sse / 4 == doctest::Approx(100.0));
  CHECK(t.node(t.root().left).mean_residual == 10.0);
  CHECK(t.node(t.root().right).mean_residual == -10.0);
  CHECK(t.node(1).sse + t.node(2).sse == 0.0);
}

TEST_CASE("min_leaf and max_depth stop growth") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 0, 1, 1;
  Eigen::VectorXd e(4);
  e << 10, 10, -10, -10;
  TreeConfig cfg;
  cfg.min_leaf = 3;
  CHECK(grow_tree(numeric_matrix(x, e), e, cfg).num_leaves() == 1);

  Eigen::MatrixXd x2(8, 1);
  x2 << 1, 2, 3, 4, 5, 6, 7, 8;
  Eigen::VectorXd e2(8);
  e2 << 1, 2, 3, 4, 5, 6, 7, 8;
  cfg.min_leaf = 1;
  cfg.max_depth = 1;
  CHECK(grow_tree(numeric_matrix(x2, e2), e2, cfg).num_leaves() == 2);
  cfg.max_depth = 2;
  const auto t = grow_tree(numeric_matrix(x2, e2), e2, cfg);
  CHECK(t.num_leaves() == 4);
  for (const auto& n : t.nodes()) CHECK(n.depth <= 2);

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(8, 3.0);
  CHECK(grow_tree(numeric_matrix(x2, flat), flat, cfg).num_leaves() == 1);
}

TEST_CASE("pruning collapses weak splits by normalized risk reduction") {
  // Root split on x0 carries almost everything; the right child's split on
  // x1 reduces SSE by 1 out of a root SSE of 761.5.
  Eigen::MatrixXd x(8, 2);
  x << 0, 0, 0, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1;
  Eigen::VectorXd e(8);
  e << 10, 10, 10, 10, -10, -10, -9, -9;
  TreeConfig cfg;
  cfg.min_leaf = 2;
  cfg.eta = 0.0;
  const auto m = numeric_matrix(x, e);
  const RegressionTree grown = grow_tree(m, e, cfg);
  CHECK(grown.root().sse == doctest::Approx(761.5));
  CHECK(grown.num_leaves() == 3);
  CHECK(prune(grown, 0.001).num_leaves() == 3);
  CHECK(prune(grown, 1.0 / 761.5).num_leaves() == 2);  // equality collapses
  CHECK(prune(grown, 0.002).num_leaves() == 2);
  CHECK(prune(grown, 0.99).num_leaves() == 2);
  CHECK(prune(grown, 1.0).num_leaves() == 1);
  CHECK(prune(grown, 0.0) == grown);
}

TEST_CASE("pruning judges a subtree by its average per split") {
  // Near-XOR: the root split alone is worth 0.5 of 841.5, but the subtree it
  // enables removes all remaining error.
  Eigen::MatrixXd x(8, 2);
  x << 0, 0, 0, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1;
  Eigen::VectorXd e(8);
  e << 11, 11, -10, -10, -10, -10, 10, 10;
  TreeConfig cfg;
  cfg.min_leaf = 2;
  cfg.eta = 0.0;
  const RegressionTree grown = grow_tree(numeric_matrix(x, e), e, cfg);
  REQUIRE(grown.num_leaves() == 4);
  CHECK(grown.root().sse == doctest::Approx(841.5));
  CHECK(prune(grown, 0.001).num_leaves() == 4);
  CHECK(prune(grown, 0.33).num_leaves() == 4);   // 841.5 / 3 / 841.5 = 1/3
  CHECK(prune(grown, 0.34).num_leaves() == 1);
  CHECK(prune(grown, 0.5).num_leaves() == 1);
}

TEST_CASE("tree invariants on random residuals") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 40 + rep * 3;
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = z(rng);
      x(i, 1) = coin(rng);
      x(i, 2) = std::round(3 * z(rng));
      e(i) = 2 * x(i, 1) + (x(i, 0) > 0.3 ? 1.0 : 0.0) + z(rng);
    }
    auto m = numeric_matrix(x, e);
    m.columns[1] = binary_col("b");
    TreeConfig cfg;
    cfg.eta = rep % 2 ? 0.001 : 0.02;
    const RegressionTree t = fit_tree(m, e, cfg);

    std::size_t count = 0;
    double share = 0.0;
    std::map<int, std::vector<double>> routed;
    for (Eigen::Index i = 0; i < n; ++i) routed[t.leaf_for(m, i)].push_back(e(i));
    for (int id : t.leaves()) {
      const auto& node = t.node(id);
      count += node.sample_count;
      share += node.sample_share;
      REQUIRE(routed.count(id));
      CHECK(routed[id].size() == node.sample_count);
      CHECK(node.sample_count >= static_cast<std::size_t>(cfg.min_leaf));
      const double mean = std::accumulate(routed[id].begin(), routed[id].end(), 0.0) / double(routed[id].size());
      CHECK(node.mean_residual == doctest::Approx(mean).epsilon(1e-9));

      // The leaf's path rule selects exactly the rows routed to it.
      RuleFeature rule{simplify(t.path_conditions(id)), 0, 0.0, 0.0};
      if (!rule.conditions.empty()) {
        const Eigen::VectorXd fires = rule.apply(m);
        for (Eigen::Index i = 0; i < n; ++i) CHECK((fires(i) == 1.0) == (t.leaf_for(m, i) == id));
      }
    }
    CHECK(count == static_cast<std::size_t>(n));
    CHECK(share == doctest::Approx(1.0));
    const Eigen::VectorXd pred = tree_predict(t, m);
    for (Eigen::Index i = 0; i < n; ++i) CHECK(pred(i) == t.node(t.leaf_for(m, i)).mean_residual);
  }
}

TEST_CASE("worst leaf selection") {
  auto leaf = [](double mean, std::size_t count) {
    TreeNode n;
    n.mean_residual = mean;
    n.sample_count = count;
    n.sample_share = double(count) / 10.0;
    return n;
  };
  auto tree3 = [&](TreeNode a, TreeNode b) {
    TreeNode root;
    root.split = Split{{"x", ColumnKind::numeric, "x", {}}, 1.5};
    root.left = 1;
    root.right = 2;
    return RegressionTree({root, a, b});
  };
  SUBCASE("largest magnitude wins regardless of sign") {
    const auto rule = select_worst_leaf(tree3(leaf(2.0, 5), leaf(-3.0, 5)));
    REQUIRE(rule);
    CHECK(rule->to_string() == "x>1.5");
    CHECK(rule->leaf_mean == -3.0);
    CHECK(rule->leaf_share == 0.5);
  }
  SUBCASE("ties go to the larger leaf") {
    CHECK(select_worst_leaf(tree3(leaf(-2.0, 3), leaf(2.0, 7)))->to_string() == "x>1.5");
  }
  SUBCASE("full ties go to the left-most leaf") {
    CHECK(select_worst_leaf(tree3(leaf(2.0, 5), leaf(-2.0, 5)))->to_string() == "x<=1.5");
  }
  SUBCASE("a single leaf yields nothing") { CHECK_FALSE(select_worst_leaf(RegressionTree({leaf(1.0, 10)}))); }
}

TEST_CASE("canonical rule text") {
  const ColumnInfo num{"price", ColumnKind::numeric, "price", {}};
  const ColumnInfo promo = binary_col("isPromotion");
  const ColumnInfo weekend = binary_col("isWeekend");
  const ColumnInfo north{"store=north", ColumnKind::one_hot, "store", "north"};
  const ColumnInfo south{"store=south", ColumnKind::one_hot, "store", "south"};

  CHECK(Condition{num, Relation::le, 2.5}.to_string() == "price<=2.5");
  CHECK(Condition{num, Relation::gt, 0.1}.to_string() == "price>0.1");
  CHECK(Condition{num, Relation::gt, 1e21}.to_string() == "price>1e+21");
  CHECK(Condition{promo, Relation::eq, 1.0}.to_string() == "isPromotion=1");
  CHECK(Condition{north, Relation::ne, 1.0}.to_string() == "store!=north");

  RuleFeature r{simplify({{weekend, Relation::eq, 1.0}, {promo, Relation::eq, 1.0}}), 1, 0.0, 0.0};
  CHECK(r.to_string() == "isPromotion=1 & isWeekend=1");

  SUBCASE("numeric bounds keep the tightest interval") {
    const auto c = simplify({{num, Relation::le, 5.0}, {num, Relation::gt, 1.0}, {num, Relation::le, 3.0},
                             {num, Relation::gt, 2.0}});
    CHECK(RuleFeature{c, 0, 0, 0}.to_string() == "price<=3 & price>2");
  }
  SUBCASE("an equality absorbs exclusions on the same categorical") {
    const auto c = simplify({{south, Relation::ne, 1.0}, {north, Relation::eq, 1.0}});
    CHECK(RuleFeature{c, 0, 0, 0}.to_string() == "store=north");
    const auto d = simplify({{south, Relation::ne, 1.0}, {north, Relation::ne, 1.0}});
    CHECK(RuleFeature{d, 0, 0, 0}.to_string() == "store!=north & store!=south");
  }
  SUBCASE("order of input conditions does not matter") {
    std::vector<Condition> c{{num, Relation::gt, 1.0}, {weekend, Relation::eq, 0.0}, {north, Relation::eq, 1.0}};
    const std::string a = RuleFeature{simplify(c), 0, 0, 0}.to_string();
    std::reverse(c.begin(), c.end());
    CHECK(RuleFeature{simplify(c), 0, 0, 0}.to_string() == a);
    CHECK(a == "isWeekend=0 & price>1 & store=north");
  }
}

TEST_CASE("rule evaluation") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  auto m = numeric_matrix(x, Eigen::VectorXd::Zero(4));
  m.columns[0] = binary_col("w");
  m.columns[1] = binary_col("p");
  const RuleFeature both{{{m.columns[0], Relation::eq, 1.0}, {m.columns[1], Relation::eq, 1.0}}, 1, 0, 0};
  CHECK(both.apply(m) == Eigen::Vector4d(0, 0, 0, 1));
  const RuleFeature not_w{{{m.columns[0], Relation::eq, 0.0}}, 1, 0, 0};
  CHECK(apply_rule(not_w, m) == Eigen::Vector4d(1, 1, 0, 0));
  CHECK_THROWS_AS(RuleFeature{}.apply(m), RuleError);
  const RuleFeature missing{{{binary_col("q"), Relation::eq, 1.0}}, 1, 0, 0};
  CHECK_THROWS_AS(missing.apply(m), RuleError);
}

TEST_CASE("tree configuration validation") {
  TreeConfig cfg;
  cfg.eta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.min_leaf = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(grow_tree(numeric_matrix(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3)),
                            Eigen::VectorXd::Zero(2), TreeConfig{}),
                  FitError);
}
