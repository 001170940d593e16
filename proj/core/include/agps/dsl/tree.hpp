#pragma once

#include <map>
#include <memory>
#include <string>

#include "agps/dsl/ops.hpp"
#include "agps/errors.hpp"

namespace agps::dsl {

struct TreeNode;
using TreePtr = std::shared_ptr<const TreeNode>;

// Operation tree. A Mid cell groups its connection output and applies a unary
// on top; a Leaf applies a unary to one operant matrix. Root cells carry
// level 3, mid cells nested under the root carry level 2.
struct TreeNode {
    enum class Kind { Leaf, Mid };
    Kind kind = Kind::Leaf;
    UnaryOp unary = UnaryOp::Identity;

    // Leaf
    std::string operant;

    // Mid
    int level = 0;
    GroupingOp grouping = GroupingOp::Sum;
    bool is_pair = false;
    BinaryOp binary = BinaryOp::Add;
    TreePtr left;   // single child lives here
    TreePtr right;  // pair only
};

TreePtr make_leaf(UnaryOp u, std::string operant);
TreePtr make_mid(int level, UnaryOp u, GroupingOp g, TreePtr single_child);
TreePtr make_mid(int level, UnaryOp u, GroupingOp g, BinaryOp b, TreePtr left, TreePtr right);

bool tree_equal(const TreePtr& a, const TreePtr& b);

// Throws ParseError (offset 0) describing the first violated structural rule.
void validate_structure(const TreePtr& tree);

struct FeatureShape {
    enum class Level { SetLevel, Grouped };
    Level level = Level::SetLevel;
    int rows = 0;  // 1 when Grouped
    int dim = 0;
};

// Static shape check; k_rows is the neighbor-sample count feeding every
// operant matrix. Pure: no matrix is touched.
FeatureShape infer_shape(const TreePtr& tree, const std::map<std::string, int>& operant_dims,
                         int k_rows);

TreePtr parse_tree(const std::string& text);
std::string print_tree(const TreePtr& tree);

}  // namespace agps::dsl
