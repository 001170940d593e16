#pragma once

#include <Eigen/Core>

#include "agps/dsl/context.hpp"
#include "agps/dsl/tree.hpp"

namespace agps::dsl {

// Operator primitives. `grouped` selects the one-row semantics where they
// differ (Centralize subtracts the scalar component mean on grouped vectors,
// the column mean otherwise).
Eigen::MatrixXd apply_unary(UnaryOp u, const Eigen::MatrixXd& m, bool grouped);
Eigen::MatrixXd apply_binary(BinaryOp b, const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs);
Eigen::RowVectorXd apply_grouping(GroupingOp g, const Eigen::MatrixXd& m);

// Moore-Penrose pseudoinverse with singular values below 1e-9 * sigma_max
// dropped. Exposed for the oracle-equivalence checks.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

// Evaluates the tree on a context whose operant dims satisfy infer_shape.
// Deterministic; throws NumericalError on non-finite values.
Eigen::VectorXd evaluate_tree(const TreePtr& tree, const PartContext& ctx);

}  // namespace agps::dsl
