#include "agps/dsl/eval.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace agps::dsl {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* where) {
    if (!m.allFinite()) throw NumericalError(std::string("non-finite values in ") + where);
}

int square_side(int d) {
    for (int s = 2; s * s <= d; ++s)
        if (s * s == d) return s;
    throw ShapeError("eval", "orth on non-square dim " + std::to_string(d));
}

// Row-major reshape of one row to side x side.
Eigen::MatrixXd row_as_square(const Eigen::RowVectorXd& r, int side) {
    Eigen::MatrixXd m(side, side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) m(i, j) = r(i * side + j);
    return m;
}

Eigen::RowVectorXd square_as_row(const Eigen::MatrixXd& m) {
    const int side = static_cast<int>(m.rows());
    Eigen::RowVectorXd r(side * side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) r(i * side + j) = m(i, j);
    return r;
}

Eigen::MatrixXd orthogonalize_rows(const Eigen::MatrixXd& m) {
    const int side = square_side(static_cast<int>(m.cols()));
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::MatrixXd sq = row_as_square(m.row(i), side);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sq, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.row(i) = square_as_row(svd.matrixU() * svd.matrixV().transpose());
    }
    return out;
}

}  // namespace

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-9 * (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd apply_unary(UnaryOp u, const Eigen::MatrixXd& m, bool grouped) {
    switch (u) {
        case UnaryOp::Identity: return m;
        case UnaryOp::Square: return m.array().square().matrix();
        case UnaryOp::Double: return 2.0 * m;
        case UnaryOp::Negative: return -m;
        case UnaryOp::Centralize: {
            if (grouped) return (m.array() - m.mean()).matrix();
            Eigen::RowVectorXd mu = m.colwise().mean();
            return m.rowwise() - mu;
        }
        case UnaryOp::Orthogonalize: {
            require_finite(m, "orth");
            return orthogonalize_rows(m);
        }
        case UnaryOp::Inverse: {
            require_finite(m, "inv");
            // (M^+)^T keeps the operand's shape.
            return pseudo_inverse(m).transpose();
        }
    }
    throw Error("unreachable unary op");
}

namespace {

// Pairs a set-level matrix with a possibly-grouped (one-row) one: the one-row
// side broadcasts.
struct RowPair {
    const Eigen::MatrixXd& l;
    const Eigen::MatrixXd& r;
    Eigen::Index rows() const { return std::max(l.rows(), r.rows()); }
    Eigen::RowVectorXd lrow(Eigen::Index i) const { return l.row(l.rows() == 1 ? 0 : i); }
    Eigen::RowVectorXd rrow(Eigen::Index i) const { return r.row(r.rows() == 1 ? 0 : i); }
};

}  // namespace

Eigen::MatrixXd apply_binary(BinaryOp b, const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs) {
    if (lhs.rows() != rhs.rows() && lhs.rows() != 1 && rhs.rows() != 1)
        throw ShapeError("eval", "binary row mismatch");
    RowPair p{lhs, rhs};
    const Eigen::Index n = p.rows();
    switch (b) {
        case BinaryOp::Add:
        case BinaryOp::Minus:
        case BinaryOp::Multiply: {
            if (lhs.cols() != rhs.cols()) throw ShapeError("eval", "binary dim mismatch");
            Eigen::MatrixXd out(n, lhs.cols());
            for (Eigen::Index i = 0; i < n; ++i) {
                auto a = p.lrow(i);
                auto c = p.rrow(i);
                if (b == BinaryOp::Add)
                    out.row(i) = a + c;
                else if (b == BinaryOp::Minus)
                    out.row(i) = a - c;
                else
                    out.row(i) = a.cwiseProduct(c);
            }
            return out;
        }
        case BinaryOp::CrossProduct: {
            if (lhs.cols() != 3 || rhs.cols() != 3) throw ShapeError("eval", "cross needs dim 3");
            Eigen::MatrixXd out(n, 3);
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::Vector3d a = p.lrow(i);
                Eigen::Vector3d c = p.rrow(i);
                out.row(i) = a.cross(c).transpose();
            }
            return out;
        }
        case BinaryOp::CartesianProduct: {
            const Eigen::Index dl = lhs.cols(), dr = rhs.cols();
            Eigen::MatrixXd out(n, dl * dr);
            for (Eigen::Index i = 0; i < n; ++i) {
                auto a = p.lrow(i);
                auto c = p.rrow(i);
                for (Eigen::Index x = 0; x < dl; ++x)
                    for (Eigen::Index y = 0; y < dr; ++y) out(i, x * dr + y) = a(x) * c(y);
            }
            return out;
        }
        case BinaryOp::MatVecProduct: {
            if (lhs.cols() != rhs.cols() * rhs.cols())
                throw ShapeError("eval", "matvec dim mismatch");
            const int side = static_cast<int>(rhs.cols());
            Eigen::MatrixXd out(n, side);
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::MatrixXd a = row_as_square(p.lrow(i), side);
                Eigen::VectorXd v = p.rrow(i).transpose();
                out.row(i) = (a * v).transpose();
            }
            return out;
        }
    }
    throw Error("unreachable binary op");
}

Eigen::RowVectorXd apply_grouping(GroupingOp g, const Eigen::MatrixXd& m) {
    switch (g) {
        case GroupingOp::Sum: return m.colwise().sum();
        case GroupingOp::Mean: return m.colwise().mean();
        case GroupingOp::Max: return m.colwise().maxCoeff();
        case GroupingOp::Svd: {
            require_finite(m, "svd grouping");
            if (m.rows() < m.cols()) throw ShapeError("eval", "svd grouping needs rows >= dim");
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinV);
            Eigen::VectorXd v = svd.matrixV().col(m.cols() - 1);
            // Sign convention: the component of largest magnitude is positive,
            // ties broken toward the lowest index.
            Eigen::Index best = 0;
            for (Eigen::Index i = 1; i < v.size(); ++i)
                if (std::abs(v(i)) > std::abs(v(best))) best = i;
            if (v(best) < 0.0) v = -v;
            return v.transpose();
        }
    }
    throw Error("unreachable grouping op");
}

namespace {

struct EvalOut {
    Eigen::MatrixXd m;
    bool grouped = false;
};

EvalOut eval_node(const TreePtr& n, const PartContext& ctx) {
    if (n->kind == TreeNode::Kind::Leaf) {
        return {apply_unary(n->unary, ctx.operant(n->operant), false), false};
    }
    Eigen::MatrixXd conn;
    if (!n->is_pair) {
        conn = eval_node(n->left, ctx).m;
    } else {
        EvalOut l = eval_node(n->left, ctx);
        EvalOut r = eval_node(n->right, ctx);
        conn = apply_binary(n->binary, l.m, r.m);
    }
    Eigen::RowVectorXd grouped = apply_grouping(n->grouping, conn);
    return {apply_unary(n->unary, grouped, true), true};
}

}  // namespace

Eigen::VectorXd evaluate_tree(const TreePtr& tree, const PartContext& ctx) {
    EvalOut out = eval_node(tree, ctx);
    Eigen::VectorXd v = out.m.row(0).transpose();
    if (!v.allFinite()) throw NumericalError("non-finite supervision feature");
    return v;
}

}  // namespace agps::dsl
