#include "agps/dsl/ops.hpp"

#include <Eigen/Geometry>

#include "agps/errors.hpp"

namespace agps::dsl {

std::string_view name_of(GroupingOp g) {
    switch (g) {
        case GroupingOp::Sum: return "sum";
        case GroupingOp::Mean: return "mean";
        case GroupingOp::Max: return "max";
        case GroupingOp::Svd: return "svd";
    }
    return "?";
}

std::string_view name_of(UnaryOp u) {
    switch (u) {
        case UnaryOp::Identity: return "identity";
        case UnaryOp::Square: return "square";
        case UnaryOp::Double: return "double";
        case UnaryOp::Negative: return "neg";
        case UnaryOp::Orthogonalize: return "orth";
        case UnaryOp::Inverse: return "inv";
        case UnaryOp::Centralize: return "centralize";
    }
    return "?";
}

std::string_view name_of(BinaryOp b) {
    switch (b) {
        case BinaryOp::Add: return "add";
        case BinaryOp::Minus: return "minus";
        case BinaryOp::Multiply: return "mul";
        case BinaryOp::CrossProduct: return "cross";
        case BinaryOp::CartesianProduct: return "cartesian";
        case BinaryOp::MatVecProduct: return "matvec";
    }
    return "?";
}

std::optional<GroupingOp> grouping_from(std::string_view s) {
    for (int i = 0; i < kNumGrouping; ++i)
        if (s == name_of(static_cast<GroupingOp>(i))) return static_cast<GroupingOp>(i);
    return std::nullopt;
}

std::optional<UnaryOp> unary_from(std::string_view s) {
    for (int i = 0; i < kNumUnary; ++i)
        if (s == name_of(static_cast<UnaryOp>(i))) return static_cast<UnaryOp>(i);
    return std::nullopt;
}

std::optional<BinaryOp> binary_from(std::string_view s) {
    for (int i = 0; i < kNumBinary; ++i)
        if (s == name_of(static_cast<BinaryOp>(i))) return static_cast<BinaryOp>(i);
    return std::nullopt;
}

std::vector<OperantId> build_operant_set(const std::vector<std::string>& base_names) {
    if (base_names.empty()) throw EmptyBaseSet();
    if (base_names.size() > 2)
        throw Error("operant expansion is defined for at most two base features");

    std::vector<OperantId> out;
    if (base_names.size() == 1) {
        const std::string& a = base_names[0];
        out.push_back({a, 3, OperantRule::Base, 0, -1});
        out.push_back({"dbl_" + a, 3, OperantRule::Scale2, 0, -1});
        out.push_back({"sq_" + a, 3, OperantRule::Square, 0, -1});
        out.push_back({"neg_" + a, 3, OperantRule::Negate, 0, -1});
        return out;
    }
    const std::string& a = base_names[0];
    const std::string& b = base_names[1];
    out.push_back({a, 3, OperantRule::Base, 0, -1});
    out.push_back({b, 3, OperantRule::Base, 1, -1});
    out.push_back({a + "_mul_" + b, 3, OperantRule::Hadamard, 0, 1});
    out.push_back({a + "_add_" + b, 3, OperantRule::Add, 0, 1});
    out.push_back({a + "_minus_" + b, 3, OperantRule::Sub, 0, 1});
    out.push_back({b + "_minus_" + a, 3, OperantRule::Sub, 1, 0});
    out.push_back({"cross_" + b + "_" + a, 3, OperantRule::Cross, 1, 0});
    return out;
}

Eigen::MatrixXd materialize_operant(const OperantId& op,
                                    const std::vector<Eigen::MatrixXd>& base_mats) {
    auto base = [&](int i) -> const Eigen::MatrixXd& {
        if (i < 0 || i >= static_cast<int>(base_mats.size()))
            throw Error("operant " + op.name + " references a missing base matrix");
        return base_mats[static_cast<std::size_t>(i)];
    };
    switch (op.rule) {
        case OperantRule::Base: return base(op.arg_a);
        case OperantRule::Hadamard: return base(op.arg_a).cwiseProduct(base(op.arg_b));
        case OperantRule::Add: return base(op.arg_a) + base(op.arg_b);
        case OperantRule::Sub: return base(op.arg_a) - base(op.arg_b);
        case OperantRule::Cross: {
            const Eigen::MatrixXd& a = base(op.arg_a);
            const Eigen::MatrixXd& b = base(op.arg_b);
            Eigen::MatrixXd out(a.rows(), 3);
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                Eigen::Vector3d u = a.row(i);
                Eigen::Vector3d v = b.row(i);
                out.row(i) = u.cross(v).transpose();
            }
            return out;
        }
        case OperantRule::Scale2: return 2.0 * base(op.arg_a);
        case OperantRule::Square: return base(op.arg_a).array().square().matrix();
        case OperantRule::Negate: return -base(op.arg_a);
    }
    throw Error("unreachable operant rule");
}

}  // namespace agps::dsl
