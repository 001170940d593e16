#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace agps::dsl {

enum class GroupingOp { Sum, Mean, Max, Svd };
enum class UnaryOp { Identity, Square, Double, Negative, Orthogonalize, Inverse, Centralize };
enum class BinaryOp { Add, Minus, Multiply, CrossProduct, CartesianProduct, MatVecProduct };

inline constexpr int kNumGrouping = 4;
inline constexpr int kNumUnary = 7;  // Centralize included; grammar configs may drop it
inline constexpr int kNumBinary = 6;

std::string_view name_of(GroupingOp g);
std::string_view name_of(UnaryOp u);
std::string_view name_of(BinaryOp b);
std::optional<GroupingOp> grouping_from(std::string_view s);
std::optional<UnaryOp> unary_from(std::string_view s);
std::optional<BinaryOp> binary_from(std::string_view s);

// How a derived operant matrix is computed from the base matrices.
enum class OperantRule {
    Base,      // bases[a]
    Hadamard,  // bases[a] . bases[b]   (elementwise)
    Add,       // bases[a] + bases[b]
    Sub,       // bases[a] - bases[b]
    Cross,     // rowwise bases[a] x bases[b]
    Scale2,    // 2 * bases[a]
    Square,    // bases[a] squared elementwise
    Negate,    // -bases[a]
};

struct OperantId {
    std::string name;
    int dim = 3;
    OperantRule rule = OperantRule::Base;
    int arg_a = -1;
    int arg_b = -1;
};

// Expands named k x 3 base matrices into the task operant set: two bases A,B
// give {A, B, A.B, A+B, A-B, B-A, cross(B,A)}; one base gives {A, 2A, A^2, -A}.
std::vector<OperantId> build_operant_set(const std::vector<std::string>& base_names);

Eigen::MatrixXd materialize_operant(const OperantId& op,
                                    const std::vector<Eigen::MatrixXd>& base_mats);

}  // namespace agps::dsl
