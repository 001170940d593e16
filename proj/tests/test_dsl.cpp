#include <cmath>
#include <map>
#include <set>

#include <Eigen/Dense>

#include "agps/dsl/context.hpp"
#include "agps/dsl/eval.hpp"
#include "agps/dsl/ops.hpp"
#include "agps/dsl/tree.hpp"
#include "agps/errors.hpp"
#include "agps/rng.hpp"
#include "doctest.h"

using namespace agps;

namespace {

Eigen::MatrixXd rand_mat(int r, int c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

dsl::PartContext make_ctx(const Eigen::MatrixXd& P, const Eigen::MatrixXd& N) {
    std::vector<Eigen::MatrixXd> channels{P, N};
    std::vector<int> idx(static_cast<std::size_t>(P.rows()));
    for (int i = 0; i < P.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
    return dsl::build_context(channels, idx, dsl::build_operant_set({"P", "N"}));
}

}  // namespace

TEST_CASE("operator names round-trip") {
    for (int i = 0; i < dsl::kNumGrouping; ++i) {
        auto g = static_cast<dsl::GroupingOp>(i);
        CHECK(dsl::grouping_from(dsl::name_of(g)) == g);
    }
    for (int i = 0; i < dsl::kNumUnary; ++i) {
        auto u = static_cast<dsl::UnaryOp>(i);
        CHECK(dsl::unary_from(dsl::name_of(u)) == u);
    }
    for (int i = 0; i < dsl::kNumBinary; ++i) {
        auto b = static_cast<dsl::BinaryOp>(i);
        CHECK(dsl::binary_from(dsl::name_of(b)) == b);
    }
    CHECK(dsl::name_of(dsl::GroupingOp::Svd) == "svd");
    CHECK(dsl::name_of(dsl::UnaryOp::Negative) == "neg");
    CHECK(dsl::name_of(dsl::UnaryOp::Orthogonalize) == "orth");
    CHECK(dsl::name_of(dsl::UnaryOp::Inverse) == "inv");
    CHECK(dsl::name_of(dsl::BinaryOp::Multiply) == "mul");
    CHECK(dsl::name_of(dsl::BinaryOp::CartesianProduct) == "cartesian");
    CHECK(dsl::name_of(dsl::BinaryOp::MatVecProduct) == "matvec");
    CHECK(!dsl::grouping_from("prod").has_value());
    CHECK(!dsl::unary_from("sqrt").has_value());
    CHECK(!dsl::binary_from("xor").has_value());
}

TEST_CASE("operant set expansion") {
    auto two = dsl::build_operant_set({"P", "F"});
    REQUIRE(two.size() == 7);
    CHECK(two[0].name == "P");
    CHECK(two[1].name == "F");
    CHECK(two[2].name == "P_mul_F");
    CHECK(two[3].name == "P_add_F");
    CHECK(two[4].name == "P_minus_F");
    CHECK(two[5].name == "F_minus_P");
    CHECK(two[6].name == "cross_F_P");
    for (const auto& o : two) CHECK(o.dim == 3);

    auto one = dsl::build_operant_set({"P"});
    REQUIRE(one.size() == 4);
    CHECK(one[0].name == "P");
    CHECK(one[1].name == "dbl_P");
    CHECK(one[2].name == "sq_P");
    CHECK(one[3].name == "neg_P");

    CHECK_THROWS_AS(dsl::build_operant_set({}), EmptyBaseSet);
}

TEST_CASE("operant materialization matches direct arithmetic") {
    Rng rng(11);
    Eigen::MatrixXd A = rand_mat(5, 3, rng), B = rand_mat(5, 3, rng);
    std::vector<Eigen::MatrixXd> bases{A, B};
    auto ops = dsl::build_operant_set({"A", "B"});
    CHECK(dsl::materialize_operant(ops[0], bases).isApprox(A));
    CHECK(dsl::materialize_operant(ops[2], bases).isApprox(A.cwiseProduct(B)));
    CHECK(dsl::materialize_operant(ops[3], bases).isApprox(A + B));
    CHECK(dsl::materialize_operant(ops[4], bases).isApprox(A - B));
    CHECK(dsl::materialize_operant(ops[5], bases).isApprox(B - A));
    Eigen::MatrixXd C(5, 3);
    for (int i = 0; i < 5; ++i)
        C.row(i) = Eigen::Vector3d(B.row(i)).cross(Eigen::Vector3d(A.row(i))).transpose();
    CHECK(dsl::materialize_operant(ops[6], bases).isApprox(C));

    std::vector<Eigen::MatrixXd> one{A};
    auto ops1 = dsl::build_operant_set({"A"});
    CHECK(dsl::materialize_operant(ops1[1], one).isApprox(2.0 * A));
    CHECK(dsl::materialize_operant(ops1[2], one).isApprox(A.cwiseProduct(A)));
    CHECK(dsl::materialize_operant(ops1[3], one).isApprox(-A));
}

TEST_CASE("parse and print round-trip") {
    const std::vector<std::string> texts{
        "identity(sum(identity(P)))",
        "orth(sum(cartesian(identity(P_add_F),identity(P))))",
        "identity(svd(centralize(N)))",
        "square(max(add(neg(P),square(mean(identity(N))))))",
        "inv(svd(matvec(identity(P),identity(N))))",
    };
    for (const auto& t : texts) {
        auto tree = dsl::parse_tree(t);
        CHECK(dsl::print_tree(tree) == t);
        CHECK(dsl::tree_equal(tree, dsl::parse_tree(dsl::print_tree(tree))));
    }
    CHECK_FALSE(dsl::tree_equal(dsl::parse_tree(texts[0]), dsl::parse_tree(texts[2])));
}

TEST_CASE("parse errors carry offsets") {
    CHECK_THROWS_AS(dsl::parse_tree(""), ParseError);
    CHECK_THROWS_AS(dsl::parse_tree("identity(sum(identity(P))"), ParseError);
    CHECK_THROWS_AS(dsl::parse_tree("bogus(sum(identity(P)))"), ParseError);
    CHECK_THROWS_AS(dsl::parse_tree("identity(sum(identity(P))) trailing"), ParseError);
    try {
        dsl::parse_tree("identity(sum(identity(P))");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset > 0);
        CHECK(std::string(e.what()).find("parse error at offset") == 0);
    }
}

TEST_CASE("structural validation") {
    auto leaf = dsl::make_leaf(dsl::UnaryOp::Identity, "P");
    auto root = dsl::make_mid(3, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum, leaf);
    CHECK_NOTHROW(dsl::validate_structure(root));

    // root must sit at level 3
    auto bad_level = dsl::make_mid(2, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum, leaf);
    CHECK_THROWS_AS(dsl::validate_structure(bad_level), ParseError);

    // a level-2 mid admits only leaf children
    auto mid2 = dsl::make_mid(2, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum, leaf);
    auto nested = dsl::make_mid(3, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum,
                                dsl::BinaryOp::Add, mid2, leaf);
    CHECK_NOTHROW(dsl::validate_structure(nested));
    auto mid2_pair_mid = dsl::make_mid(2, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum,
                                       dsl::BinaryOp::Add, mid2, leaf);
    auto too_deep = dsl::make_mid(3, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum,
                                  dsl::BinaryOp::Add, mid2_pair_mid, leaf);
    CHECK_THROWS_AS(dsl::validate_structure(too_deep), ParseError);

    // pairs need at least one leaf side
    auto both_mid = dsl::make_mid(3, dsl::UnaryOp::Identity, dsl::GroupingOp::Sum,
                                  dsl::BinaryOp::Add, mid2, mid2);
    CHECK_THROWS_AS(dsl::validate_structure(both_mid), ParseError);
}

TEST_CASE("shape inference") {
    std::map<std::string, int> dims{{"P", 3}, {"N", 3}};
    const int k = 8;

    auto s = dsl::infer_shape(dsl::parse_tree("identity(sum(identity(P)))"), dims, k);
    CHECK(s.level == dsl::FeatureShape::Level::Grouped);
    CHECK(s.rows == 1);
    CHECK(s.dim == 3);

    // cartesian multiplies dims: 3 x 3 -> 9
    s = dsl::infer_shape(dsl::parse_tree("identity(sum(cartesian(identity(P),identity(N))))"),
                         dims, k);
    CHECK(s.dim == 9);

    // orth needs a perfect-square dim >= 4
    CHECK_THROWS_AS(dsl::infer_shape(dsl::parse_tree("orth(sum(identity(P)))"), dims, k),
                    ShapeError);
    CHECK_NOTHROW(dsl::infer_shape(
        dsl::parse_tree("orth(sum(cartesian(identity(P),identity(N))))"), dims, k));

    // matvec reshapes the left side; 3 does not factor as r*3 with r=3 -> 9x3 needed
    CHECK_THROWS_AS(
        dsl::infer_shape(dsl::parse_tree("identity(sum(matvec(identity(P),identity(N))))"), dims,
                         k),
        ShapeError);
    // a grouped 1x9 left side broadcasts against the k x 3 right side
    s = dsl::infer_shape(
        dsl::parse_tree("identity(sum(matvec(identity(sum(cartesian(identity(P),identity(N)))),"
                        "identity(P))))"),
        dims, k);
    CHECK(s.dim == 3);
    CHECK(s.level == dsl::FeatureShape::Level::Grouped);
}

TEST_CASE("unary semantics") {
    Rng rng(5);
    Eigen::MatrixXd m = rand_mat(6, 3, rng);
    CHECK(dsl::apply_unary(dsl::UnaryOp::Identity, m, false).isApprox(m));
    CHECK(dsl::apply_unary(dsl::UnaryOp::Square, m, false).isApprox(m.cwiseProduct(m)));
    CHECK(dsl::apply_unary(dsl::UnaryOp::Double, m, false).isApprox(2.0 * m));
    CHECK(dsl::apply_unary(dsl::UnaryOp::Negative, m, false).isApprox(-m));

    // set-level centralize removes the column mean
    auto c = dsl::apply_unary(dsl::UnaryOp::Centralize, m, false);
    CHECK(c.colwise().mean().norm() < 1e-12);
    // grouped centralize removes the scalar mean of the one row
    Eigen::MatrixXd row = rand_mat(1, 5, rng);
    auto cg = dsl::apply_unary(dsl::UnaryOp::Centralize, row, true);
    CHECK(std::fabs(cg.mean()) < 1e-12);
    CHECK(cg.isApprox(row.array().matrix() - Eigen::MatrixXd::Constant(1, 5, row.mean())));
}

TEST_CASE("orthogonalize maps each row to the nearest rotation") {
    Rng rng(9);
    // build a row holding a perturbed flattened 2x2 rotation
    const double a = 0.7;
    Eigen::Matrix2d R;
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    Eigen::Matrix2d noisy = 3.0 * R;  // pure scaling keeps the polar factor equal to R
    Eigen::MatrixXd m(2, 4);
    m.row(0) << noisy(0, 0), noisy(0, 1), noisy(1, 0), noisy(1, 1);
    m.row(1) = rand_mat(1, 4, rng);
    auto o = dsl::apply_unary(dsl::UnaryOp::Orthogonalize, m, false);
    Eigen::Matrix2d got;
    got << o(0, 0), o(0, 1), o(0, 2), o(0, 3);
    CHECK((got - R).norm() < 1e-12);
    Eigen::Matrix2d other;
    other << o(1, 0), o(1, 1), o(1, 2), o(1, 3);
    CHECK((other * other.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-9);
}

TEST_CASE("inverse is the transposed pseudoinverse") {
    Rng rng(13);
    Eigen::MatrixXd m = rand_mat(4, 4, rng);
    auto inv = dsl::apply_unary(dsl::UnaryOp::Inverse, m, false);
    CHECK((inv.transpose() * m - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-9);

    // rank-deficient input: pseudoinverse drops tiny singular values
    Eigen::MatrixXd lowrank = rand_mat(5, 2, rng) * rand_mat(2, 3, rng);
    auto pinv = dsl::pseudo_inverse(lowrank);
    CHECK((lowrank * pinv * lowrank - lowrank).norm() < 1e-9);
    CHECK((pinv * lowrank * pinv - pinv).norm() < 1e-9);
}

TEST_CASE("grouping semantics") {
    Eigen::MatrixXd m(3, 2);
    m << 1, 5, -2, 7, 4, 0;
    CHECK(dsl::apply_grouping(dsl::GroupingOp::Sum, m) ==
          Eigen::RowVector2d(3, 12).eval());
    CHECK(dsl::apply_grouping(dsl::GroupingOp::Mean, m).isApprox(Eigen::RowVector2d(1, 4)));
    CHECK(dsl::apply_grouping(dsl::GroupingOp::Max, m) == Eigen::RowVector2d(4, 7).eval());
}

TEST_CASE("svd grouping returns the sign-fixed smallest right singular vector") {
    // rows spread in the xy plane: smallest singular direction is +-z
    Rng rng(3);
    Eigen::MatrixXd m(40, 3);
    for (int i = 0; i < 40; ++i) m.row(i) << rng.normal(), rng.normal(), 1e-3 * rng.normal();
    auto v = dsl::apply_grouping(dsl::GroupingOp::Svd, m);
    REQUIRE(v.size() == 3);
    CHECK(std::fabs(v.norm() - 1.0) < 1e-12);
    CHECK(std::fabs(std::fabs(v(2)) - 1.0) < 1e-3);
    // sign rule: the largest-magnitude component is positive
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    CHECK(v(arg) > 0.0);
}

TEST_CASE("binary semantics") {
    Rng rng(17);
    Eigen::MatrixXd a = rand_mat(4, 3, rng), b = rand_mat(4, 3, rng);
    CHECK(dsl::apply_binary(dsl::BinaryOp::Add, a, b).isApprox(a + b));
    CHECK(dsl::apply_binary(dsl::BinaryOp::Minus, a, b).isApprox(a - b));
    CHECK(dsl::apply_binary(dsl::BinaryOp::Multiply, a, b).isApprox(a.cwiseProduct(b)));

    auto cx = dsl::apply_binary(dsl::BinaryOp::CrossProduct, a, b);
    for (int i = 0; i < 4; ++i) {
        Eigen::Vector3d want = Eigen::Vector3d(a.row(i)).cross(Eigen::Vector3d(b.row(i)));
        CHECK((cx.row(i).transpose() - want).norm() < 1e-12);
    }

    // cartesian: row-major flattened outer product
    auto cp = dsl::apply_binary(dsl::BinaryOp::CartesianProduct, a, b);
    REQUIRE(cp.cols() == 9);
    for (int i = 0; i < 4; ++i)
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                CHECK(cp(i, 3 * p + q) == doctest::Approx(a(i, p) * b(i, q)).epsilon(1e-12));

    // matvec: reshape the left row to 3x3 (row-major), multiply the right row
    Eigen::MatrixXd wide = dsl::apply_binary(dsl::BinaryOp::CartesianProduct, a, b);
    auto mv = dsl::apply_binary(dsl::BinaryOp::MatVecProduct, wide, a);
    for (int i = 0; i < 4; ++i) {
        Eigen::Matrix3d M;
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) M(p, q) = wide(i, 3 * p + q);
        Eigen::Vector3d want = M * Eigen::Vector3d(a.row(i));
        CHECK((mv.row(i).transpose() - want).norm() < 1e-10);
    }

    // grouped rhs broadcasts over lhs rows
    Eigen::MatrixXd g = rand_mat(1, 3, rng);
    auto br = dsl::apply_binary(dsl::BinaryOp::Add, a, g);
    CHECK(br.isApprox(a + g.replicate(4, 1)));
}

TEST_CASE("tree evaluation composes the primitives") {
    Rng rng(23);
    Eigen::MatrixXd P = rand_mat(8, 3, rng), N = rand_mat(8, 3, rng);
    auto ctx = make_ctx(P, N);

    auto v = dsl::evaluate_tree(dsl::parse_tree("identity(sum(identity(P)))"), ctx);
    CHECK((v.transpose() - P.colwise().sum()).norm() < 1e-12);

    auto w = dsl::evaluate_tree(dsl::parse_tree("square(mean(add(identity(P),identity(N))))"),
                                ctx);
    Eigen::RowVector3d mean = ((P + N) / 8.0).colwise().sum() / 1.0;
    mean = (P + N).colwise().mean();
    CHECK((w.transpose() - mean.cwiseProduct(mean)).norm() < 1e-12);

    // deterministic: identical calls give bit-identical output
    auto t = dsl::parse_tree("identity(svd(centralize(N)))");
    Eigen::VectorXd r1 = dsl::evaluate_tree(t, ctx), r2 = dsl::evaluate_tree(t, ctx);
    CHECK(r1 == r2);
}

TEST_CASE("evaluation rejects non-finite results") {
    Eigen::MatrixXd P = Eigen::MatrixXd::Constant(4, 3, 1e200);
    Eigen::MatrixXd N = Eigen::MatrixXd::Identity(4, 3);
    auto ctx = make_ctx(P, N);
    CHECK_THROWS_AS(dsl::evaluate_tree(dsl::parse_tree("identity(sum(square(P)))"), ctx),
                    NumericalError);
}

TEST_CASE("part neighbor sampling respects label and radius") {
    Rng rng(31);
    const int n = 60;
    Eigen::MatrixXd pos(n, 3);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        pos.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
        labels[static_cast<std::size_t>(i)] = i % 3;
    }
    const int target = 4;
    auto idx = dsl::sample_part_neighbors(pos, labels, target, 0.8, 16, rng);
    REQUIRE(idx.size() == 16);
    for (int i : idx) {
        CHECK(labels[static_cast<std::size_t>(i)] == labels[target]);
        CHECK((pos.row(i) - pos.row(target)).norm() <= 0.8 + 1e-12);
    }

    // fewer candidates than requested: sampling falls back to replacement
    std::vector<int> solo(n, 1);
    solo[7] = 0;
    auto only = dsl::sample_part_neighbors(pos, solo, 7, 0.5, 8, rng);
    REQUIRE(only.size() == 8);
    for (int i : only) CHECK(i == 7);

    // no replacement when enough candidates exist
    std::vector<int> same(n, 0);
    Rng rng2(77);
    auto wide = dsl::sample_part_neighbors(pos, same, 0, 10.0, 32, rng2);
    std::set<int> uniq(wide.begin(), wide.end());
    CHECK(uniq.size() == wide.size());
}
